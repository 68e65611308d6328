import numpy as np

from causalrd.design import DesignState, step3_optimize_f


def random_state(spec, rng, n_taps=9, K=None):
    """A Step-3-consistent state around random denoiser taps."""
    K = K if K is not None else float(np.exp(2 * rng.uniform(0.05, 1.5)))
    taps = rng.normal(0.0, 0.3, n_taps)
    taps[0] = rng.uniform(0.3, 1.0)
    return step3_optimize_f(DesignState(spec, K, np.ones_like(spec.psd), taps))


def fd_gradient_error(w_objective, state, taps, h=1e-6):
    """Max relative error between the analytic and the central-difference gradient."""
    _, grad = w_objective(state, taps)
    fd = np.empty_like(grad)
    for m in range(taps.size):
        e = np.zeros_like(taps)
        e[m] = h
        fd[m] = (w_objective(state, taps + e)[0] - w_objective(state, taps - e)[0]) / (2 * h)
    return float(np.max(np.abs(grad - fd)) / max(np.max(np.abs(fd)), 1e-12))
