"""Alternating convex design of the noise-shaping loop and the causal denoiser.

The decision variables are the loop magnitude ``f(w) = |1 - F(e^{jw})|`` on
the frequency grid and the taps ``c`` of an FIR post-filter ``W``. For a
fixed channel SNR constant ``K`` the reconstruction MSE is::

    D_c = <Omega_x |W|, f>^2 / (K - ||f||^2) + ||(W - 1) Omega_x||^2

with ``<.,.>`` and ``||.||`` the grid-mean inner product and norm, subject to
``mean(ln f) = 0``. Minimizing over ``f`` and ``W`` in turn never increases
``D_c`` and converges to the stationary causal RDF at rate ``ln(K)/2``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve, toeplitz
from scipy.optimize import brentq

from .errors import DesignError, DomainError
from .spectra import FrequencyGrid, SpectralModel
from .units import to_bits

log = logging.getLogger(__name__)

DEFAULT_ORDER = 8
DEFAULT_ITERS = 4
KKT_TOL = 1e-8
GRAD_TOL = 1e-9
LOG_MEAN_TOL = 1e-8


@lru_cache(maxsize=32)
def _basis(n_points: int, n_taps: int) -> NDArray:
    """``E[k, m] = exp(-j w_k m)`` so that ``W = E @ c`` on the grid."""
    omegas = FrequencyGrid(n_points).omegas
    E = np.exp(-1j * np.multiply.outer(omegas, np.arange(n_taps)))
    E.setflags(write=False)
    return E


def fir_response(taps: NDArray, grid: FrequencyGrid) -> NDArray:
    taps = np.asarray(taps, dtype=float)
    return _basis(grid.n_points, taps.size) @ taps


@dataclass(frozen=True)
class DesignState:
    """One point of the design problem.

    ``f`` holds the loop magnitude on ``spec.grid``; ``w_taps`` the impulse
    response of the denoiser (order ``len(w_taps) - 1``).
    """

    spec: SpectralModel
    K: float
    f: NDArray
    w_taps: NDArray

    def __post_init__(self):
        if not self.K > 1:
            raise DomainError(f"K must exceed 1, got {self.K}")
        f = np.asarray(self.f, dtype=float)
        if f.shape != self.spec.psd.shape or np.any(f < 0):
            raise DomainError("f must be nonnegative samples on the spectrum grid")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "w_taps", np.atleast_1d(np.asarray(self.w_taps, dtype=float)))

    @property
    def grid(self) -> FrequencyGrid:
        return self.spec.grid

    @property
    def order(self) -> int:
        return self.w_taps.size - 1

    @property
    def W(self) -> NDArray:
        return fir_response(self.w_taps, self.grid)

    def log_mean_f(self) -> float:
        with np.errstate(divide="ignore"):
            return float(np.mean(np.log(self.f)))

    @classmethod
    def initial(cls, spec: SpectralModel, K: float, order: int = DEFAULT_ORDER) -> "DesignState":
        """``f = 1`` and ``W = 1``: the starting point of the alternation."""
        taps = np.zeros(order + 1)
        taps[0] = 1.0
        return cls(spec, K, np.ones_like(spec.psd), taps)


class Cost(NamedTuple):
    D_c: float
    sigma_u_sq: float
    lin_dist: float


def _cost_parts(omega_x, psd, f, W, K):
    margin = K - float(np.mean(f * f))
    if margin <= 0:
        raise DomainError(f"||f||^2 = {K - margin:.6g} must stay below K = {K:.6g}")
    N = float(np.mean(omega_x * np.abs(W) * f))
    sigma_u_sq = N * N / margin
    lin = float(np.mean(psd * np.abs(W - 1.0) ** 2))
    return sigma_u_sq, lin


def eval_cost(state: DesignState) -> Cost:
    sigma_u_sq, lin = _cost_parts(state.spec.omega_x, state.spec.psd, state.f, state.W, state.K)
    return Cost(sigma_u_sq + lin, sigma_u_sq, lin)


# ---------------------------------------------------------------------------
# Step 3: loop magnitude for a fixed denoiser


def _f_family(a, beta, K):
    # positive root of f^2 + beta*a*f - K = 0, rationalized to avoid cancellation
    return 2.0 * K / (beta * a + np.sqrt((beta * a) ** 2 + 4.0 * K))


def kkt_residual(state: DesignState) -> float:
    """Relative stationarity residual of the Step-3 Lagrangian.

    With ``a = Omega_x |W|``, ``N = <a, f>`` and ``Dn = K - ||f||^2``, the
    optimum satisfies ``2 N a / Dn + 2 N^2 f / Dn^2 = mu / f`` pointwise, where
    the multiplier of the log-mean constraint is ``mu = 2 N^2 K / Dn^2``.
    """
    a = state.spec.omega_x * np.abs(state.W)
    f, K = state.f, state.K
    N = float(np.mean(a * f))
    Dn = K - float(np.mean(f * f))
    if N == 0:
        return 0.0
    mu = 2.0 * N * N * K / Dn**2
    resid = f * (2.0 * N * a / Dn + 2.0 * N * N * f / Dn**2) - mu
    return float(np.max(np.abs(resid)) / mu)


def step3_optimize_f(state: DesignState) -> DesignState:
    """Minimize ``D_c`` over ``f`` with ``mean(ln f) = 0`` for the current ``W``.

    Stationarity reduces every optimal ``f`` to the one-parameter family
    ``f^2 + beta a f = K`` (``beta = Dn/N`` holds automatically after
    averaging), and ``mean(ln f)`` is strictly decreasing in ``beta``, so a
    scalar root find on ``ln beta`` settles the constraint.
    """
    a = state.spec.omega_x * np.abs(state.W)
    K = state.K
    if not np.any(a > 0):
        return replace(state, f=np.ones_like(a))

    def log_mean(log_beta):
        return float(np.mean(np.log(_f_family(a, np.exp(log_beta), K))))

    lo, hi = -50.0, 0.0
    while log_mean(hi) > 0:
        hi += 10.0
        if hi > 700:
            raise DesignError("step 3: could not bracket the log-mean constraint; refine the grid or lower the rate")
    while log_mean(lo) < 0:
        lo -= 50.0
        if lo < -700:
            raise DesignError("step 3: could not bracket the log-mean constraint")
    log_beta = brentq(log_mean, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    f = _f_family(a, np.exp(log_beta), K)
    new = replace(state, f=f)
    lm = new.log_mean_f()
    res = kkt_residual(new)
    if abs(lm) > LOG_MEAN_TOL or res > KKT_TOL:
        raise DesignError(
            f"step 3 did not converge (log-mean {lm:.3g}, KKT residual {res:.3g}); "
            "use a finer grid or a smaller rate"
        )
    return new


# ---------------------------------------------------------------------------
# Step 4: FIR denoiser for a fixed loop magnitude


def w_objective(state: DesignState, taps: NDArray, hessian: bool = False):
    """``G(c) = D_c`` as a function of the denoiser taps, with derivatives.

    Returns ``(value, grad)`` or ``(value, grad, hess)``. Bins where ``W = 0``
    contribute a zero subgradient to the ``|W|`` term.
    """
    spec, f, K = state.spec, state.f, state.K
    taps = np.asarray(taps, dtype=float)
    n_taps = taps.size
    E = _basis(spec.grid.n_points, n_taps)
    n = spec.grid.n_points
    W = E @ taps
    absW = np.abs(W)
    Dn = K - float(np.mean(f * f))
    if Dn <= 0:
        raise DomainError("||f||^2 must stay below K")
    weight = spec.omega_x * f
    N = float(np.mean(weight * absW))
    lin = float(np.mean(spec.psd * np.abs(W - 1.0) ** 2))
    value = N * N / Dn + lin

    nz = absW > 0
    # d|W|/dc_m = Re(W e^{jwm}) / |W|
    U = np.zeros((n, n_taps))
    U[nz] = np.real(W[nz, None] * np.conj(E[nz])) / absW[nz, None]
    gN = weight @ U / n
    g_lin = 2.0 * (spec.psd * 1.0) @ np.real((W - 1.0)[:, None] * np.conj(E)) / n
    grad = 2.0 * N / Dn * gN + g_lin
    bad = ~np.isfinite(U).all(axis=1)
    if bad.any() or not np.all(np.isfinite(grad)):
        raise DesignError(f"non-finite step-4 gradient at bins {np.flatnonzero(bad).tolist()[:10]}")
    if not hessian:
        return value, grad

    lags = np.arange(n_taps)
    omegas = spec.grid.omegas
    cos_lag = np.cos(np.multiply.outer(omegas, lags))
    q = np.zeros(n)
    q[nz] = weight[nz] / absW[nz]
    # Hessian of |W|: (cos(w(m-k)) - u_m u_k) / |W|
    hess_abs = toeplitz(q @ cos_lag / n) - (U * q[:, None]).T @ U / n
    hess_lin = 2.0 * toeplitz(spec.psd @ cos_lag / n)
    hess = 2.0 / Dn * (np.outer(gN, gN) + N * hess_abs) + hess_lin
    return value, grad, hess


def step4_optimize_w(state: DesignState, order: int | None = None, max_iter: int = 100) -> DesignState:
    """Minimize ``D_c`` over FIR taps of order ``order`` by damped Newton."""
    taps = state.w_taps.copy()
    if order is not None and order + 1 != taps.size:
        taps = np.resize(np.r_[taps, np.zeros(max(0, order + 1 - taps.size))], order + 1)
    value, grad, hess = w_objective(state, taps, hessian=True)
    for _ in range(max_iter):
        if np.max(np.abs(grad)) < GRAD_TOL:
            break
        try:
            step = solve(hess, grad, assume_a="sym")
        except np.linalg.LinAlgError:
            step = grad
        slope = float(grad @ step)
        if slope <= 0:
            step, slope = grad, float(grad @ grad)
        if slope <= 1e3 * np.finfo(float).eps * abs(value):
            # predicted decrease is below roundoff: Armijo cannot tell, trust Newton
            taps = taps - step
            value, grad, hess = w_objective(state, taps, hessian=True)
            break
        t = 1.0
        while True:
            trial = taps - t * step
            trial_value = w_objective(state, trial)[0]
            if trial_value <= value - 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-12:
                break
        if t < 1e-12:
            break
        taps = trial
        value, grad, hess = w_objective(state, taps, hessian=True)
    else:
        log.warning("step 4 hit max_iter with gradient %.3g", float(np.max(np.abs(grad))))
    return replace(state, w_taps=taps)


# ---------------------------------------------------------------------------
# Full alternation


@dataclass(frozen=True)
class DesignOutcome:
    """Result of the alternation at a fixed target rate.

    ``distortion_trace[i]`` is ``D_c`` after the Step-3/Step-4 pair of
    iteration ``i + 1``. ``final_state`` carries the last ``W`` with ``f``
    re-solved against it, which is what the filter realization needs;
    its cost can only be at or below the last trace entry.
    """

    rate: float
    distortion_trace: tuple[float, ...]
    final_state: DesignState
    sigma_u_sq: float
    distortion: float

    @property
    def K(self) -> float:
        return self.final_state.K

    @property
    def rate_bits(self) -> float:
        return to_bits(self.rate)

    def to_json(self) -> dict:
        return {
            "rate_nats": self.rate,
            "rate_bits": self.rate_bits,
            "K": self.K,
            "distortion": self.distortion,
            "distortion_trace": list(self.distortion_trace),
            "w_taps": self.final_state.w_taps.tolist(),
            "f_samples": self.final_state.f.tolist(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def procedure2(
    spec: SpectralModel,
    target_rate_nats: float,
    order: int = DEFAULT_ORDER,
    iters: int = DEFAULT_ITERS,
    tol: float = 1e-10,
) -> DesignOutcome:
    """Alternate Step 3 and Step 4 starting from ``W = 1`` at ``K = exp(2R)``."""
    if not target_rate_nats > 0:
        raise DomainError("target rate must be positive")
    if iters < 1:
        raise DomainError("need at least one iteration")
    K = float(np.exp(2.0 * target_rate_nats))
    state = DesignState.initial(spec, K, order)
    trace = []
    for it in range(iters):
        state = step3_optimize_f(state)
        state = step4_optimize_w(state)
        D = eval_cost(state).D_c
        log.debug("iteration %d: D_c = %.10g", it + 1, D)
        if trace and abs(trace[-1] - D) <= tol * trace[-1]:
            trace.append(D)
            break
        trace.append(D)
    final = step3_optimize_f(state)
    cost = eval_cost(final)
    return DesignOutcome(float(target_rate_nats), tuple(trace), final, cost.sigma_u_sq, cost.D_c)


# ---------------------------------------------------------------------------
# Convexity probe


def joint_cost(f: NDArray, g: NDArray, G: NDArray, K: float) -> float:
    """``<f, |g|>^2 / (K - ||f||^2) + ||g - G||^2`` on the grid."""
    margin = K - float(np.mean(f * f))
    if margin <= 0:
        raise DomainError("||f||^2 must stay below K")
    return float(np.mean(f * np.abs(g))) ** 2 / margin + float(np.mean(np.abs(g - G) ** 2))


@dataclass(frozen=True)
class ConvexityReport:
    trials: int
    checks: int
    violations: int
    max_violation: float
    min_midpoint_gap: float


def random_feasible_pair(spec: SpectralModel, K: float, rng: np.random.Generator, order: int = 8):
    """A random ``(f, g)`` with ``f > 0``, ``||f||^2 < K`` and ``g = Omega_x W``."""
    omegas = spec.grid.omegas
    harm = np.arange(1, 5)
    logf = np.cos(np.multiply.outer(omegas, harm)) @ rng.normal(0, 0.5, harm.size)
    f = np.exp(logf)
    f *= np.sqrt(rng.uniform(0.05, 0.95) * K / np.mean(f * f))
    taps = rng.normal(0, 0.5, order + 1)
    g = spec.omega_x * fir_response(taps, spec.grid)
    return f, g


def convexity_probe(spec: SpectralModel, K: float, trials: int = 100, seed: int = 0) -> ConvexityReport:
    """Check the convexity inequality along random segments of feasible pairs."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    G = spec.omega_x
    lambdas = np.linspace(0.1, 0.9, 9)
    worst, violations, checks, min_gap = -np.inf, 0, 0, np.inf
    for _ in range(trials):
        f1, g1 = random_feasible_pair(spec, K, rng)
        f2, g2 = random_feasible_pair(spec, K, rng)
        J1, J2 = joint_cost(f1, g1, G, K), joint_cost(f2, g2, G, K)
        for lam in lambdas:
            mid = joint_cost(lam * f1 + (1 - lam) * f2, lam * g1 + (1 - lam) * g2, G, K)
            excess = mid - (lam * J1 + (1 - lam) * J2)
            worst = max(worst, excess)
            min_gap = min(min_gap, -excess)
            checks += 1
            if excess > 1e-10:
                violations += 1
    return ConvexityReport(trials, checks, violations, float(worst), float(min_gap))
