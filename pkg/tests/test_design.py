import json

import numpy as np
import pytest

from causalrd import r_perp, white
from causalrd.design import (
    DesignState,
    convexity_probe,
    eval_cost,
    joint_cost,
    kkt_residual,
    procedure2,
    random_feasible_pair,
    step3_optimize_f,
    step4_optimize_w,
    w_objective,
)
from causalrd.errors import DomainError
from causalrd.units import to_nats

from design_helpers import fd_gradient_error, random_state

K = 3.0
# 10-tap denoiser after five cycles at 0.2601 bits on the AR(1) source
REFERENCE_W_TAPS = [0.3027, 0.1899, 0.1192, 0.0748, 0.0470, 0.0296, 0.0188, 0.0123, 0.0086, 0.0070]


def test_cost_white_closed_forms():
    s = white(1.0)
    st = DesignState.initial(s, K, order=0)
    c = eval_cost(st)
    assert c.D_c == pytest.approx(1 / (K - 1))
    assert c.lin_dist == 0.0
    st = DesignState(s, K, np.ones_like(s.psd), [(K - 1) / K])
    assert eval_cost(st).D_c == pytest.approx(1 / K)


def test_cost_rejects_large_f(ar1):
    st = DesignState(ar1, 2.0, np.full(ar1.psd.size, 1.5), [1.0])
    with pytest.raises(DomainError):
        eval_cost(st)
    with pytest.raises(DomainError):
        DesignState(ar1, 1.0, np.ones_like(ar1.psd), [1.0])


def test_step3_white_gives_unit_f():
    st = step3_optimize_f(DesignState.initial(white(2.0), K))
    assert np.allclose(st.f, 1.0, atol=1e-12)


def test_step3_reproduces_r_perp(ar1):
    rate = to_nats(0.2601)
    st = step3_optimize_f(DesignState.initial(ar1, np.exp(2 * rate)))
    D = eval_cost(st).D_c
    assert abs(st.log_mean_f()) < 1e-8 and kkt_residual(st) < 1e-8
    assert r_perp(ar1, D).rate == pytest.approx(rate, abs=1e-3)


def test_steps_never_increase_cost(ar2, rng):
    for _ in range(5):
        st = random_state(ar2, rng)
        before = eval_cost(st).D_c
        st4 = step4_optimize_w(st)
        after4 = eval_cost(st4).D_c
        st3 = step3_optimize_f(st4)
        assert after4 <= before + 1e-12
        assert eval_cost(st3).D_c <= after4 + 1e-12


def test_step4_white_scalar():
    s = white(1.0)
    st = step4_optimize_w(DesignState.initial(s, K, order=0))
    assert st.w_taps[0] == pytest.approx((K - 1) / K, abs=1e-10)


def test_step4_reaches_stationarity(ar1, rng):
    st = step4_optimize_w(random_state(ar1, rng))
    _, grad = w_objective(st, st.w_taps)
    assert np.max(np.abs(grad)) < 1e-9


def test_gradient_matches_finite_differences(ar1, rng):
    st = random_state(ar1, rng)
    assert fd_gradient_error(w_objective, st, st.w_taps) < 1e-5


def test_hessian_matches_finite_differences(ar2, rng):
    st = random_state(ar2, rng, n_taps=5)
    taps = st.w_taps
    _, _, H = w_objective(st, taps, hessian=True)
    h = 1e-6
    fd = np.column_stack(
        [
            (w_objective(st, taps + h * e)[1] - w_objective(st, taps - h * e)[1]) / (2 * h)
            for e in np.eye(taps.size)
        ]
    )
    assert np.max(np.abs(H - fd)) < 1e-6 * np.max(np.abs(H))


def test_procedure2_white_closed_form():
    s = white(2.0)
    for rate in (0.1, 1.0, 3.0):
        out = procedure2(s, rate)
        Kr = np.exp(2 * rate)
        assert out.distortion == pytest.approx(2.0 / Kr, rel=1e-6)
        assert np.allclose(out.final_state.w_taps[1:], 0.0, atol=1e-9)


def test_procedure2_trace_nonincreasing(ar2):
    out = procedure2(ar2, to_nats(0.5), iters=6)
    assert np.all(np.diff(out.distortion_trace) <= 1e-12)
    assert out.distortion <= out.distortion_trace[-1] + 1e-12


def test_ten_taps_match_listing(ar1):
    out = procedure2(ar1, to_nats(0.2601), order=9, iters=5)
    assert out.final_state.w_taps == pytest.approx(REFERENCE_W_TAPS, abs=2e-4)


def test_tap_decay(ar1):
    out = procedure2(ar1, to_nats(0.2601), order=16, iters=8)
    assert np.all(np.diff(np.abs(out.final_state.w_taps)) <= 1e-6)


def test_outcome_json(golden_design):
    doc = json.loads(golden_design.dumps())
    assert list(doc) == ["rate_nats", "rate_bits", "K", "distortion", "distortion_trace", "w_taps", "f_samples"]
    assert doc["rate_bits"] == pytest.approx(0.2601)
    assert doc["K"] == pytest.approx(np.exp(2 * doc["rate_nats"]))


def test_procedure2_domain(ar1):
    with pytest.raises(DomainError):
        procedure2(ar1, 0.0)
    with pytest.raises(DomainError):
        procedure2(ar1, 0.1, iters=0)


def test_convexity_identical_endpoints(ar1, rng):
    f, g = random_feasible_pair(ar1, K, rng)
    J = joint_cost(f, g, ar1.omega_x, K)
    for lam in (0.1, 0.5, 0.9):
        mid = joint_cost(lam * f + (1 - lam) * f, lam * g + (1 - lam) * g, ar1.omega_x, K)
        assert mid == pytest.approx(J, abs=1e-12)


def test_convexity_strict_midpoint(ar1, rng):
    G = ar1.omega_x
    for _ in range(10):
        f1, g1 = random_feasible_pair(ar1, K, rng)
        f2, g2 = random_feasible_pair(ar1, K, rng)
        if abs(np.mean(f1 * f1) - np.mean(f2 * f2)) <= 1e-3:
            continue
        mid = joint_cost(0.5 * (f1 + f2), 0.5 * (g1 + g2), G, K)
        assert mid < 0.5 * (joint_cost(f1, g1, G, K) + joint_cost(f2, g2, G, K))


def test_convexity_probe_ar2(ar2):
    rep = convexity_probe(ar2, K, trials=30, seed=3)
    assert rep.violations == 0 and rep.checks == 30 * 9
