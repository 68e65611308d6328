import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalrd import ArModel, awgn_rate, psd_from_ar, r_perp, shannon_rdf, white
from causalrd.errors import DomainError
from causalrd.spectra import FrequencyGrid, quad_mean

# tests/oracles.py: 2**16-grid bisection and scipy quad
SHANNON_AR1_D1 = 0.170820297377893
AWGN_AR1_D1 = 0.4549149332155263
PERP_AR1_D1 = 0.4300868283029051


def test_white_quarter():
    p = shannon_rdf(white(1.0), 0.25)
    assert p.rate == pytest.approx(0.5 * np.log(4), rel=1e-12)
    assert p.aux == pytest.approx(0.25)


def test_rate_zero_at_variance(ar1, ar2):
    for s in (ar1, ar2):
        p = shannon_rdf(s, s.variance)
        assert p.rate == 0.0 and p.aux == s.psd.max()
        assert shannon_rdf(s, 2 * s.variance).rate == 0.0


def test_water_level_meets_distortion(ar1):
    p = shannon_rdf(ar1, 1.0)
    assert quad_mean(np.minimum(p.aux, ar1.psd)) == pytest.approx(1.0, rel=1e-10)


def test_shannon_oracle(ar1):
    assert shannon_rdf(ar1, 1.0).rate == pytest.approx(SHANNON_AR1_D1, abs=1e-9)


def test_domain_errors(ar1):
    for bad in (0.0, -1.0):
        with pytest.raises(DomainError):
            shannon_rdf(ar1, bad)
        with pytest.raises(DomainError):
            awgn_rate(ar1, bad)
    for bad in (0.0, ar1.variance, 10.0):
        with pytest.raises(DomainError):
            r_perp(ar1, bad)


def test_awgn_examples(ar1):
    assert awgn_rate(white(1.0), 1.0) == pytest.approx(0.5 * np.log(2))
    assert awgn_rate(ar1, 1.0) == pytest.approx(AWGN_AR1_D1, abs=1e-10)
    rates = [awgn_rate(ar1, d) for d in np.geomspace(1, 1e6 * ar1.variance, 12)]
    assert np.all(np.diff(rates) < 0) and rates[-1] < 1e-5


def test_r_perp_oracle(ar1):
    p = r_perp(ar1, 1.0)
    assert p.rate == pytest.approx(PERP_AR1_D1, abs=1e-9)
    d = quad_mean(0.5 * (np.sqrt(ar1.psd + p.aux) - ar1.omega_x) * ar1.omega_x)
    assert d == pytest.approx(1.0, rel=1e-10)


def test_orderings_and_gap(ar1, ar2):
    for s in (ar1, ar2):
        for D in np.geomspace(0.01, 0.99, 25) * s.variance:
            R = shannon_rdf(s, D).rate
            assert r_perp(s, D).rate >= R
            assert R <= awgn_rate(s, D) <= R + 0.5 * np.log(2) + 1e-12


def test_convex_nonincreasing(ar2):
    Ds = np.linspace(0.2, 6.0, 30)
    for curve in (lambda D: shannon_rdf(ar2, D).rate, lambda D: awgn_rate(ar2, D)):
        r = np.array([curve(D) for D in Ds])
        assert np.all(np.diff(r) <= 0)
        assert np.all(np.diff(r, 2) >= -1e-12)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-0.9, 0.9), lo=st.floats(0.05, 0.5), ratio=st.floats(1.05, 1.8))
def test_r_perp_strictly_decreasing(a, lo, ratio):
    s = psd_from_ar(ArModel((a,), 1.0), FrequencyGrid(1024))
    D1 = lo * s.variance
    D2 = min(ratio * D1, 0.99 * s.variance)
    if D2 <= D1:
        return
    assert r_perp(s, D1).rate > r_perp(s, D2).rate
