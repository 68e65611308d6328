"""Closed-form upper bounds on the causal rate loss R_c(D) - R(D).

All three bounds are in nats/sample. ``b1 <= b2 < b3 <= ln(2)/2`` holds for
every D strictly between 0 and the source variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classic_rdf import _perp_point, shannon_rdf
from .errors import DomainError
from .spectra import SpectralModel, quad_mean

HALF_LN2 = 0.5 * np.log(2.0)


@dataclass(frozen=True)
class BoundReport:
    D: float
    b1: float
    b2: float
    b3: float
    epsilon: float
    r_shannon: float


def _check_open_range(spec, D):
    if not 0 < D < spec.variance:
        raise DomainError(f"bounds need 0 < D < variance ({spec.variance:.6g}), got {D}")


def gain_corrected_distortion(variance, D):
    """Distortion before an optimal scalar gain that yields end-to-end D."""
    return variance * D / (variance - D)


def bound_b1(spec: SpectralModel, D: float) -> float:
    _check_open_range(spec, D)
    d = gain_corrected_distortion(spec.variance, D)
    return _perp_point(spec, d).rate - shannon_rdf(spec, D).rate


def bound_b2(spec: SpectralModel, D: float) -> float:
    _check_open_range(spec, D)
    awgn = quad_mean(0.5 * np.log1p((1.0 - D / spec.variance) * spec.psd / D))
    return awgn - shannon_rdf(spec, D).rate


def default_epsilon(spec: SpectralModel, D: float) -> float:
    """0 when the PSD is bounded away from zero, else 1e-3 * D.

    Every epsilon up to min(S) gives the same integral of 1/max(eps, S), so
    anything above 0 only inflates the (1 + eps/D) factor.
    """
    return 0.0 if float(np.min(spec.psd)) > 0 else 1e-3 * D


def inverse_psd_mean(spec: SpectralModel, epsilon: float) -> float:
    """Grid mean of 1/max(epsilon, S); exact for AR(1) when epsilon <= min S."""
    ar = spec.ar
    if ar is not None and ar.order <= 1 and epsilon <= float(np.min(spec.psd)):
        a = ar.coeffs[0] if ar.order else 0.0
        return (1.0 + a * a) / ar.innovation_variance
    floor = np.maximum(epsilon, spec.psd)
    if np.any(floor <= 0):
        raise DomainError(
            "mean of 1/max(eps, S) diverges because the PSD has zeros; raise epsilon above 0"
        )
    return quad_mean(1.0 / floor)


def bound_b3(spec: SpectralModel, D: float, epsilon: float | None = None) -> float:
    if epsilon is None:
        epsilon = default_epsilon(spec, D)
    if epsilon < 0 or epsilon > D:
        raise DomainError(f"epsilon must satisfy 0 <= epsilon <= D, got epsilon={epsilon}, D={D}")
    var = spec.variance
    if not D > 0:
        raise DomainError(f"distortion must be positive, got {D}")
    if D >= var:
        return 0.0
    varsigma = inverse_psd_mean(spec, epsilon)
    flatness = 0.5 * np.log((1.0 + epsilon / D) * (1.0 + (varsigma - 1.0 / var) * D))
    return float(min(flatness, HALF_LN2, 0.5 * np.log(var / D)))


def bound_report(spec: SpectralModel, D: float, epsilon: float | None = None) -> BoundReport:
    if epsilon is None:
        epsilon = default_epsilon(spec, D)
    return BoundReport(
        D=float(D),
        b1=bound_b1(spec, D),
        b2=bound_b2(spec, D),
        b3=bound_b3(spec, D, epsilon),
        epsilon=float(epsilon),
        r_shannon=shannon_rdf(spec, D).rate,
    )
