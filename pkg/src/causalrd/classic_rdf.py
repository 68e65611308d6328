"""Non-causal reference curves for stationary Gaussian sources.

Shannon's R(D) by reverse water-filling, the rate across a plain AWGN test
channel, and the RDF restricted to source-uncorrelated distortion (R-perp).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError
from .spectra import SpectralModel, quad_mean

_MAX_ITER = 200


@dataclass(frozen=True)
class RdPoint:
    """A (rate, distortion) pair; ``aux`` is the solver's level parameter.

    ``aux`` holds the water level theta for :func:`shannon_rdf`, the scalar
    alpha for :func:`r_perp` and the noise variance for :func:`awgn_rate`.
    """

    rate: float
    distortion: float
    aux: float


def _water_level(psd, D):
    lo = float(np.min(psd)) * 1e-12
    hi = float(np.max(psd))

    def excess(theta):
        return float(np.mean(np.minimum(theta, psd))) - D

    return brentq(excess, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=_MAX_ITER)


def shannon_rdf(spec: SpectralModel, D: float) -> RdPoint:
    """Reverse water-filling. Returns rate 0 (aux = max S) once D >= variance."""
    if not D > 0:
        raise DomainError(f"distortion must be positive, got {D}")
    psd = spec.psd
    if D >= spec.variance:
        return RdPoint(0.0, float(D), float(np.max(psd)))
    theta = _water_level(psd, D)
    with np.errstate(divide="ignore"):
        rate = quad_mean(np.maximum(0.0, 0.5 * np.log(psd / theta)))
    return RdPoint(rate, float(D), theta)


def awgn_rate(spec: SpectralModel, d: float) -> float:
    """Mutual information rate across ``w = x + n`` with ``var(n) = d``."""
    if not d > 0:
        raise DomainError(f"noise variance must be positive, got {d}")
    return quad_mean(0.5 * np.log1p(spec.psd / d))


def _perp_distortion(psd, root_psd, alpha):
    # (sqrt(S+a) - sqrt(S)) written without cancellation
    return float(np.mean(0.5 * alpha / (np.sqrt(psd + alpha) + root_psd) * root_psd))


def _perp_point(spec: SpectralModel, D: float) -> RdPoint:
    """R-perp solved for any D > 0 (the curve continues past the variance)."""
    psd, root = spec.psd, spec.omega_x
    var = spec.variance

    def excess(log_alpha):
        return _perp_distortion(psd, root, np.exp(log_alpha)) - D

    lo, hi = np.log(1e-15 * var), np.log(1e12 * var)
    if excess(lo) > 0 or excess(hi) < 0:
        raise DomainError(f"distortion {D} outside the solvable range of R-perp")
    log_alpha = brentq(excess, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=_MAX_ITER)
    alpha = float(np.exp(log_alpha))
    rate = quad_mean(np.log((np.sqrt(psd + alpha) + root) / np.sqrt(alpha)))
    return RdPoint(rate, float(D), alpha)


def r_perp(spec: SpectralModel, D: float) -> RdPoint:
    if not 0 < D < spec.variance:
        raise DomainError(f"R-perp needs 0 < D < variance ({spec.variance:.6g}), got {D}")
    return _perp_point(spec, D)
