"""Causal filters that realize a design: pre-filter A, post-filter B, loop 1 - F.

Given a design state ``(f, W, K)`` and a channel output normalized to a
white unit spectrum, the squared magnitudes are fixed pointwise::

    sigma_n^2 = 1/K,   |1 - F|^2 = f^2,   |A|^2 = (1 - f^2/K) / S_x,   |B|^2 = 1/|A|^2

Each magnitude is turned into a minimum-phase FIR by real-cepstrum folding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .design import DesignOutcome, DesignState, fir_response
from .errors import DesignError, DomainError, PaleyWienerError
from .spectra import FrequencyGrid, SpectralModel, check_paley_wiener

DEFAULT_TAPS = 64
DEFAULT_OVERSAMPLE = 8
LEADING_TAP_TOL = 1e-6
RECONSTRUCTION_TOL = 1e-3
MIN_PHASE_RADIUS = 1.0 - 1e-6
CONSISTENCY_TOL = 1e-10


class FilterMagnitudes(NamedTuple):
    a_sq: NDArray
    b_sq: NDArray
    one_minus_f_sq: NDArray
    sigma_n_sq: float


def filter_magnitudes(spec: SpectralModel, state: DesignState) -> FilterMagnitudes:
    """Squared filter magnitudes on ``spec.grid`` that make the channel output white."""
    f, K = state.f, state.K
    over = np.flatnonzero(f * f >= K)
    if over.size:
        raise DomainError(
            f"f^2 >= K at {over.size} bins (first {over[:10].tolist()}); refine the design grid"
        )
    psd = spec.psd
    zero = np.flatnonzero(psd <= 0)
    if zero.size:
        raise PaleyWienerError(f"|A|^2 is unbounded where S_x = 0 (bins {zero[:10].tolist()})")
    sigma_n_sq = 1.0 / K
    a_sq = (1.0 - f * f / K) / psd
    resid = float(np.max(np.abs(a_sq * psd + f * f * sigma_n_sq - 1.0)))
    if resid > CONSISTENCY_TOL:
        raise DesignError(f"channel-output normalization violated by {resid:.3g}")
    return FilterMagnitudes(a_sq, 1.0 / a_sq, f * f, sigma_n_sq)


def minimum_phase_fir(
    magnitude: ArrayLike, n_taps: int = DEFAULT_TAPS, oversample: int = DEFAULT_OVERSAMPLE
) -> NDArray:
    """Truncated impulse response of the minimum-phase filter with the given magnitude.

    ``magnitude`` is sampled on a :class:`FrequencyGrid` (natural order). The
    real cepstrum of ``ln|magnitude|`` is folded onto nonnegative quefrencies,
    zero-padded to ``oversample`` times the grid length, exponentiated in the
    frequency domain and transformed back.
    """
    mag = np.asarray(magnitude, dtype=float)
    if n_taps < 1:
        raise DomainError("n_taps must be >= 1")
    if oversample < 1:
        raise DomainError("oversample must be >= 1")
    grid = FrequencyGrid(mag.size)
    verdict = check_paley_wiener(mag * mag)
    if not verdict.ok:
        raise PaleyWienerError(
            f"magnitude is not log-integrable; zero bins {list(verdict.zero_bins[:20])}"
        )
    n = grid.n_points
    cep = np.fft.ifft(np.log(grid.to_fft_order(mag))).real
    folded = np.zeros(oversample * n)
    folded[0] = cep[0]
    folded[1 : n // 2] = 2.0 * cep[1 : n // 2]
    folded[n // 2] = cep[n // 2]
    h = np.fft.ifft(np.exp(np.fft.fft(folded))).real
    out = np.zeros(n_taps)
    m = min(n_taps, h.size)
    out[:m] = h[:m]
    return out


def is_minimum_phase(taps: ArrayLike, radius: float = MIN_PHASE_RADIUS) -> bool:
    """True when every zero of ``sum taps[m] z^-m`` lies inside ``radius``."""
    taps = np.trim_zeros(np.asarray(taps, dtype=float), "b")
    if taps.size == 0 or taps[0] == 0:
        return False
    if taps.size == 1:
        return True
    return bool(np.max(np.abs(np.roots(taps))) < radius)


@dataclass(frozen=True)
class FilterSet:
    """Realized causal filters plus the channel noise level.

    ``one_minus_f_taps`` is the impulse response of ``1 - F(z)``; the
    feedback filter ``F`` itself is its negated tail.
    """

    a_taps: NDArray
    b_taps: NDArray
    one_minus_f_taps: NDArray
    w_taps: NDArray
    sigma_n_sq: float

    @property
    def delta(self) -> float:
        """Quantizer step whose uniform noise has variance ``sigma_n_sq``."""
        return float(np.sqrt(12.0 * self.sigma_n_sq))

    @property
    def total_length(self) -> int:
        return self.a_taps.size + self.b_taps.size + self.one_minus_f_taps.size + self.w_taps.size

    def responses(self, grid: FrequencyGrid) -> dict[str, NDArray]:
        return {
            "A": fir_response(self.a_taps, grid),
            "B": fir_response(self.b_taps, grid),
            "one_minus_F": fir_response(self.one_minus_f_taps, grid),
            "W": fir_response(self.w_taps, grid),
        }

    def reconstruction_error(self, grid: FrequencyGrid) -> float:
        """Sup-norm of ``A B - 1`` on ``grid``."""
        r = self.responses(grid)
        return float(np.max(np.abs(r["A"] * r["B"] - 1.0)))

    def check(self, grid: FrequencyGrid) -> dict[str, float]:
        """Raise :class:`DesignError` on any violated invariant; return the residuals."""
        lead = abs(float(self.one_minus_f_taps[0]) - 1.0)
        recon = self.reconstruction_error(grid)
        problems = []
        if lead > LEADING_TAP_TOL:
            problems.append(f"1-F leading tap off by {lead:.3g}")
        if recon > RECONSTRUCTION_TOL:
            problems.append(f"|AB - 1| reaches {recon:.3g}; use more taps")
        for name, taps in (("A", self.a_taps), ("B", self.b_taps), ("1-F", self.one_minus_f_taps)):
            if not is_minimum_phase(taps):
                problems.append(f"{name} has zeros on or outside the unit circle")
        if problems:
            raise DesignError("; ".join(problems))
        return {"leading_tap": lead, "reconstruction": recon}

    def predicted_mse(self, spec: SpectralModel) -> float:
        """Closed-loop MSE of the realized (truncated) filters by LTI analysis."""
        r = self.responses(spec.grid)
        signal = spec.psd * np.abs(r["W"] * r["A"] * r["B"] - 1.0) ** 2
        noise = self.sigma_n_sq * np.abs(r["W"] * r["B"] * r["one_minus_F"]) ** 2
        return float(np.mean(signal + noise))

    def to_json(self) -> dict:
        return {
            "a_taps": self.a_taps.tolist(),
            "b_taps": self.b_taps.tolist(),
            "f_taps": self.one_minus_f_taps.tolist(),
            "w_taps": self.w_taps.tolist(),
            "sigma_n_sq": self.sigma_n_sq,
            "delta": self.delta,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, data: dict) -> "FilterSet":
        return cls(
            a_taps=np.asarray(data["a_taps"], dtype=float),
            b_taps=np.asarray(data["b_taps"], dtype=float),
            one_minus_f_taps=np.asarray(data["f_taps"], dtype=float),
            w_taps=np.asarray(data["w_taps"], dtype=float),
            sigma_n_sq=float(data["sigma_n_sq"]),
        )


def build_filter_set(
    spec: SpectralModel,
    outcome: DesignOutcome,
    taps: int = DEFAULT_TAPS,
    oversample: int = DEFAULT_OVERSAMPLE,
) -> FilterSet:
    """Realize ``outcome`` as minimum-phase FIR filters of length ``taps``."""
    mags = filter_magnitudes(spec, outcome.final_state)
    fs = FilterSet(
        a_taps=minimum_phase_fir(np.sqrt(mags.a_sq), taps, oversample),
        b_taps=minimum_phase_fir(np.sqrt(mags.b_sq), taps, oversample),
        one_minus_f_taps=minimum_phase_fir(np.sqrt(mags.one_minus_f_sq), taps, oversample),
        w_taps=outcome.final_state.w_taps.copy(),
        sigma_n_sq=mags.sigma_n_sq,
    )
    fs.check(spec.grid)
    return fs
