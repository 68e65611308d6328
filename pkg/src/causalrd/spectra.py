"""Stationary Gaussian source spectra on a uniform frequency grid.

All integrals of the form (1/2pi) * int_{-pi}^{pi} g(w) dw are realized as
the plain mean over a uniform periodic grid (:func:`quad_mean`), which is the
midpoint rule and is spectrally accurate for smooth periodic integrands.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError, NonStationaryError

DEFAULT_GRID_POINTS = 4096
TABLE_SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid ``w_k = -pi + 2*pi*k/n`` for ``k = 0..n-1``."""

    n_points: int = DEFAULT_GRID_POINTS

    def __post_init__(self):
        if self.n_points <= 0 or self.n_points % 2:
            raise DomainError(f"n_points must be a positive even integer, got {self.n_points}")

    @cached_property
    def omegas(self) -> NDArray:
        return -np.pi + 2.0 * np.pi * np.arange(self.n_points) / self.n_points

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.n_points

    def mirror_index(self) -> NDArray:
        """Index map k -> index of -w_k (mod 2pi)."""
        return (-np.arange(self.n_points)) % self.n_points

    def to_fft_order(self, values: ArrayLike) -> NDArray:
        """Reorder grid samples so that index 0 corresponds to w = 0."""
        return np.fft.ifftshift(np.asarray(values), axes=-1)

    def from_fft_order(self, values: ArrayLike) -> NDArray:
        return np.fft.fftshift(np.asarray(values), axes=-1)


@dataclass(frozen=True)
class ArModel:
    """``x(k) = sum_m a_m x(k-m) + xi(k)`` with ``var(xi) = innovation_variance``."""

    coeffs: tuple[float, ...] = ()
    innovation_variance: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.innovation_variance > 0:
            raise DomainError("innovation_variance must be positive")
        mags = self.pole_magnitudes()
        bad = mags[mags >= 1.0]
        if bad.size:
            raise NonStationaryError(
                "AR model is not stationary; pole magnitudes >= 1: "
                + ", ".join(f"{m:.6g}" for m in bad)
            )

    @property
    def order(self) -> int:
        return len(self.coeffs)

    def pole_magnitudes(self) -> NDArray:
        if not self.coeffs:
            return np.zeros(0)
        return np.abs(np.roots(np.r_[1.0, -np.asarray(self.coeffs)]))

    def transfer_denominator(self) -> NDArray:
        """Coefficients of ``1 - sum a_m z^-m`` in powers of ``z^-1``."""
        return np.r_[1.0, -np.asarray(self.coeffs, dtype=float)]

    def psd_at(self, omegas: ArrayLike) -> NDArray:
        omegas = np.asarray(omegas, dtype=float)
        m = np.arange(1, self.order + 1)
        den = 1.0 - np.exp(-1j * np.multiply.outer(omegas, m)) @ np.asarray(self.coeffs, dtype=float)
        return self.innovation_variance / np.abs(den) ** 2


@dataclass(frozen=True)
class SpectralModel:
    """PSD samples of a stationary Gaussian source on a :class:`FrequencyGrid`.

    ``ar`` is kept when the spectrum was generated from an AR model so that
    downstream code (time-domain simulation, closed forms) can use it.
    """

    grid: FrequencyGrid
    psd: NDArray
    ar: ArModel | None = field(default=None, compare=False)

    def __post_init__(self):
        psd = np.asarray(self.psd, dtype=float)
        if psd.shape != (self.grid.n_points,):
            raise DomainError(f"psd must have shape ({self.grid.n_points},), got {psd.shape}")
        if not np.all(np.isfinite(psd)):
            raise DomainError("psd contains non-finite samples")
        psd = psd.copy()
        psd.setflags(write=False)
        object.__setattr__(self, "psd", psd)

    @cached_property
    def omega_x(self) -> NDArray:
        return np.sqrt(self.psd)

    @cached_property
    def variance(self) -> float:
        return quad_mean(self.psd)

    @property
    def omegas(self) -> NDArray:
        return self.grid.omegas

    def regrid(self, n_points: int) -> "SpectralModel":
        """Resample on another grid. Only possible for AR-generated spectra."""
        if self.ar is None:
            raise DomainError("tabulated spectra cannot be resampled")
        return psd_from_ar(self.ar, FrequencyGrid(n_points))

    @classmethod
    def from_table(cls, grid: FrequencyGrid, psd: ArrayLike) -> "SpectralModel":
        """Accept a raw PSD table if it is nonnegative and symmetric within 1e-9."""
        psd = np.asarray(psd, dtype=float)
        if psd.shape != (grid.n_points,):
            raise DomainError(f"table has {psd.size} samples, grid has {grid.n_points}")
        if np.any(psd < 0):
            raise DomainError(f"psd has negative samples at bins {np.flatnonzero(psd < 0).tolist()}")
        mirrored = psd[grid.mirror_index()]
        scale = max(float(np.max(np.abs(psd))), 1e-300)
        asym = float(np.max(np.abs(psd - mirrored))) / scale
        if asym > TABLE_SYMMETRY_TOL:
            raise DomainError(f"psd table is not symmetric (max relative asymmetry {asym:.3g})")
        return cls(grid, 0.5 * (psd + mirrored))


def quad_mean(values: ArrayLike) -> float:
    """Grid average, i.e. (1/2pi) * integral over one period."""
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        raise DomainError("quad_mean needs finite values")
    return float(np.mean(values))


def psd_from_ar(model: ArModel, grid: FrequencyGrid | None = None) -> SpectralModel:
    grid = grid or FrequencyGrid()
    return SpectralModel(grid, model.psd_at(grid.omegas), ar=model)


def white(variance: float = 1.0, grid: FrequencyGrid | None = None) -> SpectralModel:
    return psd_from_ar(ArModel((), variance), grid)


def ar_from_poles(poles: Sequence[float], innovation_variance: float = 1.0) -> ArModel:
    """AR model whose colouring filter is ``prod z/(z - p)``."""
    poly = np.poly(np.asarray(poles, dtype=float))
    return ArModel(tuple(-np.real(poly[1:])), innovation_variance)


class PaleyWienerVerdict(NamedTuple):
    ok: bool
    zero_bins: tuple[int, ...]
    log_integral: float

    def __bool__(self):
        return self.ok


def check_paley_wiener(psd: ArrayLike, floor: float = 0.0) -> PaleyWienerVerdict:
    """Log-integrability check on sampled spectra.

    ``ok`` is true iff no sample lies at or below ``floor`` (a zero sample with
    ``floor=0`` diverges the log integral) and the grid mean of
    ``|ln max(psd, floor)|`` is finite.
    """
    if floor < 0:
        raise DomainError("floor must be nonnegative")
    psd = np.asarray(psd, dtype=float)
    if floor > 0:
        bad = np.flatnonzero(psd < floor)
    else:
        bad = np.flatnonzero(psd <= 0)
    with np.errstate(divide="ignore"):
        logs = np.abs(np.log(np.maximum(psd, floor)))
    integral = float(np.mean(logs))
    ok = bool(bad.size == 0 and np.isfinite(integral))
    return PaleyWienerVerdict(ok, tuple(int(b) for b in bad), integral)


def read_psd_csv(path: str | Path) -> SpectralModel:
    """Load an ``omega,psd`` table whose rows cover a uniform grid on [-pi, pi)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["omega", "psd"]:
            raise DomainError(f"{path}: expected header 'omega,psd', got {reader.fieldnames}")
        rows = [(float(r["omega"]), float(r["psd"])) for r in reader]
    rows.sort()
    omegas = np.array([r[0] for r in rows])
    grid = FrequencyGrid(len(rows))
    if not np.allclose(omegas, grid.omegas, rtol=0, atol=1e-9):
        raise DomainError(f"{path}: omega column is not the uniform grid -pi + 2*pi*k/{len(rows)}")
    return SpectralModel.from_table(grid, [r[1] for r in rows])


def write_psd_csv(spec: SpectralModel, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["omega", "psd"])
        for w, s in zip(spec.omegas, spec.psd):
            out.writerow([repr(float(w)), repr(float(s))])
