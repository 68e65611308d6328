"""Causal rate-distortion tools for stationary Gaussian sources."""

from .bounds import BoundReport, bound_b1, bound_b2, bound_b3, bound_report
from .classic_rdf import RdPoint, awgn_rate, r_perp, shannon_rdf
from .coder_sim import SimConfig, SimReport, estimate_entropy_rate, simulate
from .design import DesignOutcome, DesignState, convexity_probe, procedure2
from .errors import (
    DesignError,
    DomainError,
    NonStationaryError,
    PaleyWienerError,
    SimulationError,
    SingularBlockError,
)
from .gauss_markov import GmSchedule, procedure1, rcit_ar1, srdf_value, vector_channel
from .realization import FilterSet, build_filter_set, filter_magnitudes, minimum_phase_fir
from .spectra import (
    ArModel,
    FrequencyGrid,
    SpectralModel,
    ar_from_poles,
    check_paley_wiener,
    psd_from_ar,
    quad_mean,
    white,
)

__version__ = "0.1.0"
