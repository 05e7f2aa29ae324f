"""Galerkin-truncated 2D stochastic Navier-Stokes: simulation and chaos diagnostics."""
from .config import ExperimentConfig, parse_config
from .dynamics import (
    GSNS,
    BlowUpError,
    ForcingPattern,
    NoisePath,
    SimConfig,
    drift,
    drift_jacobian_apply,
    energy,
    enstrophy,
    make_state,
    sample_noise,
    shift_path,
)
from .horseshoe import (
    BallPair,
    HorseshoeCertificate,
    ItinerarySpec,
    RealizationResult,
    SearchConfig,
    certify_full_horseshoe,
    empirical_hitting_times,
    itinerary_residual,
    propose_balls,
    realize_itinerary,
)
from .hypoellipticity import check_hypoelliptic
from .lattice import ModeIndex, build_lattice, build_triads, interaction_coefficient
from .measure import EmpiricalMeasure, moments, pesin_entropy, sample_stationary
from .symbolic import PatternFamily, cylinder_frequency, find_free_set, is_fully_traced, mask_density
from .tangent import LyapunovReport, flow_jacobian, log_moment_diagnostics, lyapunov_spectrum

__version__ = "0.1.0"

__all__ = [
    "BallPair",
    "BlowUpError",
    "EmpiricalMeasure",
    "ExperimentConfig",
    "ForcingPattern",
    "GSNS",
    "HorseshoeCertificate",
    "ItinerarySpec",
    "LyapunovReport",
    "ModeIndex",
    "NoisePath",
    "PatternFamily",
    "RealizationResult",
    "SearchConfig",
    "SimConfig",
    "build_lattice",
    "build_triads",
    "certify_full_horseshoe",
    "check_hypoelliptic",
    "cylinder_frequency",
    "drift",
    "drift_jacobian_apply",
    "empirical_hitting_times",
    "energy",
    "enstrophy",
    "find_free_set",
    "flow_jacobian",
    "interaction_coefficient",
    "is_fully_traced",
    "itinerary_residual",
    "log_moment_diagnostics",
    "lyapunov_spectrum",
    "make_state",
    "mask_density",
    "moments",
    "parse_config",
    "pesin_entropy",
    "propose_balls",
    "realize_itinerary",
    "sample_noise",
    "sample_stationary",
    "shift_path",
]
