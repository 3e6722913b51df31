"""Dynamic ranking from time-evolving pairwise comparisons under a smoothness prior."""

__version__ = "0.1.0"

from .errors import (
    ConvergenceError,
    DimensionError,
    DynTranSyncError,
    PreconditionError,
    UnsupportedSizeError,
)
from .estimators import (
    EstimateReport,
    SolverConfig,
    choose_lambda,
    choose_tau,
    dls,
    dproj,
    estimate,
    naive_ls,
)
from .graphseq import GraphSequence, ObservationSet, StrengthTrajectory
from .spectral import SpectralBasis, project_low_frequency, spectral_basis
from .synth import SynthConfig, generate_instance

__all__ = [
    "ConvergenceError", "DimensionError", "DynTranSyncError", "PreconditionError",
    "UnsupportedSizeError", "EstimateReport", "SolverConfig", "choose_lambda", "choose_tau",
    "dls", "dproj", "estimate", "naive_ls", "GraphSequence", "ObservationSet",
    "StrengthTrajectory", "SpectralBasis", "project_low_frequency", "spectral_basis",
    "SynthConfig", "generate_instance",
]
