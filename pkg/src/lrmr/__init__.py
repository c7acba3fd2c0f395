"""Low-rank matrix reconstruction from compressive linear measurements.

Alternating least-squares solvers (plain and lift-and-project structured),
Cramer-Rao bounds for the matching estimation problems, and a reproducible
Monte Carlo benchmark harness.
"""

from .als import (
    FactorPair,
    SolverOptions,
    SolverReport,
    als_structured,
    als_unstructured,
    init_factors,
    residual,
)
from .bench import ExperimentConfig, SweepResult, TrialResult, run_trial, sweep
from .crb import CrbResult, crb_hankel, crb_psd, crb_to_srer_bound, crb_unstructured
from .errors import DomainError, UnstableRecurrenceError
from .sensing import (
    CorrelatedGaussian,
    IidGaussian,
    SensingOperator,
    make_gaussian_operator,
    make_selection_operator,
    measure,
    prewhiten,
)
from .structures import (
    HANKEL,
    PSD,
    TOEPLITZ,
    UNSTRUCTURED,
    HankelParams,
    StructureSpec,
    generate_hankel_lowrank,
    generate_psd_lowrank,
    hankel_from_params,
    linear_subspace,
    project_linear,
    project_psd,
    prony_fit,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "DomainError",
    "UnstableRecurrenceError",
    "SensingOperator",
    "IidGaussian",
    "CorrelatedGaussian",
    "make_gaussian_operator",
    "make_selection_operator",
    "measure",
    "prewhiten",
    "StructureSpec",
    "UNSTRUCTURED",
    "HANKEL",
    "TOEPLITZ",
    "PSD",
    "HankelParams",
    "linear_subspace",
    "project_linear",
    "project_psd",
    "hankel_from_params",
    "prony_fit",
    "generate_hankel_lowrank",
    "generate_psd_lowrank",
    "SolverOptions",
    "FactorPair",
    "SolverReport",
    "init_factors",
    "residual",
    "als_unstructured",
    "als_structured",
    "CrbResult",
    "crb_unstructured",
    "crb_hankel",
    "crb_psd",
    "crb_to_srer_bound",
    "ExperimentConfig",
    "TrialResult",
    "SweepResult",
    "run_trial",
    "sweep",
]
