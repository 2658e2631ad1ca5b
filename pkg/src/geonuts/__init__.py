"""Hamiltonian Monte Carlo with turning-point termination criteria.

The package covers Euclidean (constant mass matrix) and SoftAbs-Riemannian
kinetic energies, explicit and implicit generalized leapfrog integrators, the
classic and generalized no-u-turn termination criteria, a doubling-tree
sampler built on them, and a closed-form harmonic-motion oracle used to
verify where the criteria fire.
"""

from .config import ConfigError, ExperimentConfig, parse_config
from .harmonic import (
    HarmonicMode,
    HarmonicModes,
    analytic_state,
    eigenfrequencies,
    fit_initial_conditions,
    predict_first_zero,
    predicted_zero_time,
)
from .integrators import (
    DivergenceError,
    IntegratorConfig,
    generalized_leapfrog_step,
    hamiltonian,
    integrate_trajectory,
    leapfrog_step,
)
from .metrics import (
    EuclideanMetric,
    MetricAt,
    SoftAbsMetric,
    kinetic_energy,
    metric_at,
    metric_derivatives,
    sample_momentum,
    softabs_map,
)
from .phase import PhasePoint, TraceEntry, TrajectoryTrace, dot, weighted_inner
from .sampler import (
    ChainResult,
    DrawStats,
    SamplerConfig,
    effective_sample_size,
    nuts_draw,
    run_chain,
    static_hmc_draw,
)
from .targets import BananaTarget, GaussianTarget, TargetModel, fd_gradient, fd_jacobian
from .termination import (
    CriterionReport,
    RhoAccumulator,
    check_subtree_merge,
    classic_value,
    generalized_value,
    transient_guard,
)

__version__ = "0.1.0"

__all__ = [
    "BananaTarget",
    "ChainResult",
    "ConfigError",
    "CriterionReport",
    "DivergenceError",
    "DrawStats",
    "EuclideanMetric",
    "ExperimentConfig",
    "GaussianTarget",
    "HarmonicMode",
    "HarmonicModes",
    "IntegratorConfig",
    "MetricAt",
    "PhasePoint",
    "RhoAccumulator",
    "SamplerConfig",
    "SoftAbsMetric",
    "TargetModel",
    "TraceEntry",
    "TrajectoryTrace",
    "analytic_state",
    "check_subtree_merge",
    "classic_value",
    "dot",
    "effective_sample_size",
    "eigenfrequencies",
    "fd_gradient",
    "fd_jacobian",
    "fit_initial_conditions",
    "generalized_leapfrog_step",
    "generalized_value",
    "hamiltonian",
    "integrate_trajectory",
    "kinetic_energy",
    "leapfrog_step",
    "metric_at",
    "metric_derivatives",
    "nuts_draw",
    "parse_config",
    "predict_first_zero",
    "predicted_zero_time",
    "run_chain",
    "sample_momentum",
    "softabs_map",
    "static_hmc_draw",
    "transient_guard",
    "weighted_inner",
]
