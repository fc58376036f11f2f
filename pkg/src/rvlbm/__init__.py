"""Relative-velocity lattice Boltzmann schemes with one conservation law.

Simulation of the collide-and-stream dynamics, mechanical derivation of the
third-order equivalent equation (advection, diffusion and dispersion
tensors), and independent verification through Fourier amplification
analysis and direct runs.
"""

from .config import (
    ExperimentConfig,
    InitialData,
    default_k_samples,
    load_config,
    reference_config,
)
from .dispersion import (
    AmplificationMatrix,
    ComparisonReport,
    SymbolSeries,
    amplification_matrix,
    compare_with_prediction,
    dominant_eigenvalue,
    extract_symbol_series,
    geometric_dt_sequence,
    predicted_symbols,
)
from .equivalent import (
    DifferentialOperator,
    EquivalentEquation,
    HenonVector,
    ThetaSet,
    TimeSubstitution,
    XiPrediction,
    advection_vector,
    conservation_defaults,
    derive_equivalent_equation,
    dhumieres_crosscheck,
    henon_sigma,
    momentum_velocity_tensor,
    transition_prediction,
)
from .errors import (
    BranchAmbiguity,
    DimensionMismatch,
    MismatchBeyondTolerance,
    NonConstantShift,
    NonLatticeVelocity,
    OrderUnavailable,
    PoorFit,
    SchemaError,
    SchemeError,
    SingularMatrix,
    ValidationError,
)
from .experiments import (
    analyze_payload,
    convergence_payload,
    dispersion_payload,
    initial_state,
    refinement_study,
    residual_pair,
    simulate_payload,
    spectral_apply,
    verify_report,
)
from .lattice import (
    MomentMatrix,
    MomentPolynomial,
    VelocitySet,
    build_moment_matrix,
    default_basis,
    evaluate_polynomial,
    shift_conjugation,
    validate_basis,
)
from .scheme import (
    MomentField,
    SchemeSpec,
    StateField,
    VelocityShift,
    collide,
    density,
    equilibrium_moments,
    equilibrium_state,
    fourier_mode_state,
    make_state,
    moment_field,
    moments_from_distributions,
    post_collision_distributions,
    relax,
    run,
    save_snapshot,
    sine_density,
    step,
    stream,
)

__version__ = "0.1.0"

__all__ = [
    "AmplificationMatrix",
    "BranchAmbiguity",
    "ComparisonReport",
    "DifferentialOperator",
    "DimensionMismatch",
    "EquivalentEquation",
    "ExperimentConfig",
    "HenonVector",
    "InitialData",
    "MismatchBeyondTolerance",
    "MomentField",
    "MomentMatrix",
    "MomentPolynomial",
    "NonConstantShift",
    "NonLatticeVelocity",
    "OrderUnavailable",
    "PoorFit",
    "SchemaError",
    "SchemeError",
    "SchemeSpec",
    "SingularMatrix",
    "StateField",
    "SymbolSeries",
    "ThetaSet",
    "TimeSubstitution",
    "ValidationError",
    "VelocitySet",
    "VelocityShift",
    "XiPrediction",
    "advection_vector",
    "amplification_matrix",
    "analyze_payload",
    "build_moment_matrix",
    "collide",
    "compare_with_prediction",
    "conservation_defaults",
    "convergence_payload",
    "default_basis",
    "default_k_samples",
    "density",
    "derive_equivalent_equation",
    "dhumieres_crosscheck",
    "dispersion_payload",
    "dominant_eigenvalue",
    "equilibrium_moments",
    "equilibrium_state",
    "evaluate_polynomial",
    "extract_symbol_series",
    "fourier_mode_state",
    "geometric_dt_sequence",
    "henon_sigma",
    "initial_state",
    "load_config",
    "make_state",
    "moment_field",
    "moments_from_distributions",
    "momentum_velocity_tensor",
    "post_collision_distributions",
    "predicted_symbols",
    "reference_config",
    "refinement_study",
    "relax",
    "residual_pair",
    "run",
    "save_snapshot",
    "shift_conjugation",
    "simulate_payload",
    "sine_density",
    "spectral_apply",
    "step",
    "stream",
    "transition_prediction",
    "validate_basis",
    "verify_report",
]
