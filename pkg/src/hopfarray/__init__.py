"""Subwavelength resonances and coupled Hopf dynamics of circular resonator arrays."""

from .geometry import Resonator, ResonatorArray, build_graded_array, default_array, validate_array
from .cylinder import CylinderFunctionResult, bessel_j, bessel_j_with_error, hankel1, hankel1_with_error
from .boundary import (
    BoundarySystem,
    MultipoleDensity,
    WaveParams,
    assemble_boundary_system,
    evaluate_field,
    fundamental_solution,
)
from .quadrature import QuadratureSpec, default_spec
from .spectral import (
    DegenerateModeError,
    Eigenmode,
    Resonance,
    ResonanceSearchError,
    extract_eigenmode,
    find_resonances,
    single_disk_resonance,
    subwavelength_cutoff,
)
from .modal import (
    ModalSystem,
    build_modal_system,
    cubic_tensor,
    gram_matrix,
    modal_cache_key,
    refinement_report,
    source_coupling,
)
from .hopf import (
    DEFAULT_BETA,
    ConvergenceError,
    HopfOracleResult,
    PureToneSolution,
    TwoToneSolution,
    cubic_coefficients,
    single_hopf_steady_state,
    solve_passive,
    solve_pure_tone,
    solve_two_tone,
)
from .analysis import (
    PhaseCurve,
    SweepResult,
    UnwrapError,
    default_observation_points,
    group_delay,
    phase_response,
    pure_tone_sweep,
    refined_frequency_grid,
    two_tone_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "Resonator",
    "ResonatorArray",
    "build_graded_array",
    "default_array",
    "validate_array",
    "CylinderFunctionResult",
    "bessel_j",
    "bessel_j_with_error",
    "hankel1",
    "hankel1_with_error",
    "BoundarySystem",
    "MultipoleDensity",
    "WaveParams",
    "assemble_boundary_system",
    "evaluate_field",
    "fundamental_solution",
    "QuadratureSpec",
    "default_spec",
    "Eigenmode",
    "Resonance",
    "extract_eigenmode",
    "find_resonances",
    "ModalSystem",
    "build_modal_system",
    "cubic_tensor",
    "gram_matrix",
    "source_coupling",
    "HopfOracleResult",
    "PureToneSolution",
    "TwoToneSolution",
    "cubic_coefficients",
    "single_hopf_steady_state",
    "solve_passive",
    "solve_pure_tone",
    "solve_two_tone",
    "PhaseCurve",
    "SweepResult",
    "UnwrapError",
    "default_observation_points",
    "group_delay",
    "phase_response",
    "pure_tone_sweep",
    "refined_frequency_grid",
    "two_tone_sweep",
    "DEFAULT_BETA",
    "ConvergenceError",
    "DegenerateModeError",
    "ResonanceSearchError",
    "single_disk_resonance",
    "subwavelength_cutoff",
    "modal_cache_key",
    "refinement_report",
    "__version__",
]
