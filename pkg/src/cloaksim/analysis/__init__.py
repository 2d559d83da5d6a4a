"""Reflection machinery, proof decomposition, resonance and three-spheres checks."""

from .proof import (
    ModeRelations,
    PreconditionError,
    ProofDecomposition,
    WPatch,
    assemble_W,
    auxiliary_decomposition,
    closed_form_difference,
    coefficient_relations,
    removed_singularity,
)
from .reflection import ReflectionPair, reflect_pair, reflect_through_sphere, trace_identity_residuals
from .resonance import (
    ResonanceProfile,
    detect_localized_resonance,
    fitted_bound_constant,
    high_mode_source,
    resonance_profile,
)
from .three_spheres import (
    ThreeSpheresReport,
    combined_exponents,
    gamma_exponent,
    interpolation_constant,
    interpolation_exponent,
    interpolation_trials,
    measured_exponents,
    modal_norm,
    three_spheres_report,
)
