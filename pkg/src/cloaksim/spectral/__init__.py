"""Exact modal solver for radially layered media."""

from .basis import Layer, exponents
from .expansion import ModeExpansion, combine
from .harmonics import mode_list
from .norms import (
    norm_annulus_h1,
    norm_ball_l2,
    norm_grad_l2,
    norm_l2,
    norm_trace,
    per_mode_l2,
    sigma_energy,
    weighted_energy,
)
from .solver import (
    ConditioningWarning,
    ModalSource,
    RadialLayeredMedium,
    annulus_source,
    interface_matrix,
    solve_field,
    solve_mode,
    transmission_residuals,
)
from .weak import energy_identity, source_pairing, weak_residual
