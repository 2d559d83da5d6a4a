"""Per-annulus norms along a loss sweep and the localized-resonance flag."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..spectral.expansion import ModeExpansion
from ..spectral.harmonics import mode_list
from ..spectral.norms import norm_annulus_h1, norm_grad_l2, norm_l2
from ..spectral.solver import ModalSource

# flag conventions: interior gradient growth per loss decade, allowed exterior drift
GROWTH_FLAG = 10.0
EXTERIOR_DRIFT = 0.10


@dataclass(frozen=True)
class AnnulusNorms:
    lo: float
    hi: float
    l2: float
    grad_l2: float


@dataclass
class ResonanceProfile:
    delta: float
    rows: list[AnnulusNorms]
    shell_dissipation: float  # delta * ||grad u||^2 on the shell
    h1: float                 # ||u||_{H^1(Omega)}


def resonance_profile(u: ModeExpansion, annuli: Sequence[tuple[float, float]], shell: tuple[float, float],
                      delta: float) -> ResonanceProfile:
    rows = [AnnulusNorms(a, b, norm_l2(u, a, b), norm_grad_l2(u, a, b)) for a, b in annuli]
    e_shell = delta * norm_grad_l2(u, *shell) ** 2
    return ResonanceProfile(delta, rows, e_shell, norm_annulus_h1(u, *u.domain))


@dataclass
class ResonanceFlag:
    flagged: bool
    interior_growth: np.ndarray  # (n_steps, n_interior) per-decade growth of the gradient norm
    exterior_drift: np.ndarray   # (n_steps,) relative change of the exterior L2 norm
    best_annulus: int


def detect_localized_resonance(profiles: Sequence[ResonanceProfile], interior: Sequence[int], exterior: int,
                               growth: float = GROWTH_FLAG, drift: float = EXTERIOR_DRIFT) -> ResonanceFlag:
    """Flag when some interior annulus has gradient growth ``>= growth`` per loss decade
    at every step of a decreasing sweep while the exterior L2 norm moves ``<= drift``."""
    ps = sorted(profiles, key=lambda p: -p.delta)
    g = np.zeros((len(ps) - 1, len(interior)))
    dr = np.zeros(len(ps) - 1)
    for s, (a, b) in enumerate(zip(ps[:-1], ps[1:])):
        decades = np.log10(a.delta / b.delta)
        for j, i in enumerate(interior):
            g[s, j] = (b.rows[i].grad_l2 / a.rows[i].grad_l2) ** (1.0 / decades)
        ea, eb = a.rows[exterior].l2, b.rows[exterior].l2
        dr[s] = abs(eb - ea) / ea
    worst = g.min(axis=0) if len(g) else np.zeros(len(interior))
    best = int(np.argmax(worst)) if len(worst) else 0
    flagged = bool(len(g) and worst[best] >= growth and dr.max() <= drift)
    return ResonanceFlag(flagged, g, dr, best)


def high_mode_source(d: int, radius: float, n_lo: int, n_hi: int, strength: complex = 1.0) -> ModalSource:
    """Ring source with equal strength on every mode ``n_lo <= n <= n_hi``."""
    modes = [tuple(map(int, m)) for m in mode_list(d, n_hi) if m[0] >= n_lo]
    return ModalSource(radius, {m: complex(strength) for m in modes})


def fitted_bound_constant(profiles: Sequence[ResonanceProfile], source_norm: float) -> np.ndarray:
    """``delta * ||u||_{H^1} / ||f||`` per sweep point."""
    return np.array([p.delta * p.h1 / source_norm for p in profiles])
