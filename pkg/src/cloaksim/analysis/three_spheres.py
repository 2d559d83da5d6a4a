"""Three-spheres checks for modal harmonic fields."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..spectral.basis import Layer, exponents
from ..spectral.expansion import ModeExpansion
from ..spectral.harmonics import mode_list
from ..spectral.norms import norm_ball_l2
from ..spectral.solver import transmission_residuals
from .proof import PreconditionError


def interpolation_exponent(r1: float, r2: float, r3: float, printed: bool = False) -> float:
    """Exponent on the inner radius in ``N(r2) <= N(r1)^lam N(r3)^(1-lam)``.

    The log-convex exponent is ``ln(r3/r2)/ln(r3/r1)``; ``printed=True`` returns its
    reciprocal, which exceeds 1 and is kept only to show that it fails.
    """
    lam = np.log(r3 / r2) / np.log(r3 / r1)
    return float(1.0 / lam if printed else lam)


def gamma_exponent(R2: float, R3: float) -> float:
    return float(np.log(R3 / (4 * R2)) / np.log(R3 / R2))


def combined_exponents(beta: float, gamma: float) -> tuple[float, float]:
    den = 1.0 - gamma * (1.0 - beta)
    return beta / den, (1.0 - beta) * (1.0 - gamma) / den


def rate_exponent(alpha: float) -> float:
    """``(2 alpha - 1)/2``; 1/6 for alpha = 2/3."""
    return (2 * alpha - 1) / 2


def modal_norm(v: ModeExpansion, r: float) -> float:
    """``N(v, r) = (sum (n+1)(|p|^2 r^(2 a_hi) + |q|^2 r^(2 a_lo)))^(1/2)`` from the layer at ``r``."""
    li = int(v.layer_index(r))
    L = v.layers[li]
    tot = 0.0
    for i, n in enumerate(v.modes[:, 0]):
        a_hi, a_lo, is_log = exponents(v.d, int(n), L.power)
        p, q = v.coeffs[i, li]
        lo_pow = a_hi if is_log else a_lo
        tot += (n + 1) * (abs(p) ** 2 * r ** (2 * a_hi) + abs(q) ** 2 * r ** (2 * lo_pow))
    return float(np.sqrt(tot))


def harmonic_field(d: int, coeffs: dict, radius: float) -> ModeExpansion:
    """Harmonic polynomial ``sum c_(n,k) r^n Y_(n,k)`` on the ball of the given radius."""
    modes = np.array(sorted(coeffs), dtype=int).reshape(-1, 2)
    c = np.zeros((len(modes), 1, 2), dtype=complex)
    c[:, 0, 0] = [coeffs[tuple(m)] for m in modes]
    return ModeExpansion(d, (Layer(0.0, radius, 1.0),), modes, c)


def random_harmonic(d: int, n_max: int, radius: float, rng: np.random.Generator,
                    decaying: bool = False, inner: Optional[float] = None) -> ModeExpansion:
    """Random finite-mode harmonic field; with ``decaying`` it lives on ``(inner, radius)``
    and carries both radial branches."""
    modes = mode_list(d, n_max)
    keep = rng.random(len(modes)) < 0.5
    keep[rng.integers(len(modes))] = True
    modes = modes[keep]
    c = np.zeros((len(modes), 1, 2), dtype=complex)
    scale = rng.uniform(0.5, 2.0, len(modes)) ** modes[:, 0] * radius ** (-modes[:, 0].astype(float))
    c[:, 0, 0] = (rng.normal(size=len(modes)) + 1j * rng.normal(size=len(modes))) * scale
    lo = 0.0
    if decaying:
        lo = inner
        c[:, 0, 1] = (rng.normal(size=len(modes)) + 1j * rng.normal(size=len(modes))) * inner ** (modes[:, 0] + d - 2.0)
        if d == 2:
            c[modes[:, 0] == 0, 0, 1] = 0.0
    return ModeExpansion(d, (Layer(lo, radius, 1.0),), modes, c)


def interpolation_constant(v: ModeExpansion, r1: float, r2: float, r3: float, printed: bool = False) -> float:
    """``N(v, r2) / (N(v, r1)^lam N(v, r3)^(1-lam))``."""
    lam = interpolation_exponent(r1, r2, r3, printed)
    n1, n2, n3 = (modal_norm(v, r) for r in (r1, r2, r3))
    return float(n2 / (n1**lam * n3 ** (1 - lam)))


def interpolation_trials(d: int, n_trials: int, n_max: int, radii: tuple[float, float, float],
                         seed: int = 0, printed: bool = False) -> np.ndarray:
    """Effective constants over random two-branch harmonic fields on an annulus."""
    rng = np.random.default_rng(seed)
    r1, r2, r3 = radii
    out = np.empty(n_trials)
    for t in range(n_trials):
        v = random_harmonic(d, n_max, r3, rng, decaying=True, inner=0.5 * r1)
        out[t] = interpolation_constant(v, r1, r2, r3, printed)
    return out


@dataclass
class ThreeSpheresReport:
    radii: tuple[float, float, float]
    alpha: float
    beta: float
    gamma: float
    lam: float
    norms: tuple[float, float, float]
    c_eff: float
    modal_constant: float  # N(2 R2) / (N(R2/2)^lam N(R3/2)^(1-lam)); nan unless 4 R2 < R3


def three_spheres_report(v: ModeExpansion, R1: float, R2: float, R3: float, alpha: float = 2.0 / 3.0,
                         tol: float = 1e-9, printed: bool = False) -> ThreeSpheresReport:
    """Norms on the three balls, ``C_eff = |v|_R2 / (|v|_R1^alpha |v|_R3^(1-alpha))`` and the
    exponents; ``v`` must be a modal solution regular at the origin."""
    if not 0 < R1 < R2 < R3:
        raise ValueError("need 0 < R1 < R2 < R3")
    if v.domain[0] != 0.0 or v.domain[1] < R3:
        raise PreconditionError("field must be defined on the whole ball B_{R3}")
    res = transmission_residuals(v)
    if res.size and res.max() > tol:
        raise PreconditionError(f"field is not a solution (transmission residual {res.max():.3e})")
    if np.any(np.abs(v.coeffs[:, 0, 1]) > 0):
        raise PreconditionError("field is singular at the origin")
    n1, n2, n3 = (norm_ball_l2(v, R) for R in (R1, R2, R3))
    c_eff = n2 / (n1**alpha * n3 ** (1 - alpha))
    lam = interpolation_exponent(R2 / 2, 2 * R2, R3 / 2, printed)
    # the modal step (R2/2, 2 R2, R3/2) needs ordered radii and one harmonic layer
    modal = np.nan
    if len(v.layers) == 1 and 4 * R2 < R3:
        modal = interpolation_constant(v, R2 / 2, 2 * R2, R3 / 2, printed)
    return ThreeSpheresReport((R1, R2, R3), alpha, rate_exponent(alpha), gamma_exponent(R2, R3),
                              lam, (n1, n2, n3), float(c_eff), float(modal))


def measured_exponents(d: int, R1: float, R2: float, R3: float, n: int = 3) -> dict:
    """Exponents that make each step an equality for the monomial ``r^n Y_n``.

    ``beta`` from the L2 step (R1, R2, 2 R2), ``gamma`` from the modal step
    (R2/2, 2 R2, R3/2); both are independent of ``n`` for a monomial.
    """
    v = harmonic_field(d, {(n, n): 1.0}, R3)
    l1, l2, l4 = (norm_ball_l2(v, R) for R in (R1, R2, 2 * R2))
    beta = np.log(l4 / l2) / np.log(l4 / l1)
    a, b, c = (modal_norm(v, r) for r in (R2 / 2, 2 * R2, R3 / 2))
    gamma = np.log(c / b) / np.log(c / a)
    x1, x2 = combined_exponents(beta, gamma)
    return {"beta": float(beta), "gamma": float(gamma), "inner": x1, "outer": x2}
