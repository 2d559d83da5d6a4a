"""Modal Kelvin reflection of layered expansions and the reflected fields u1, u2."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..spectral.basis import Layer, exponents
from ..spectral.expansion import ModeExpansion


def _reflect_layer(L: Layer, R: float, d: int) -> Layer:
    # x -> R^2 x/|x|^2 sends sigma0 r^m to sigma0 R^(2m + 2d - 4) r^(4 - 2d - m)
    r_in = R * R / L.r_out if L.r_out != np.inf else 0.0
    r_out = R * R / L.r_in if L.r_in > 0 else np.inf
    sigma = L.sigma * R ** (2 * L.power + 2 * d - 4)
    power = 4.0 - 2.0 * d - L.power
    return Layer(r_in, r_out, sigma, power + 0.0)


def _reflect_pair(d: int, n: int, power: float, p, q, R: float):
    a_hi, a_lo, is_log = exponents(d, n, power)
    if is_log:
        s = R ** (2 * a_hi)
        return s * (p + 2.0 * q * np.log(R)), -s * q
    return q * R ** (2 * a_lo), p * R ** (2 * a_hi)


def reflect_through_sphere(e: ModeExpansion, R: float, side: Optional[str] = None) -> ModeExpansion:
    """The expansion of ``w = v ∘ K`` with ``K(x) = R^2 x / |x|^2``.

    ``side`` restricts ``v`` first: ``'inside'`` keeps ``r < R`` (image lies
    outside ``R``), ``'outside'`` keeps ``r > R``; ``None`` reflects the whole
    expansion. Layer coefficients are mapped to the Kelvin push-forward of the
    layer material, so ``w`` solves the reflected equation exactly.
    """
    lo, hi = e.domain
    if side == "inside":
        e = e.restrict(lo, min(hi, R))
    elif side == "outside":
        e = e.restrict(max(lo, R), hi)
    elif side is not None:
        raise ValueError("side must be 'inside', 'outside' or None")
    layers = [_reflect_layer(L, R, e.d) for L in reversed(e.layers)]
    coeffs = np.zeros_like(e.coeffs)
    nL = len(e.layers)
    for li, L in enumerate(e.layers):
        for i, n in enumerate(e.modes[:, 0]):
            p, q = e.coeffs[i, li]
            coeffs[i, nL - 1 - li] = _reflect_pair(e.d, int(n), L.power, p, q, R)
    return ModeExpansion(e.d, tuple(layers), e.modes, coeffs, n_max=e.n_max, condition=e.condition)


@dataclass(frozen=True)
class ReflectionPair:
    """``u_delta`` with its reflections ``u1 = u_delta ∘ F^{-1}`` on ``(r2, r3)`` and
    ``u2 = u1 ∘ G^{-1}`` on ``(0, r3)``."""

    u_delta: ModeExpansion
    u1: ModeExpansion
    u2: ModeExpansion
    r2: float
    r3: float

    @property
    def r1(self) -> float:
        return self.r2**2 / self.r3


def reflect_pair(u_delta: ModeExpansion, r2: float, r3: float) -> ReflectionPair:
    """Build ``u1`` from the shell part and ``u2`` from the core part of ``u_delta``."""
    r1 = r2 * r2 / r3
    u1 = reflect_through_sphere(u_delta.restrict(r1, r2), r2)
    # the core maps to r > r3 under F, then back into B_{r3} under G
    core_image = reflect_through_sphere(u_delta.restrict(0.0, r1), r2)
    u2 = reflect_through_sphere(core_image, r3)
    return ReflectionPair(u_delta, u1, u2, r2, r3)


def trace_identity_residuals(v: ModeExpansion, w: ModeExpansion, R: float, v_side: str = "-") -> tuple[float, float]:
    """Relative residuals of ``w = v`` and ``sigma_w dw/dr = -sigma_v dv/dr`` on ``|x| = R``."""
    w_side = "+" if v_side == "-" else "-"
    v0, _ = v.trace(R, v_side)
    w0, _ = w.trace(R, w_side)
    fv = v.flux_trace(R, v_side)
    fw = w.flux_trace(R, w_side)
    v0, w0 = _align(v, w, v0, w0)
    fv, fw = _align(v, w, fv, fw)
    rv = np.abs(w0 - v0) / np.maximum(np.maximum(abs(v0), abs(w0)), 1e-300)
    rf = np.abs(fw + fv) / np.maximum(np.maximum(abs(fv), abs(fw)), 1e-300)
    rv[(v0 == 0) & (w0 == 0)] = 0.0
    rf[(fv == 0) & (fw == 0)] = 0.0
    return float(rv.max(initial=0.0)), float(rf.max(initial=0.0))


def _align(a: ModeExpansion, b: ModeExpansion, xa, xb):
    ib = b.mode_index()
    rows = [ib[(int(n), int(k))] for n, k in a.modes]
    return xa, xb[rows]
