"""Mode relations, removed singularity, the patched field W and the auxiliary
decomposition ``V = U - w`` for the radial cloak."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..media import Medium
from ..spectral.basis import Layer
from ..spectral.expansion import ModeExpansion, combine
from ..spectral.norms import norm_annulus_h1, norm_l2, trace_norm_from_coeffs
from ..spectral.solver import ModalSource, solve_field, transmission_residuals
from .reflection import ReflectionPair


class PreconditionError(ValueError):
    pass


def mode_factor(d: int, n) -> np.ndarray:
    """``kappa_n``: 1/2 in 2D (0 for the constant mode), ``n/(2n+1)`` in 3D."""
    n = np.asarray(n, dtype=float)
    return np.where(n > 0, 0.5, 0.0) if d == 2 else n / (2 * n + 1)


def _decay_power(d: int, n) -> np.ndarray:
    # r3 exponent of the decaying branch coefficient: 2n (2D), 2n+1 (3D)
    return 2 * np.asarray(n, dtype=float) + d - 2


def predicted_d(d: int, n, e, delta: float, r3: float) -> np.ndarray:
    n = np.asarray(n)
    return -1j * delta * mode_factor(d, n) * r3 ** _decay_power(d, n) * np.asarray(e) / (1 - 1j * delta)


def predicted_c(d: int, n, e, delta: float, r3: float) -> np.ndarray:
    n = np.asarray(n)
    return np.asarray(e) - predicted_d(d, n, e, delta, r3) * r3 ** (-_decay_power(d, n))


@dataclass
class ModeRelations:
    d: int
    modes: np.ndarray
    c: np.ndarray
    d_coef: np.ndarray
    e: np.ndarray
    delta: float
    r3: float
    matching: np.ndarray   # value match at r3, relative
    ratio_c: np.ndarray    # |c - predicted c| relative to max(|c|, |e|)
    ratio_d: np.ndarray    # same for d r3^-(2n+d-2)

    @property
    def max_residual(self) -> float:
        return float(max(self.matching.max(initial=0.0), self.ratio_c.max(initial=0.0),
                         self.ratio_d.max(initial=0.0)))


def _rel(a, b, ref=None):
    s = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)
    if ref is not None:
        s = np.maximum(s, np.abs(ref))
    out = np.abs(a - b) / s
    out[(a == 0) & (b == 0)] = 0.0
    return out


def coefficient_relations(pair: ReflectionPair, delta: float, tol: float = 1e-9) -> ModeRelations:
    """Extract ``c, d`` (from ``u1`` just inside ``r3``) and ``e`` (from ``u2``) and check
    the matching and closed-form relations mode by mode.

    Needs ``u1`` harmonic on ``(3 r2, r3)``: the layers there must share one
    identity-object material and one coefficient pair.
    """
    u1, u2, r2, r3 = pair.u1, pair.u2, pair.r2, pair.r3
    d = u1.d
    lo = 3 * r2
    idx = [i for i, L in enumerate(u1.layers) if L.r_out > lo]
    ref = u1.layers[idx[-1]]
    s0 = complex(ref.sigma)
    for i in idx:
        L = u1.layers[i]
        if L.power != 0.0 or abs(complex(L.sigma) - s0) > tol * abs(s0) or abs(abs(s0) - abs(1 - 1j * delta)) > tol:
            raise PreconditionError("u1 is not harmonic on (3 r2, r3): the object is not the identity there")
        if np.max(np.abs(u1.coeffs[:, i] - u1.coeffs[:, idx[-1]])) > tol * max(np.max(np.abs(u1.coeffs[:, idx[-1]])), 1e-300):
            raise PreconditionError("u1 changes representation inside (3 r2, r3)")
    c = u1.coeffs[:, idx[-1], 0]
    dd = u1.coeffs[:, idx[-1], 1]
    ie = u2.layer_index(0.5 * r3)
    if len(u2.layers) != 1 and any(L.r_out < r3 for L in u2.layers):
        raise PreconditionError("u2 must be a single homogeneous layer in B_{r3}")
    e = u2.coeffs[:, int(ie), 0]
    ns = u1.modes[:, 0]
    ex = _decay_power(d, ns)
    # value match at r3, scaled by r3^n
    lhs = c + dd * r3 ** (-ex)
    matching = _rel(lhs, e)
    pc = predicted_c(d, ns, e, delta, r3)
    pd = predicted_d(d, ns, e, delta, r3)
    # the decaying coefficient is compared on the scale of e, i.e. after the r3 factor
    scale = r3 ** (-ex)
    return ModeRelations(d, u1.modes, c, dd, e, delta, r3, matching, _rel(c, pc, e),
                         _rel(dd * scale, pd * scale, e))


def removed_singularity(d: int, modes, e, delta: float, r3: float, r_min: float, r_max: float) -> ModeExpansion:
    """``û = sum d_n r^(-n) Y`` (``r^(-n-1)`` in 3D) on ``r_min <= r <= r_max`` with
    ``d_n`` the closed-form decaying coefficient built from ``e_n``."""
    modes = np.asarray(modes, dtype=int).reshape(-1, 2)
    dn = predicted_d(d, modes[:, 0], e, delta, r3)
    coeffs = np.zeros((len(modes), 1, 2), dtype=complex)
    coeffs[:, 0, 1] = dn
    coeffs[modes[:, 0] == 0, 0, 1] = 0.0
    return ModeExpansion(d, (Layer(r_min, r_max, 1.0),), modes, coeffs)


def closed_form_difference(d: int, modes, e, delta: float, r3: float, lo: float, hi: float) -> ModeExpansion:
    """``u1 - u2 = sum (i delta kappa/(1 - i delta)) e_n (r^n - r3^(2n+d-2) r^(-n-d+2)) Y``."""
    modes = np.asarray(modes, dtype=int).reshape(-1, 2)
    ns = modes[:, 0]
    amp = 1j * delta * mode_factor(d, ns) / (1 - 1j * delta) * np.asarray(e)
    coeffs = np.zeros((len(modes), 1, 2), dtype=complex)
    coeffs[:, 0, 0] = amp
    coeffs[:, 0, 1] = -amp * r3 ** _decay_power(d, ns)
    coeffs[ns == 0, 0, 1] = 0.0
    return ModeExpansion(d, (Layer(lo, hi, 1.0),), modes, coeffs)


# ---------------------------------------------------------------------------
# W


@dataclass
class InterfaceJump:
    radius: float
    value: np.ndarray   # per mode
    deriv: np.ndarray
    value_norm: float   # H^{1/2}
    deriv_norm: float   # H^{-1/2}


@dataclass
class WPatch:
    """``W = u_delta`` outside ``r3``, ``u_delta - û`` on ``(3 r2, r3)``, ``u2`` inside ``3 r2``."""

    outer: ModeExpansion
    middle: ModeExpansion
    inner: ModeExpansion
    jump_r3: InterfaceJump
    jump_3r2: InterfaceJump

    def evaluate(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        r = np.linalg.norm(pts, axis=-1)
        out = np.zeros(r.shape, dtype=complex)
        r3 = self.jump_r3.radius
        r_mid = self.jump_3r2.radius
        for piece, mask in ((self.outer, r > r3), (self.middle, (r >= r_mid) & (r <= r3)), (self.inner, r < r_mid)):
            if np.any(mask):
                out[mask] = piece.evaluate(pts[mask])
        return out


def _jump(outer: ModeExpansion, inner: ModeExpansion, R: float) -> InterfaceJump:
    vo, do = outer.trace(R, "+")
    vi, di = inner.trace(R, "-")
    io = outer.mode_index()
    rows = [io[(int(n), int(k))] for n, k in inner.modes]
    # inner mode set is a subset of the outer one in every use here
    jv = vo.copy()
    jd = do.copy()
    jv[rows] -= vi
    jd[rows] -= di
    ns = outer.modes[:, 0]
    return InterfaceJump(R, jv, jd, trace_norm_from_coeffs(ns, jv, 0.5), trace_norm_from_coeffs(ns, jd, -0.5))


def assemble_W(u_delta: ModeExpansion, u_hat: ModeExpansion, u2: ModeExpansion, r2: float, r3: float) -> WPatch:
    r_mid = 3 * r2
    R = u_delta.domain[1]
    outer = u_delta.restrict(r3, R)
    middle = combine(1.0, u_delta, -1.0, u_hat, r_mid, r3)
    inner = u2.restrict(0.0, r_mid)
    return WPatch(outer, middle, inner, _jump(outer, middle, r3), _jump(middle, inner, r_mid))


# ---------------------------------------------------------------------------
# auxiliary decomposition


@dataclass
class ProofDecomposition:
    U: ModeExpansion
    w: ModeExpansion
    V: ModeExpansion
    u_hat: Optional[ModeExpansion]
    W: Optional[WPatch]
    delta: float
    checks: dict = field(default_factory=dict)


def _flux_jump_data(u_delta: ModeExpansion, r2: float, delta: float) -> np.ndarray:
    return -1j * delta / (1 - 1j * delta) * u_delta.flux_trace(r2, "+")


def auxiliary_decomposition(u_delta: ModeExpansion, medium: Medium, steps: int = 32,
                            pair: Optional[ReflectionPair] = None) -> ProofDecomposition:
    """``U = u_delta - u1`` on ``(r2, r3)`` (0 inside), ``w`` solving the extension
    problem with the flux jump of ``U`` at ``r2`` and ``w = 0`` at ``r3``, ``V = U - w``."""
    from .reflection import reflect_pair

    spec = medium.spec
    r2, r3, delta = spec.r2, spec.r3, spec.delta
    pair = pair or reflect_pair(u_delta, r2, r3)
    ext = medium.extension_layers(steps)
    modes = u_delta.modes
    outer = combine(1.0, u_delta, -1.0, pair.u1, r2, r3)
    inner_layers = tuple(L for L in ext.layers if L.r_out <= r2)
    U = ModeExpansion(u_delta.d, inner_layers + outer.layers, modes,
                      np.concatenate([np.zeros((len(modes), len(inner_layers), 2), complex), outer.coeffs], axis=1),
                      n_max=u_delta.n_max)

    g = _flux_jump_data(u_delta, r2, delta)
    src = ModalSource(r2, {(int(n), int(k)): complex(x) for (n, k), x in zip(modes, g)})
    w = solve_field(ext, src, modes=[tuple(m) for m in modes])
    V = combine(1.0, U, -1.0, w, 0.0, r3)

    vU = U.radial(r2, "+")[:, 0] - U.radial(r2, "-")[:, 0]
    fU = U.flux_trace(r2, "+") - U.flux_trace(r2, "-")
    b_flux = u_delta.flux_trace(r2, "+")
    V_res = transmission_residuals(V)
    checks = {
        "U_value_jump": float(np.max(np.abs(vU), initial=0.0) / max(np.max(np.abs(u_delta.radial(r2)[:, 0]), initial=0.0), 1e-300)),
        "U_flux_jump_error": float(np.max(np.abs(fU - g), initial=0.0) / max(np.max(np.abs(g), initial=0.0), 1e-300)),
        "V_transmission_residual": float(V_res.max(initial=0.0)),
        "w_h1": norm_annulus_h1(w, 0.0, r3),
        "flux_h_minus_half": trace_norm_from_coeffs(modes[:, 0], b_flux, -0.5),
        "V_l2_inner": norm_l2(V, 0.0, r2),
        "w_l2_inner": norm_l2(w, 0.0, r2),
    }
    denom = delta * checks["flux_h_minus_half"]
    checks["w_constant"] = checks["w_h1"] / denom if denom > 0 else float("nan")
    return ProofDecomposition(U, w, V, None, None, delta, checks)
