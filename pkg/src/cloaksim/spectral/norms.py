"""Exact norms of :class:`ModeExpansion` fields (closed-form radial integrals)."""

from __future__ import annotations

import numpy as np

from ..transforms import DomainError
from .basis import angular_eigenvalue, conj_product, derivative, integrate_terms, radial_terms
from .expansion import ModeExpansion
from .harmonics import angular_norm2


def _pieces(e: ModeExpansion, lo: float, hi: float):
    elo, ehi = e.domain
    if lo < elo or hi > ehi or not lo <= hi:
        raise DomainError(f"interval ({lo}, {hi}) outside expansion domain {e.domain}")
    for li, L in enumerate(e.layers):
        a, b = max(lo, L.r_in), min(hi, L.r_out)
        if a < b:
            yield li, L, a, b


def _mode_terms(e, i, li, L):
    n = int(e.modes[i, 0])
    p, q = e.coeffs[i, li]
    return n, radial_terms(e.d, n, L.power, p, q)


def _integral(e: ModeExpansion, lo: float, hi: float, value_w: float, grad_w: float,
              per_mode: bool = False):
    """``sum_modes |Y|^2 ∫ (value_w |R|^2 + grad_w (|R'|^2 + λ|R|^2/r^2)) r^(d-1) dr``."""
    ang = angular_norm2(e.d)
    out = np.zeros(len(e.modes))
    for li, L, a, b in _pieces(e, lo, hi):
        for i in range(len(e.modes)):
            n, f = _mode_terms(e, i, li, L)
            if not any(c != 0 for c, _, _ in f):
                continue
            tot = 0.0
            if value_w:
                tot += value_w * integrate_terms(conj_product(f, f, e.d - 1), a, b).real
            if grad_w:
                df = derivative(f)
                lam = angular_eigenvalue(e.d, n)
                g = conj_product(df, df, e.d - 1)
                if lam:
                    g = g + [(lam * c, s, j) for c, s, j in conj_product(f, f, e.d - 3)]
                tot += grad_w * integrate_terms(_merge(g), a, b).real
            out[i] += ang * tot
    return out if per_mode else float(out.sum())


def _merge(terms):
    acc = {}
    for c, s, j in terms:
        acc[(s, j)] = acc.get((s, j), 0.0) + c
    return [(c, s, j) for (s, j), c in acc.items()]


def norm_l2(e: ModeExpansion, lo: float, hi: float) -> float:
    return float(np.sqrt(max(_integral(e, lo, hi, 1.0, 0.0), 0.0)))


def norm_ball_l2(e: ModeExpansion, R: float) -> float:
    """``||v||_{L2(B_R)}``; the expansion must start at the origin."""
    if e.domain[0] != 0.0:
        raise DomainError("ball norm needs an expansion defined down to r = 0")
    return norm_l2(e, 0.0, R)


def norm_grad_l2(e: ModeExpansion, lo: float, hi: float) -> float:
    return float(np.sqrt(max(_integral(e, lo, hi, 0.0, 1.0), 0.0)))


def norm_annulus_h1(e: ModeExpansion, R_a: float, R_b: float) -> float:
    return float(np.sqrt(max(_integral(e, R_a, R_b, 1.0, 1.0), 0.0)))


def per_mode_l2(e: ModeExpansion, lo: float, hi: float) -> np.ndarray:
    return _integral(e, lo, hi, 1.0, 0.0, per_mode=True)


def layer_energies(e: ModeExpansion, lo: float, hi: float) -> list[tuple]:
    """``[(layer, ∫_layer r**power |grad u|^2)]`` over the layers meeting ``(lo, hi)``."""
    ang = angular_norm2(e.d)
    out = []
    for li, L, a, b in _pieces(e, lo, hi):
        part = 0.0
        for i in range(len(e.modes)):
            n, f = _mode_terms(e, i, li, L)
            if not any(c != 0 for c, _, _ in f):
                continue
            df = derivative(f)
            lam = angular_eigenvalue(e.d, n)
            g = conj_product(df, df, e.d - 1 + L.power)
            if lam:
                g = g + [(lam * c, s, j) for c, s, j in conj_product(f, f, e.d - 3 + L.power)]
            part += ang * integrate_terms(_merge(g), a, b).real
        out.append((L, part))
    return out


def weighted_energy(e: ModeExpansion, lo: float, hi: float, weights) -> float:
    """``∫ w |grad u|^2`` where ``weights(layer)`` gives the layer amplitude of ``w / r**power``."""
    return float(sum(weights(L) * part for L, part in layer_energies(e, lo, hi)))


def sigma_energy(e: ModeExpansion, lo: float, hi: float) -> complex:
    """``∫ sigma grad u · conj(grad u)`` using the layers' own coefficients."""
    return complex(sum(L.sigma * part for L, part in layer_energies(e, lo, hi)))


def trace_coefficients(e: ModeExpansion, R: float, side: str = "-"):
    return e.trace(R, side)


def norm_trace(e: ModeExpansion, R: float, order: float = 0.5, side: str = "-") -> float:
    """Modal trace norm on ``|x| = R``.

    ``order=+1/2``: ``(sum (1+n) |v_n(R)|^2)^{1/2}`` of the value trace;
    ``order=-1/2``: ``(sum |w_n(R)|^2 / (1+n))^{1/2}`` of the radial-derivative trace.
    """
    v, w = e.trace(R, side)
    return trace_norm_from_coeffs(e.modes[:, 0], v if order > 0 else w, order)


def trace_norm_from_coeffs(ns, c, order: float) -> float:
    wts = (1.0 + np.asarray(ns, dtype=float)) ** (2 * order)
    return float(np.sqrt(np.sum(wts * np.abs(c) ** 2)))
