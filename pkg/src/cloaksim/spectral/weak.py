"""Weak-form and energy-identity residuals of a modal solution.

Everything is evaluated in closed form with the term algebra of :mod:`basis`;
test functions are ``phi_j(r) Y_mode`` with ``phi_j = (r/R)**(n+j) (1 - r/R)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .basis import angular_eigenvalue, conj_product, derivative, evaluate_terms, integrate_terms, radial_terms
from .expansion import ModeExpansion
from .harmonics import angular_norm2
from .norms import layer_energies
from .solver import ModalSource, RadialLayeredMedium


def _medium_layer(medium: RadialLayeredMedium, r_mid: float):
    for L in medium.layers:
        if L.r_in <= r_mid <= L.r_out:
            return L
    raise ValueError(f"radius {r_mid} outside the medium")


def _test_terms(n: int, j: int, R: float):
    # real test function: conj() leaves it unchanged
    s = n + j
    return [(R ** (-s), float(s), 0), (-(R ** (-s - 1)), float(s + 1), 0)]


def _source_pairing(sources: Sequence[ModalSource], mode, phi, d: int) -> complex:
    """``sum_rings g * conj(phi(rho)) * rho**(d-1)`` (without the angular factor)."""
    tot = 0.0 + 0.0j
    for s in sources:
        g = s.strengths.get(mode, 0.0)
        if g:
            tot += g * np.conj(evaluate_terms(phi, s.radius)) * s.radius ** (d - 1)
    return tot


@dataclass
class WeakResidual:
    modes: np.ndarray
    residuals: np.ndarray  # (M, n_test) relative residuals
    energy_residual: float

    @property
    def max(self) -> float:
        return float(self.residuals.max(initial=0.0))


def weak_residual(medium: RadialLayeredMedium, e: ModeExpansion, sources: Sequence[ModalSource] = (),
                  test_modes: Optional[Iterable[tuple[int, int]]] = None, n_test: int = 4) -> WeakResidual:
    """Relative residual of ``∫ sigma grad u . grad conj(v) + ∫ f conj(v) = 0`` per test mode.

    ``sigma`` is taken from ``medium`` (not from the expansion's layers), so a
    perturbed medium shows up as a residual of the perturbation's size.
    """
    sources = [sources] if isinstance(sources, ModalSource) else list(sources)
    R = medium.outer_radius
    idx = e.mode_index()
    modes = sorted(idx) if test_modes is None else [tuple(map(int, m)) for m in test_modes]
    res = np.zeros((len(modes), n_test))
    for mi, mode in enumerate(modes):
        n = mode[0]
        lam = angular_eigenvalue(e.d, n)
        row = idx.get(mode)
        for j in range(n_test):
            phi = _test_terms(n, j, R)
            dphi = derivative(phi)
            bulk = 0.0 + 0.0j
            scale = 0.0
            if row is not None:
                for li, L in enumerate(e.layers):
                    M = _medium_layer(medium, 0.5 * (L.r_in + L.r_out))
                    p, q = e.coeffs[row, li]
                    f = radial_terms(e.d, n, L.power, p, q)
                    df = derivative(f)
                    # conj(phi') * u' * sigma r**(power + d - 1)
                    t1 = integrate_terms(conj_product(dphi, df, e.d - 1 + M.power), L.r_in, L.r_out)
                    t2 = integrate_terms(conj_product(phi, f, e.d - 3 + M.power), L.r_in, L.r_out) if lam else 0.0
                    part = M.sigma * (t1 + lam * t2)
                    bulk += part
                    scale += abs(M.sigma) * (abs(t1) + lam * abs(t2))
            src = _source_pairing(sources, mode, phi, e.d)
            scale += abs(src)
            res[mi, j] = abs(bulk + src) / scale if scale > 0 else 0.0
    ei = energy_identity(e, sources)
    return WeakResidual(np.array(modes, dtype=int).reshape(-1, 2), res, ei.residual)


@dataclass
class EnergyIdentity:
    dissipation: float      # delta-weighted shell energy = Im ∫ sigma |grad u|^2
    source_pairing: complex  # ∫ f conj(u)
    residual: float          # |Im∫sigma|∇u|^2 + Im∫f ū| / |∫ f ū|


def source_pairing(e: ModeExpansion, sources: Sequence[ModalSource]) -> complex:
    """``∫ f conj(u)`` for ring sources."""
    sources = [sources] if isinstance(sources, ModalSource) else list(sources)
    ang = angular_norm2(e.d)
    tot = 0.0 + 0.0j
    for s in sources:
        vals = e.radial(s.radius)[:, 0]
        for i, (n, k) in enumerate(e.modes):
            g = s.strengths.get((int(n), int(k)), 0.0)
            if g:
                tot += ang * g * np.conj(vals[i]) * s.radius ** (e.d - 1)
    return complex(tot)


def energy_identity(e: ModeExpansion, sources: Sequence[ModalSource]) -> EnergyIdentity:
    """Imaginary part of ``∫ sigma |grad u|^2 = -∫ f conj(u)``.

    ``Im sigma`` vanishes outside the lossy shell, so the left side is the
    loss times the shell energy.
    """
    lo, hi = e.domain
    diss = sum(complex(L.sigma).imag * part for L, part in layer_energies(e, lo, hi))
    fu = source_pairing(e, sources)
    scale = max(abs(fu), abs(diss), 1e-300)
    return EnergyIdentity(float(diss), fu, float(abs(diss + fu.imag) / scale))
