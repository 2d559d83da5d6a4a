"""Piecewise modal representation of a field on concentric layers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ..transforms import DomainError
from .basis import Layer, exponents
from .harmonics import angular_values, real_sph_harm_grad, to_spherical


@dataclass(frozen=True, eq=False)
class ModeExpansion:
    """Field ``sum_modes R_{mode}(r) Y_{mode}(angle)`` with ``R`` given per layer by a
    coefficient pair ``(p, q)`` on the two radial solutions of that layer.

    ``coeffs`` has shape ``(M, L, 2)`` for ``M`` modes (rows of ``modes``, each
    ``(n, k)``) and ``L`` layers. In a power-0 layer the pair multiplies
    ``r**n, r**-n`` (2D, ``1, ln r`` for ``n = 0``) or ``r**n, r**(-n-1)`` (3D).
    """

    d: int
    layers: tuple[Layer, ...]
    modes: np.ndarray
    coeffs: np.ndarray
    n_max: int = 0
    condition: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=int).reshape(-1, 2)
        coeffs = np.asarray(self.coeffs, dtype=complex).reshape(len(modes), len(self.layers), 2)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.n_max == 0 and len(modes):
            object.__setattr__(self, "n_max", int(modes[:, 0].max()))
        for a, b in zip(self.layers[:-1], self.layers[1:]):
            if a.r_out != b.r_in:
                raise ValueError("layers must be contiguous")

    # ------------------------------------------------------------------ geometry
    @property
    def domain(self) -> tuple[float, float]:
        return self.layers[0].r_in, self.layers[-1].r_out

    @property
    def edges(self) -> np.ndarray:
        return np.array([self.layers[0].r_in] + [L.r_out for L in self.layers])

    def layer_index(self, r, side: str = "-") -> np.ndarray:
        """Index of the layer holding radius ``r``; at an interface ``side`` picks
        the inner (``'-'``) or outer (``'+'``) layer."""
        r = np.asarray(r, dtype=float)
        lo, hi = self.domain
        outs = np.array([L.r_out for L in self.layers])
        if side == "-":
            idx = np.searchsorted(outs, r, side="left")
            bad = (r < lo) | (r > hi) | ((r == lo) & (lo > 0))
        elif side == "+":
            idx = np.searchsorted(outs, r, side="right")
            bad = (r < lo) | (r >= hi)
        else:
            raise ValueError("side must be '-' or '+'")
        if np.any(bad):
            raise DomainError(f"radius outside the expansion domain {self.domain}")
        return np.minimum(idx, len(self.layers) - 1)

    def mode_index(self) -> dict[tuple[int, int], int]:
        return {(int(n), int(k)): i for i, (n, k) in enumerate(self.modes)}

    def coefficients(self, n: int, k: int) -> np.ndarray:
        return self.coeffs[self.mode_index()[(n, k)]]

    # ---------------------------------------------------------------- radial parts
    def _layer_radial(self, li: int, r: np.ndarray, deriv: bool) -> np.ndarray:
        layer = self.layers[li]
        ns = self.modes[:, 0]
        out = np.zeros((len(ns), r.size), dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.log(r)
        for n in np.unique(ns):
            rows = np.nonzero(ns == n)[0]
            a_hi, a_lo, is_log = exponents(self.d, int(n), layer.power)
            p = self.coeffs[rows, li, 0][:, None]
            q = self.coeffs[rows, li, 1][:, None]
            if is_log:
                basis = [(a_hi, 0), (a_hi, 1)]
            else:
                basis = [(a_hi, 0), (a_lo, 0)]
            val = np.zeros((len(rows), r.size), dtype=complex)
            for c, (e, j) in zip((p, q), basis):
                if not np.any(c):
                    continue
                if deriv:
                    # d/dr r^e ln^j r = r^(e-1) (e ln^j r + j ln^(j-1) r)
                    with np.errstate(divide="ignore", invalid="ignore"):
                        f = r ** (e - 1.0) * (e * lr**j + (j * lr ** (j - 1) if j else 0.0))
                else:
                    with np.errstate(divide="ignore", invalid="ignore"):
                        f = r**e * lr**j if j else r**e
                if not np.all(np.isfinite(f)):
                    if np.any((c != 0) & ~np.isfinite(f)[None, :]):
                        raise DomainError("expansion is singular at the requested radius")
                    f = np.where(np.isfinite(f), f, 0.0)
                val += c * f[None, :]
            out[rows] = val
        return out

    def _radial(self, r, side: str, deriv: bool) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        idx = self.layer_index(r, side)
        out = np.zeros((len(self.modes), r.size), dtype=complex)
        for li in np.unique(idx):
            mask = idx == li
            out[:, mask] = self._layer_radial(int(li), r[mask], deriv)
        return out

    def radial(self, r, side: str = "-") -> np.ndarray:
        """Radial factors of every mode, shape ``(M, P)``."""
        return self._radial(r, side, False)

    def radial_derivative(self, r, side: str = "-") -> np.ndarray:
        return self._radial(r, side, True)

    def sigma_at(self, r, side: str = "-") -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        idx = self.layer_index(r, side)
        return np.array([self.layers[i].coefficient(x) for i, x in zip(idx, r)])

    def trace(self, R: float, side: str = "-") -> tuple[np.ndarray, np.ndarray]:
        """Per-mode value and radial derivative at radius ``R`` from one side."""
        return self.radial(R, side)[:, 0], self.radial_derivative(R, side)[:, 0]

    def flux_trace(self, R: float, side: str = "-") -> np.ndarray:
        """Per-mode conormal flux ``sigma * d/dr`` at ``R``."""
        return self.sigma_at(R, side)[0] * self.radial_derivative(R, side)[:, 0]

    # -------------------------------------------------------------- point values
    def evaluate(self, points, gradient: bool = False):
        """Field values at Cartesian ``points`` (``(..., d)``); optionally the gradient."""
        pts = np.asarray(points, dtype=float)
        shape = pts.shape[:-1]
        flat = pts.reshape(-1, self.d)
        sph = to_spherical(flat)
        r, angles = sph[0], sph[1:]
        Y = angular_values(self.d, self.modes, angles)
        R = self.radial(r)
        val = np.sum(R * Y, axis=0).reshape(shape)
        if not gradient:
            return val
        dR = self.radial_derivative(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_r = np.where(r > 0, 1.0 / r, 0.0)
        if self.d == 2:
            theta = angles[0]
            g_r = np.sum(dR * Y, axis=0)
            g_t = np.sum(1j * self.modes[:, 1][:, None] * R * Y, axis=0) * inv_r
            c, s = np.cos(theta), np.sin(theta)
            grad = np.stack([g_r * c - g_t * s, g_r * s + g_t * c], axis=-1)
        else:
            polar, azim = angles
            g_r = np.sum(dR * Y, axis=0)
            g_p = np.zeros(r.size, dtype=complex)
            g_a = np.zeros(r.size, dtype=complex)
            for i, (n, k) in enumerate(self.modes):
                if n == 0:
                    continue
                yp, ya = real_sph_harm_grad(int(n), int(k), polar, azim)
                g_p += R[i] * yp
                g_a += R[i] * ya
            g_p *= inv_r
            g_a *= inv_r
            st, ct, sp, cp = np.sin(polar), np.cos(polar), np.sin(azim), np.cos(azim)
            e_r = np.stack([st * cp, st * sp, ct], -1)
            e_p = np.stack([ct * cp, ct * sp, -st], -1)
            e_a = np.stack([-sp, cp, np.zeros_like(sp)], -1)
            grad = g_r[:, None] * e_r + g_p[:, None] * e_p + g_a[:, None] * e_a
        return val, grad.reshape(shape + (self.d,))

    # ---------------------------------------------------------------- algebra
    def restrict(self, lo: float, hi: float) -> "ModeExpansion":
        return _combine([(1.0, self)], lo, hi)

    def refine(self, radii: Iterable[float]) -> "ModeExpansion":
        lo, hi = self.domain
        return _combine([(1.0, self)], lo, hi, extra=radii)

    def select(self, modes) -> "ModeExpansion":
        """Keep only the listed ``(n, k)`` modes (missing ones are zero)."""
        modes = np.asarray(modes, dtype=int).reshape(-1, 2)
        idx = self.mode_index()
        coeffs = np.zeros((len(modes), len(self.layers), 2), dtype=complex)
        for i, (n, k) in enumerate(modes):
            j = idx.get((int(n), int(k)))
            if j is not None:
                coeffs[i] = self.coeffs[j]
        return self._replace(modes=modes, coeffs=coeffs)

    def with_coeffs(self, coeffs) -> "ModeExpansion":
        return self._replace(coeffs=coeffs)

    def _replace(self, **kw) -> "ModeExpansion":
        args = dict(d=self.d, layers=self.layers, modes=self.modes, coeffs=self.coeffs,
                    n_max=self.n_max, condition=self.condition, meta=dict(self.meta))
        args.update(kw)
        return ModeExpansion(**args)

    def __add__(self, other):
        return combine(1.0, self, 1.0, other)

    def __sub__(self, other):
        return combine(1.0, self, -1.0, other)

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)

    def __mul__(self, scalar):
        return self.with_coeffs(self.coeffs * complex(scalar))

    __rmul__ = __mul__

    # ---------------------------------------------------------------- serialization
    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "N_max": int(self.n_max),
            "layers": [
                {"r_in": L.r_in, "r_out": L.r_out, "sigma": [complex(L.sigma).real, complex(L.sigma).imag],
                 "power": L.power}
                for L in self.layers
            ],
            "modes": [
                {"n": int(n), "k": int(k),
                 "layer_coeffs": [[c[0].real, c[0].imag, c[1].real, c[1].imag] for c in self.coeffs[i]]}
                for i, (n, k) in enumerate(self.modes)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModeExpansion":
        layers = tuple(
            Layer(float(L["r_in"]), float(L["r_out"]), complex(*L["sigma"]), float(L.get("power", 0.0)))
            for L in data["layers"]
        )
        modes = np.array([[m["n"], m["k"]] for m in data["modes"]], dtype=int).reshape(-1, 2)
        coeffs = np.array(
            [[[c[0] + 1j * c[1], c[2] + 1j * c[3]] for c in m["layer_coeffs"]] for m in data["modes"]],
            dtype=complex,
        ).reshape(len(modes), len(layers), 2)
        return cls(int(data["d"]), layers, modes, coeffs, n_max=int(data.get("N_max", 0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ModeExpansion":
        return cls.from_dict(json.loads(text))


def _merged_modes(exps: Sequence[ModeExpansion]) -> np.ndarray:
    keys = sorted({(int(n), int(k)) for e in exps for n, k in e.modes})
    return np.array(keys, dtype=int).reshape(-1, 2)


def _combine(terms, lo: float, hi: float, extra: Iterable[float] = ()) -> ModeExpansion:
    first = terms[0][1]
    d = first.d
    for _, e in terms:
        if e.d != d:
            raise ValueError("cannot combine expansions of different dimension")
        elo, ehi = e.domain
        if lo < elo or hi > ehi:
            raise DomainError(f"interval ({lo}, {hi}) not inside expansion domain {e.domain}")
    if not lo < hi:
        raise ValueError("empty interval")
    cuts = {lo, hi}
    for _, e in terms:
        cuts.update(x for x in e.edges if lo < x < hi)
    cuts.update(float(x) for x in extra if lo < x < hi)
    cuts = sorted(cuts)
    modes = _merged_modes([e for _, e in terms])
    mode_pos = {(int(n), int(k)): i for i, (n, k) in enumerate(modes)}
    layers = []
    coeffs = np.zeros((len(modes), len(cuts) - 1, 2), dtype=complex)
    for j, (a, b) in enumerate(zip(cuts[:-1], cuts[1:])):
        mid = 0.5 * (a + b) if np.isfinite(b) else a + 1.0
        base = None
        for w, e in terms:
            li = int(e.layer_index(mid))
            L = e.layers[li]
            if base is None:
                base = L
            elif L.power != base.power:
                raise ValueError(
                    f"layers on ({a}, {b}) have different radial bases (power {L.power} vs {base.power})"
                )
            rows = [mode_pos[(int(n), int(k))] for n, k in e.modes]
            coeffs[rows, j, :] += w * e.coeffs[:, li, :]
        layers.append(Layer(a, b, base.sigma, base.power))
    return ModeExpansion(d, tuple(layers), modes, coeffs, n_max=max(e.n_max for _, e in terms),
                         condition=max((e.condition for _, e in terms), default=float("nan")))


def combine(alpha, a: ModeExpansion, beta, b: ModeExpansion,
            lo: Optional[float] = None, hi: Optional[float] = None) -> ModeExpansion:
    """``alpha*a + beta*b`` on the common domain (layer coefficients of ``a`` are kept)."""
    if lo is None:
        lo = max(a.domain[0], b.domain[0])
    if hi is None:
        hi = min(a.domain[1], b.domain[1])
    return _combine([(alpha, a), (beta, b)], lo, hi)
