"""Exact per-mode solver for ``div(sigma(|x|) grad u) = f`` in a ball with u = 0 on the boundary.

Each angular mode reduces to a radial ODE whose solutions in a layer are two
powers of ``r``. Unknowns are the two amplitudes per layer, written against
basis functions normalized to 1 at the layer edge where they are largest, so
the assembled (2L x 2L) system stays well scaled for large mode numbers.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .basis import Layer, exponents
from .expansion import ModeExpansion
from .harmonics import mode_list, point_source_weights

log = logging.getLogger(__name__)

# condition number above which a solve carries a warning
COND_WARN = 1e12


class ConditioningWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class RadialLayeredMedium:
    """Layers tiling ``(0, outer_radius]`` in order."""

    d: int
    layers: tuple[Layer, ...]

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError("d must be 2 or 3")
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers or layers[0].r_in != 0.0:
            raise ValueError("innermost layer must start at r = 0")
        for a, b in zip(layers[:-1], layers[1:]):
            if a.r_out != b.r_in:
                raise ValueError(f"layers leave a gap or overlap at {a.r_out} / {b.r_in}")

    @property
    def outer_radius(self) -> float:
        return self.layers[-1].r_out

    @classmethod
    def homogeneous(cls, d: int, outer_radius: float, sigma: complex = 1.0) -> "RadialLayeredMedium":
        return cls(d, (Layer(0.0, outer_radius, sigma),))

    @classmethod
    def from_breaks(cls, d: int, radii: Sequence[float], sigmas: Sequence[complex],
                    powers: Optional[Sequence[float]] = None) -> "RadialLayeredMedium":
        """``radii`` are the outer radii of consecutive layers starting from 0."""
        powers = powers or [0.0] * len(sigmas)
        edges = [0.0] + list(radii)
        return cls(d, tuple(Layer(a, b, s, p) for a, b, s, p in zip(edges[:-1], edges[1:], sigmas, powers)))

    def sigma_at(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        outs = np.array([L.r_out for L in self.layers])
        idx = np.minimum(np.searchsorted(outs, r, side="right"), len(self.layers) - 1)
        sig = np.array([L.sigma for L in self.layers])[idx]
        pw = np.array([L.power for L in self.layers])[idx]
        return sig * r**pw


@dataclass(frozen=True)
class ModalSource:
    """Distributional ring source on ``|x| = radius``.

    ``strengths[(n, k)]`` is the jump of ``sigma d/dr u`` carried by mode ``(n, k)``;
    ``value_jumps[(n, k)]`` an optional jump of ``u`` itself.
    """

    radius: float
    strengths: Mapping[tuple[int, int], complex]
    value_jumps: Mapping[tuple[int, int], complex] = field(default_factory=dict)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("ring radius must be positive")

    @property
    def modes(self) -> set[tuple[int, int]]:
        return set(self.strengths) | set(self.value_jumps)

    @classmethod
    def single_mode(cls, radius: float, n: int, k: int, strength: complex = 1.0) -> "ModalSource":
        return cls(radius, {(n, k): complex(strength)})

    @classmethod
    def point(cls, d: int, radius: float, direction=0.0, n_max: int = 64, charge: float = 1.0) -> "ModalSource":
        """Modes ``0..n_max`` of a point charge at ``radius`` in the given direction
        (an angle in 2D, ``(polar, azimuth)`` in 3D)."""
        modes = mode_list(d, n_max)
        w = charge * point_source_weights(d, modes, direction) / radius ** (d - 1)
        return cls(radius, {(int(n), int(k)): complex(c) for (n, k), c in zip(modes, w)})

    def scaled(self, factor: complex) -> "ModalSource":
        return ModalSource(self.radius, {m: factor * g for m, g in self.strengths.items()},
                           {m: factor * g for m, g in self.value_jumps.items()})

    def surface_norm(self, d: int) -> float:
        """``(∫_{|x|=radius} |g|^2 dS)^{1/2}`` of the flux density."""
        ang = 2.0 * np.pi if d == 2 else 1.0
        s = sum(abs(g) ** 2 for g in self.strengths.values())
        return float(np.sqrt(ang * s * self.radius ** (d - 1)))


def annulus_source(rho_a: float, rho_b: float, density: Mapping[tuple[int, int], complex],
                   nodes: int = 16) -> list[ModalSource]:
    """Constant-in-r modal density on ``rho_a < r < rho_b`` as Gauss–Legendre rings."""
    if not 0 < rho_a < rho_b:
        raise ValueError("need 0 < rho_a < rho_b")
    x, w = np.polynomial.legendre.leggauss(nodes)
    rad = 0.5 * (rho_b - rho_a) * x + 0.5 * (rho_b + rho_a)
    wt = 0.5 * (rho_b - rho_a) * w
    return [ModalSource(float(r), {m: complex(h) * wi for m, h in density.items()}) for r, wi in zip(rad, wt)]


# ---------------------------------------------------------------------------
# basis helpers


def _basis(d: int, n: int, layer: Layer):
    """Scaled basis ``phi_hi, phi_lo`` of a layer: returns (values(r), derivs(r)) callables
    and the raw-coefficient conversion factors."""
    a_hi, a_lo, is_log = exponents(d, n, layer.power)
    r_in, r_out = layer.r_in, layer.r_out
    ref_hi = r_out if np.isfinite(r_out) else max(r_in, 1.0)
    if is_log:
        ref_lo = ref_hi
    else:
        ref_lo = r_in if (a_lo < 0 and r_in > 0) else ref_hi
    return a_hi, a_lo, is_log, ref_hi, ref_lo


def _phi(d, n, layer, r):
    a_hi, a_lo, is_log, ref_hi, ref_lo = _basis(d, n, layer)
    t = r / ref_hi
    v_hi = t**a_hi
    dv_hi = a_hi * v_hi / r
    if is_log:
        lt = np.log(t)
        v_lo = v_hi * lt
        dv_lo = v_hi * (a_hi * lt + 1.0) / r
    else:
        v_lo = (r / ref_lo) ** a_lo
        dv_lo = a_lo * v_lo / r
    return np.array([v_hi, v_lo]), np.array([dv_hi, dv_lo])


def _to_raw(d, n, layer, alpha, beta):
    a_hi, a_lo, is_log, ref_hi, ref_lo = _basis(d, n, layer)
    if is_log:
        s = ref_hi ** (-a_hi)
        return s * (alpha - beta * np.log(ref_hi)), s * beta
    return alpha * ref_hi ** (-a_hi), beta * ref_lo ** (-a_lo)


def interface_matrix(sigma_in: complex, sigma_out: complex, rho: float, n: int, d: int) -> np.ndarray:
    """2x2 map from the inner raw pair ``(p, q)`` to the outer pair across ``|x| = rho``
    for constant coefficients, enforcing continuity of ``u`` and of ``sigma du/dr``."""
    if rho <= 0 or sigma_in == 0 or sigma_out == 0:
        raise ValueError("need rho > 0 and nonzero coefficients")
    a_hi, a_lo, is_log = exponents(d, n, 0.0)
    if is_log:
        B0 = np.array([1.0, np.log(rho)])
        B1 = np.array([0.0, 1.0 / rho])
    else:
        B0 = np.array([rho**a_hi, rho**a_lo])
        B1 = np.array([a_hi * rho ** (a_hi - 1), a_lo * rho ** (a_lo - 1)])
    M_in = np.array([B0, sigma_in * B1], dtype=complex)
    M_out = np.array([B0, sigma_out * B1], dtype=complex)
    return np.linalg.solve(M_out, M_in)


# ---------------------------------------------------------------------------
# assembly


def split_layers(layers: Sequence[Layer], radii: Iterable[float]) -> tuple[Layer, ...]:
    """Insert the given radii as (material-preserving) interfaces."""
    out = list(layers)
    for rho in sorted(set(float(x) for x in radii)):
        for i, L in enumerate(out):
            if L.r_in < rho < L.r_out:
                out[i:i + 1] = list(L.split(rho))
                break
            if rho in (L.r_in, L.r_out):
                break
        else:
            raise ValueError(f"radius {rho} outside the medium")
    return tuple(out)


def _assemble(d: int, n: int, layers: Sequence[Layer]) -> np.ndarray:
    L = len(layers)
    A = np.zeros((2 * L, 2 * L), dtype=complex)
    A[0, 1] = 1.0  # regularity: no singular branch in the innermost layer
    for i in range(L - 1):
        rho = layers[i].r_out
        v_in, d_in = _phi(d, n, layers[i], rho)
        v_out, d_out = _phi(d, n, layers[i + 1], rho)
        s_in = layers[i].coefficient(rho)
        s_out = layers[i + 1].coefficient(rho)
        scale = rho / max(abs(s_in), abs(s_out))
        A[1 + 2 * i, 2 * i:2 * i + 2] = -v_in
        A[1 + 2 * i, 2 * i + 2:2 * i + 4] = v_out
        A[2 + 2 * i, 2 * i:2 * i + 2] = -s_in * d_in * scale
        A[2 + 2 * i, 2 * i + 2:2 * i + 4] = s_out * d_out * scale
    v_b, _ = _phi(d, n, layers[-1], layers[-1].r_out)
    A[2 * L - 1, 2 * L - 2:] = v_b
    return A


def _flux_scale(layers, i):
    rho = layers[i].r_out
    return rho / max(abs(layers[i].coefficient(rho)), abs(layers[i + 1].coefficient(rho)))


@dataclass
class ModeSolution:
    coeffs: np.ndarray  # (L, 2) raw pairs
    condition: float
    warning: Optional[str] = None


def _solve_n(d, n, layers, rhs_cols):
    A = _assemble(d, n, layers)
    cond = float(np.linalg.cond(A))
    sol = np.linalg.solve(A, rhs_cols)
    raw = np.zeros((sol.shape[1], len(layers), 2), dtype=complex)
    for i, L in enumerate(layers):
        p, q = _to_raw(d, n, L, sol[2 * i], sol[2 * i + 1])
        raw[:, i, 0] = p
        raw[:, i, 1] = q
    raw[:, 0, 1] = 0.0  # exact regularity
    return raw, cond


def _rhs(layers, sources: Sequence[ModalSource], mode):
    L = len(layers)
    b = np.zeros(2 * L, dtype=complex)
    for s in sources:
        g = s.strengths.get(mode, 0.0)
        h = s.value_jumps.get(mode, 0.0)
        if g == 0 and h == 0:
            continue
        i = next(j for j, Lr in enumerate(layers[:-1]) if Lr.r_out == s.radius)
        b[1 + 2 * i] += h
        b[2 + 2 * i] += g * _flux_scale(layers, i)
    return b


def _prepare(medium: RadialLayeredMedium, sources: Sequence[ModalSource]):
    R = medium.outer_radius
    for s in sources:
        if not 0 < s.radius < R:
            raise ValueError(f"source radius {s.radius} must lie strictly inside (0, {R})")
    return split_layers(medium.layers, [s.radius for s in sources])


def _warn_cond(cond, n):
    if not np.isfinite(cond) or cond > COND_WARN:
        msg = f"mode n={n}: interface system condition number {cond:.3e}"
        warnings.warn(msg, ConditioningWarning, stacklevel=3)
        return msg
    return None


def solve_mode(medium: RadialLayeredMedium, sources, n: int, k: int) -> ModeSolution:
    """Layer coefficient pairs of mode ``(n, k)`` (layers split at the ring radii)."""
    sources = [sources] if isinstance(sources, ModalSource) else list(sources)
    layers = _prepare(medium, sources)
    raw, cond = _solve_n(medium.d, n, layers, _rhs(layers, sources, (n, k))[:, None])
    log.debug("solve_mode n=%d k=%d cond=%.3e", n, k, cond)
    return ModeSolution(raw[0], cond, _warn_cond(cond, n))


def solve_field(medium: RadialLayeredMedium, sources, n_max: Optional[int] = None,
                modes: Optional[Iterable[tuple[int, int]]] = None) -> ModeExpansion:
    """Superpose :func:`solve_mode` over every source mode with ``n <= n_max``."""
    sources = [sources] if isinstance(sources, ModalSource) else list(sources)
    layers = _prepare(medium, sources)
    if modes is None:
        modes = set().union(*(s.modes for s in sources)) if sources else set()
    modes = sorted((int(n), int(k)) for n, k in modes)
    src_max = max((n for n, _ in modes), default=0)
    if n_max is None:
        n_max = src_max
    modes = [m for m in modes if m[0] <= n_max]
    coeffs = np.zeros((len(modes), len(layers), 2), dtype=complex)
    worst = 0.0
    by_n: dict[int, list[int]] = {}
    for i, (n, _) in enumerate(modes):
        by_n.setdefault(n, []).append(i)
    for n, rows in sorted(by_n.items()):
        rhs = np.stack([_rhs(layers, sources, modes[i]) for i in rows], axis=1)
        raw, cond = _solve_n(medium.d, n, layers, rhs)
        _warn_cond(cond, n)
        worst = max(worst, cond)
        coeffs[rows] = raw
    log.info("solve_field d=%d modes=%d max interface condition %.3e", medium.d, len(modes), worst)
    return ModeExpansion(medium.d, layers, np.array(modes, dtype=int).reshape(-1, 2), coeffs,
                         n_max=int(n_max), condition=worst)


def _relative(diff, a, b) -> float:
    top = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0))
    worst = float(np.abs(diff).max(initial=0.0))
    return worst / top if top > 0 else worst


def transmission_residuals(e: ModeExpansion, jumps: Sequence[ModalSource] = ()) -> np.ndarray:
    """Relative mismatch of value and flux continuity (minus prescribed jumps) at every
    internal interface; shape ``(n_interfaces, 2)``. Residuals are relative to the
    largest modal trace at that interface."""
    out = []
    for i in range(len(e.layers) - 1):
        rho = e.layers[i].r_out
        v_in = e.radial(rho, "-")[:, 0]
        v_out = e.radial(rho, "+")[:, 0]
        f_in = e.flux_trace(rho, "-")
        f_out = e.flux_trace(rho, "+")
        g = np.zeros(len(e.modes), complex)
        h = np.zeros(len(e.modes), complex)
        for s in jumps:
            if s.radius == rho:
                for j, (n, k) in enumerate(e.modes):
                    g[j] += s.strengths.get((int(n), int(k)), 0.0)
                    h[j] += s.value_jumps.get((int(n), int(k)), 0.0)
        out.append([_relative(v_out - v_in - h, v_in, v_out), _relative(f_out - f_in - g, f_in, f_out)])
    return np.array(out).reshape(-1, 2)
