"""Finite-volume oracle for ``div(sigma grad u) = f`` on a disk with Dirichlet data.

Cell-centred polar grid. Radial faces carry a distance-weighted harmonic mean of
``sigma_rr``; angular faces a harmonic mean of ``sigma_tt``; off-diagonal terms use
arithmetic means and averaged tangential differences. Material interfaces and
ring sources must sit on radial faces.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .media import Medium
from .spectral.expansion import ModeExpansion
from .spectral.harmonics import angular_values
from .spectral.solver import ModalSource, RadialLayeredMedium
from .transforms import TensorField

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Factorization or accuracy failure; ``diagnostics`` holds what was measured."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class AssemblyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True, eq=False)
class PolarGrid:
    r_faces: np.ndarray  # (N_r + 1,), r_faces[0] = 0, r_faces[-1] = R
    n_theta: int

    def __post_init__(self):
        rf = np.asarray(self.r_faces, dtype=float)
        object.__setattr__(self, "r_faces", rf)
        if rf[0] != 0.0 or np.any(np.diff(rf) <= 0):
            raise ValueError("radial faces must start at 0 and increase strictly")
        if self.n_theta < 4 or self.n_theta % 2:
            raise ValueError("n_theta must be even and >= 4")

    @classmethod
    def build(cls, R: float, n_r: int, n_theta: int, interfaces: Iterable[float] = (),
              min_cells: int = 2) -> "PolarGrid":
        """Piecewise-uniform radial faces with every interface radius on a face.

        Each segment between breaks gets ``max(min_cells, round(n_r * length / R))``
        cells, so the total can differ slightly from ``n_r``.
        """
        breaks = sorted({0.0, float(R), *[float(x) for x in interfaces if 0 < x < R]})
        faces = [0.0]
        for a, b in zip(breaks[:-1], breaks[1:]):
            m = max(min_cells, int(round(n_r * (b - a) / R)))
            faces.extend(np.linspace(a, b, m + 1)[1:])
        faces[-1] = float(R)
        return cls(np.array(faces), int(n_theta))

    @property
    def R(self) -> float:
        return float(self.r_faces[-1])

    @property
    def n_r(self) -> int:
        return len(self.r_faces) - 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_r, self.n_theta

    @property
    def size(self) -> int:
        return self.n_r * self.n_theta

    @property
    def r(self) -> np.ndarray:
        return 0.5 * (self.r_faces[:-1] + self.r_faces[1:])

    @property
    def dr(self) -> np.ndarray:
        return np.diff(self.r_faces)

    @property
    def dtheta(self) -> float:
        return 2 * np.pi / self.n_theta

    @property
    def theta(self) -> np.ndarray:
        return (np.arange(self.n_theta) + 0.5) * self.dtheta

    @property
    def areas(self) -> np.ndarray:
        return np.outer(self.r * self.dr, np.full(self.n_theta, self.dtheta))

    def points(self) -> np.ndarray:
        rr, tt = np.meshgrid(self.r, self.theta, indexing="ij")
        return np.stack([rr * np.cos(tt), rr * np.sin(tt)], -1)

    def refine(self, factor: int = 2) -> "PolarGrid":
        """Split every cell into ``factor`` pieces in r and in theta (nested grids)."""
        faces = [0.0]
        for a, b in zip(self.r_faces[:-1], self.r_faces[1:]):
            faces.extend(np.linspace(a, b, factor + 1)[1:])
        return PolarGrid(np.array(faces), self.n_theta * factor)

    def face_index(self, radius: float, tol: float = 1e-12) -> int:
        i = int(np.argmin(np.abs(self.r_faces - radius)))
        if abs(self.r_faces[i] - radius) > tol * max(1.0, radius):
            raise AssemblyError(f"radius {radius} is not on a grid face")
        return i


def grid_for(coef, n_r: int, n_theta: int, extra: Iterable[float] = (), R: Optional[float] = None) -> PolarGrid:
    """Grid whose faces include the interfaces of a Medium / layered medium plus ``extra``."""
    if isinstance(coef, Medium):
        s = coef.spec
        radii = [s.r1, s.r2, 2 * s.r2, s.r3]
        if s.is_radial:
            radii += list(s.obj.edges)
        R = s.R_omega
    elif isinstance(coef, RadialLayeredMedium):
        radii = [L.r_out for L in coef.layers[:-1]]
        R = coef.outer_radius
    else:
        radii = []
        if R is None:
            raise ValueError("outer radius required for a bare coefficient field")
    return PolarGrid.build(R, n_r, n_theta, list(radii) + list(extra))


# ---------------------------------------------------------------------------
# coefficients


def _sample_tensor(coef, grid: PolarGrid) -> np.ndarray:
    pts = grid.points()
    if isinstance(coef, Medium):
        M = coef.sigma(pts)
    elif isinstance(coef, RadialLayeredMedium):
        s = coef.sigma_at(np.linalg.norm(pts, axis=-1))
        M = s[..., None, None] * np.eye(2)
    elif isinstance(coef, TensorField) or callable(coef):
        M = np.asarray(coef(pts))
        if M.shape == pts.shape[:-1]:
            M = M[..., None, None] * np.eye(2)
    else:
        raise AssemblyError(f"unsupported coefficient type {type(coef).__name__}")
    M = np.asarray(M, dtype=complex)
    t = grid.theta[None, :]
    c, s = np.cos(t), np.sin(t)
    e_r = np.stack([c, s], -1) * np.ones((grid.n_r, 1, 1))
    e_t = np.stack([-s, c], -1) * np.ones((grid.n_r, 1, 1))
    srr = np.einsum("...i,...ij,...j->...", e_r, M, e_r)
    stt = np.einsum("...i,...ij,...j->...", e_t, M, e_t)
    srt = np.einsum("...i,...ij,...j->...", e_r, M, e_t)
    str_ = np.einsum("...i,...ij,...j->...", e_t, M, e_r)
    return np.stack([srr, srt, str_, stt], -1)


# ---------------------------------------------------------------------------
# assembly


@dataclass
class LinearSystem:
    grid: PolarGrid
    matrix: sp.csc_matrix
    rhs: np.ndarray
    symmetric: bool
    meta: dict = field(default_factory=dict)


Density = Callable[[np.ndarray], np.ndarray]


def _ring_values(src: ModalSource, theta: np.ndarray) -> np.ndarray:
    modes = np.array(sorted(src.strengths), dtype=int).reshape(-1, 2)
    if len(modes) == 0:
        return np.zeros(theta.shape, complex)
    g = np.array([src.strengths[tuple(m)] for m in modes])
    return g @ angular_values(2, modes, (theta,))


def assemble(coef, grid: PolarGrid, sources: Sequence[ModalSource] = (), density: Optional[Density] = None,
             boundary: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> LinearSystem:
    """Conservative discretization of ``div(sigma grad u) = f``.

    ``coef`` is a :class:`Medium`, :class:`RadialLayeredMedium`, :class:`TensorField`
    or a callable on points. ``sources`` are ring sources sitting on radial faces
    (jump of the normal flux); ``density`` is a volume source; ``boundary`` the
    Dirichlet data as a function of angle (default 0).
    """
    sources = [sources] if isinstance(sources, ModalSource) else list(sources)
    nr, nt = grid.shape
    if nr < 2:
        raise AssemblyError("need at least two radial cells")
    N = grid.size
    r, dr, rf, dth = grid.r, grid.dr, grid.r_faces, grid.dtheta
    S = _sample_tensor(coef, grid)
    if np.any(~np.isfinite(S)):
        raise AssemblyError("coefficient is not finite at some cell centre")
    # rotating an isotropic tensor to polar axes leaves rounding noise off the diagonal
    noise = 1e-13 * np.abs(S[..., [0, 3]]).max(axis=-1)
    S[..., 1:3] = np.where(np.abs(S[..., 1:3]) <= noise[..., None], 0.0, S[..., 1:3])
    srr, srt, str_, stt = S[..., 0], S[..., 1], S[..., 2], S[..., 3]
    idx = np.arange(N).reshape(nr, nt)
    jp = np.roll(np.arange(nt), -1)
    jm = np.roll(np.arange(nt), 1)
    g_b = np.zeros(nt, complex) if boundary is None else np.asarray(boundary(grid.theta), dtype=complex)
    symmetric = bool(np.all(srt == 0) and np.all(str_ == 0))

    rows, cols, vals = [], [], []
    const = np.zeros(N, complex)  # boundary contributions to the flux balance

    def add(row_cells, col_cells, v):
        rows.append(np.broadcast_to(row_cells, v.shape).ravel())
        cols.append(np.broadcast_to(col_cells, v.shape).ravel())
        vals.append(v.ravel())

    # -- radial faces between cells i and i+1
    if nr > 1:
        d1 = (rf[1:-1] - r[:-1])[:, None]
        d2 = (r[1:] - rf[1:-1])[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            den = d1 / srr[:-1] + d2 / srr[1:]
        if np.any(den == 0) or np.any(~np.isfinite(den)):
            raise AssemblyError("vanishing effective coefficient on a radial face")
        T = rf[1:-1, None] * dth / den
        a, b = idx[:-1], idx[1:]
        # flux out of a = T (u_b - u_a); into b the same amount
        add(a, b, T)
        add(a, a, -T)
        add(b, a, T)
        add(b, b, -T)
        X = 0.5 * (srt[:-1] + srt[1:]) * dth / (4 * dth)
        for sgn, jj in ((1.0, jp), (-1.0, jm)):
            for cell in (a, b):
                nb = cell[:, jj]
                add(a, nb, sgn * X)
                add(b, nb, -sgn * X)

    # -- outer boundary face (Dirichlet at R, distance R - r_last)
    Tb = grid.R * dth * srr[-1] / (grid.R - r[-1])
    last = idx[-1]
    add(last, last, -Tb)
    const[last] += Tb * g_b
    Xb = srt[-1] / 4.0
    for sgn, jj in ((1.0, jp), (-1.0, jm)):
        add(last, last[jj], sgn * Xb)
        const[last] += sgn * Xb * g_b[jj]

    # -- angular faces between (i, j) and (i, j+1)
    with np.errstate(divide="ignore", invalid="ignore"):
        den_t = 0.5 / stt + 0.5 / stt[:, jp]
    if np.any(den_t == 0) or np.any(~np.isfinite(den_t)):
        raise AssemblyError("vanishing effective coefficient on an angular face")
    Tt = (dr / r)[:, None] / (dth * den_t)
    a = idx
    b = idx[:, jp]
    add(a, b, Tt)
    add(a, a, -Tt)
    add(b, a, Tt)
    add(b, b, -Tt)
    Y = 0.5 * (str_ + str_[:, jp]) * dr[:, None]
    # d/dr at cell i: central inside, one-sided at the origin ring, boundary value at R
    for col_j in (idx, idx[:, jp]):
        for i in range(nr):
            if i == 0:
                w = 1.0 / (r[1] - r[0])
                add(a[i], col_j[1], 0.5 * Y[i] * w)
                add(b[i], col_j[1], -0.5 * Y[i] * w)
                add(a[i], col_j[0], -0.5 * Y[i] * w)
                add(b[i], col_j[0], 0.5 * Y[i] * w)
            elif i == nr - 1:
                w = 1.0 / (grid.R - r[i - 1])
                add(a[i], col_j[i - 1], -0.5 * Y[i] * w)
                add(b[i], col_j[i - 1], 0.5 * Y[i] * w)
                gj = g_b if col_j is idx else g_b[jp]
                const[a[i]] += 0.5 * Y[i] * w * gj
                const[b[i]] -= 0.5 * Y[i] * w * gj
            else:
                w = 1.0 / (r[i + 1] - r[i - 1])
                add(a[i], col_j[i + 1], 0.5 * Y[i] * w)
                add(b[i], col_j[i + 1], -0.5 * Y[i] * w)
                add(a[i], col_j[i - 1], -0.5 * Y[i] * w)
                add(b[i], col_j[i - 1], 0.5 * Y[i] * w)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    keep = vals != 0
    A = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(N, N)).tocsc()
    A.sum_duplicates()

    rhs = np.zeros(N, complex)
    if density is not None:
        rhs += (np.asarray(density(grid.points()), dtype=complex) * grid.areas).ravel()
    for s in sources:
        fi = grid.face_index(s.radius)
        if fi == 0 or fi == nr:
            raise AssemblyError("ring sources must lie on an interior face")
        g = _ring_values(s, grid.theta) * s.radius * dth
        rhs[idx[fi - 1]] += 0.5 * g
        rhs[idx[fi]] += 0.5 * g
    rhs -= const
    return LinearSystem(grid, A, rhs, symmetric, {"n_unknowns": N, "nnz": int(A.nnz), "boundary": g_b})


# ---------------------------------------------------------------------------
# solve


@dataclass
class DiscreteField:
    grid: PolarGrid
    values: np.ndarray  # (N_r, N_theta)
    boundary: np.ndarray  # Dirichlet data on the outer face, per angle
    stats: dict = field(default_factory=dict)

    def to_csv(self, path, provenance: str = "") -> None:
        with open(path, "w", newline="") as fh:
            if provenance:
                fh.write(provenance.rstrip("\n") + "\n")
            w = csv.writer(fh)
            w.writerow(["r", "theta", "re", "im"])
            for i, rv in enumerate(self.grid.r):
                for j, tv in enumerate(self.grid.theta):
                    v = self.values[i, j]
                    w.writerow([f"{rv:.17g}", f"{tv:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])


def condition_estimate(system: LinearSystem, lu=None) -> float:
    """1-norm condition estimate ``||A||_1 ||A^{-1}||_1`` (Hager/Higham)."""
    A = system.matrix
    lu = lu or spla.splu(A)
    n = A.shape[0]
    inv = spla.LinearOperator((n, n), matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="H"),
                              dtype=complex)
    return float(spla.onenormest(A) * spla.onenormest(inv))


def solve(system: LinearSystem, tol: float = 1e-10, refine_steps: int = 3, estimate_condition: bool = False,
          max_condition: Optional[float] = None) -> DiscreteField:
    """Sparse LU with iterative refinement; raises :class:`SolverError` when the relative
    residual stays above ``tol`` or the condition estimate exceeds ``max_condition``."""
    A, b = system.matrix, system.rhs
    diag = {"n_unknowns": A.shape[0], "nnz": int(A.nnz)}
    try:
        lu = spla.splu(A, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}", diag) from exc
    x = lu.solve(b)
    bn = np.linalg.norm(b)
    scale = bn if bn > 0 else 1.0
    res = np.linalg.norm(A @ x - b) / scale
    steps = 0
    while res > tol and steps < refine_steps and np.all(np.isfinite(x)):
        x = x + lu.solve(b - A @ x)
        res = np.linalg.norm(A @ x - b) / scale
        steps += 1
    diag.update(residual=float(res), refinement_steps=steps, fill_nnz=int(lu.L.nnz + lu.U.nnz))
    if estimate_condition or max_condition is not None:
        diag["condition"] = condition_estimate(system, lu)
        log.info("grid solve: n=%d condition estimate %.3e", A.shape[0], diag["condition"])
    if not np.all(np.isfinite(x)) or res > tol:
        raise SolverError(f"relative residual {res:.3e} above tolerance {tol:.1e}", diag)
    if max_condition is not None and diag["condition"] > max_condition:
        raise SolverError(f"condition estimate {diag['condition']:.3e} exceeds {max_condition:.1e}", diag)
    g = system.grid
    bnd = system.meta.get("boundary", np.zeros(g.n_theta, complex))
    return DiscreteField(g, x.reshape(g.shape), bnd, diag)


def flux_balance(system: LinearSystem, df: DiscreteField) -> float:
    """Max over cells of ``|sum of outgoing fluxes - integrated source|``, relative to the
    largest single-cell flux sum."""
    u = df.values.ravel()
    out = system.matrix @ u
    mismatch = np.abs(out - system.rhs)
    scale = max(np.abs(out).max(initial=0.0), np.abs(system.rhs).max(initial=0.0), 1e-300)
    return float(mismatch.max() / scale)


# ---------------------------------------------------------------------------
# cross-validation


def compare_with_spectral(df: DiscreteField, e: ModeExpansion, region: tuple[float, float],
                          interfaces: Optional[Iterable[float]] = None) -> dict:
    """Relative L2 and max pointwise error on cell centres with ``lo < r < hi``, skipping
    the cell ring on each side of every interface (the expansion's layer edges by default)."""
    g = df.grid
    lo, hi = region
    if interfaces is None:
        interfaces = e.edges[1:-1]
    keep = (g.r > lo) & (g.r < hi)
    for rad in interfaces:
        k = int(np.argmin(np.abs(g.r_faces - rad)))
        if abs(g.r_faces[k] - rad) <= 1e-12 * max(1.0, rad):
            for i in (k - 1, k):
                if 0 <= i < g.n_r:
                    keep[i] = False
    if not np.any(keep):
        raise ValueError("no cells left in the comparison region")
    pts = g.points()[keep]
    exact = e.evaluate(pts.reshape(-1, 2)).reshape(pts.shape[:-1])
    num = df.values[keep]
    w = g.areas[keep]
    err = num - exact
    l2 = float(np.sqrt(np.sum(w * np.abs(err) ** 2) / np.sum(w * np.abs(exact) ** 2)))
    return {"relative_l2": l2, "max_abs": float(np.abs(err).max()),
            "max_relative": float(np.abs(err).max() / np.abs(exact).max()), "cells": int(keep.sum() * g.n_theta)}
