"""The cloaking medium ``s_delta * A`` built from a cloaked object ``b``.

Geometry: object in ``r2 < |x| < 2 r2`` (identity up to ``r3``), complementary
shell ``r1 < |x| < r2`` with ``r1 = r2**2 / r3``, homogeneous core
``(r3/r2)**(2(d-2)) I`` inside ``r1``, identity outside ``r3``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Optional, Sequence, Union

import numpy as np

from .spectral.basis import Layer
from .spectral.solver import ModalSource, RadialLayeredMedium
from .transforms import Composition, DomainError, Kelvin, TensorField, pushforward


class ValidationError(ValueError):
    pass


class Region(IntEnum):
    CORE = 0
    SHELL = 1
    CLOAKED = 2
    EXTERIOR = 3


@dataclass(frozen=True)
class RadialObject:
    """Piecewise-constant isotropic object: ``values[i]`` on ``edges[i] < |x| < edges[i+1]``.

    Outside ``[edges[0], edges[-1]]`` the object is the identity.
    """

    edges: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "values", values)
        if len(edges) != len(values) + 1:
            raise ValidationError("need len(edges) == len(values) + 1")
        if any(b <= a for a, b in zip(edges[:-1], edges[1:])):
            raise ValidationError("object edges must be strictly increasing")
        if any(v <= 0 for v in values):
            raise ValidationError("object values must be positive")

    @classmethod
    def identity(cls, r2: float) -> "RadialObject":
        return cls((r2, 2 * r2), (1.0,))

    def profile(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.ones(r.shape)
        for a, b, v in zip(self.edges[:-1], self.edges[1:], self.values):
            out = np.where((r > a) & (r <= b), v, out)
        return out

    def ellipticity(self) -> float:
        return float(max(1.0, max(self.values), 1.0 / min(self.values)))

    def intervals(self, r2: float, r3: float) -> list[tuple[float, float, float]]:
        """``(a, b, value)`` pieces tiling ``(r2, r3)``, with a break kept at ``2 r2``."""
        cuts = sorted({r2, 2 * r2, r3, *[e for e in self.edges if r2 < e < r3]})
        return [(a, b, float(self.profile(0.5 * (a + b)))) for a, b in zip(cuts[:-1], cuts[1:])]

    def as_field(self, d: int) -> TensorField:
        return TensorField.scalar(d, self.profile, self.ellipticity())


ObjectLike = Union[RadialObject, TensorField]


@dataclass(frozen=True)
class CloakSpec:
    """Geometry, object and loss of one cloaking experiment; ``r1`` is derived."""

    d: int
    r2: float
    r3: float
    R_omega: float
    obj: ObjectLike
    delta: float
    ellipticity: float = 1.0
    core_coefficient: Optional[float] = None

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValidationError("d must be 2 or 3")
        if not 0 < self.r2 < self.r3 < self.R_omega:
            raise ValidationError(
                f"radii must satisfy 0 < r2 < r3 < R_omega, got {self.r2}, {self.r3}, {self.R_omega}"
            )
        if self.r3 <= 2 * self.r2:
            raise ValidationError("the object region B_{2 r2} must lie inside B_{r3} (need r3 > 2 r2)")
        if not self.delta >= 0:
            raise ValidationError("loss delta must be nonnegative")
        if isinstance(self.obj, RadialObject):
            lo, hi = self.obj.edges[0], self.obj.edges[-1]
            if lo < self.r2 or hi > 2 * self.r2:
                raise ValidationError("object must be supported in r2 <= |x| <= 2 r2 (b = I beyond)")
        elif isinstance(self.obj, TensorField):
            if self.obj.d != self.d:
                raise ValidationError("object dimension does not match d")
        else:
            raise ValidationError("object must be a RadialObject or TensorField")

    @property
    def r1(self) -> float:
        return self.r2**2 / self.r3

    @property
    def core_value(self) -> float:
        if self.core_coefficient is not None:
            return float(self.core_coefficient)
        return (self.r3**2 / self.r2**2) ** (self.d - 2)

    @property
    def is_radial(self) -> bool:
        return isinstance(self.obj, RadialObject)

    def with_delta(self, delta: float) -> "CloakSpec":
        return replace(self, delta=delta)


def _object_field(spec: CloakSpec) -> TensorField:
    """``b`` on ``r2 < |x| < r3``: the object on ``(r2, 2 r2)``, identity beyond."""
    if isinstance(spec.obj, RadialObject):
        return spec.obj.as_field(spec.d)
    a = spec.obj
    d, r2 = spec.d, spec.r2

    def ev(x):
        r = np.linalg.norm(x, axis=-1)
        inside = (r > r2) & (r < 2 * r2)
        out = np.broadcast_to(np.eye(d), x.shape[:-1] + (d, d)).astype(complex)
        if np.any(inside):
            out = out.copy()
            out[inside] = a(x[inside])
        return out

    return TensorField(d, ev, a.ellipticity, a.lipschitz)


@dataclass(frozen=True)
class Medium:
    """``sigma = s_delta A`` with region tags; immutable."""

    spec: CloakSpec
    b: TensorField = field(repr=False)

    def tags(self, x) -> np.ndarray:
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        s = self.spec
        if np.any(r >= s.R_omega):
            raise DomainError(f"point outside the domain |x| < {s.R_omega}")
        out = np.full(r.shape, int(Region.EXTERIOR))
        out[r < s.r3] = Region.CLOAKED
        out[r < s.r2] = Region.SHELL
        out[r < s.r1] = Region.CORE
        return out

    def A(self, x) -> np.ndarray:
        """The lossless coefficient ``A`` at points ``x``."""
        x = np.asarray(x, dtype=float)
        s = self.spec
        d = s.d
        tags = self.tags(x)
        out = np.zeros(x.shape[:-1] + (d, d), dtype=complex)
        out[...] = np.eye(d)
        m = tags == Region.CORE
        out[m] = s.core_value * np.eye(d)
        m = tags == Region.CLOAKED
        if np.any(m):
            out[m] = self.b(x[m])
        m = tags == Region.SHELL
        if np.any(m):
            F_inv = Kelvin(s.r2, domain=(s.r2, s.r3))
            out[m] = pushforward(F_inv, self.b, x[m])
        return out

    def sigma(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = self.A(x)
        m = self.tags(x) == Region.SHELL
        out[m] *= -1.0 + 1j * self.spec.delta
        return out

    def sample_coefficient(self, x):
        """``(sigma(x), tag)`` at points ``x``."""
        return self.sigma(x), self.tags(x)

    def with_delta(self, delta: float) -> "Medium":
        return Medium(self.spec.with_delta(delta), self.b)

    # ------------------------------------------------------------- exact path
    def radial_layers(self) -> RadialLayeredMedium:
        """Layered scalar form of ``s_delta A`` for a radial object."""
        s = self.spec
        if not s.is_radial:
            raise ValidationError("the exact modal path needs a RadialObject")
        shell_factor = -1.0 + 1j * s.delta
        pieces = s.obj.intervals(s.r2, s.r3)
        layers = [Layer(0.0, s.r1, s.core_value)]
        for a, b, v in reversed(pieces):
            if s.d == 2:
                layers.append(Layer(s.r2**2 / b, s.r2**2 / a, shell_factor * v))
            else:
                layers.append(Layer(s.r2**2 / b, s.r2**2 / a, shell_factor * v * s.r2**2, -2.0))
        layers.extend(Layer(a, b, v) for a, b, v in pieces)
        layers.append(Layer(s.r3, s.R_omega, 1.0))
        return RadialLayeredMedium(s.d, tuple(layers))

    def reference_layers(self) -> RadialLayeredMedium:
        """Homogeneous medium of the reference problem ``Δu = f``, with the same breaks."""
        return RadialLayeredMedium(self.spec.d, tuple(
            Layer(L.r_in, L.r_out, 1.0) for L in self.radial_layers().layers))

    def extension_layers(self, steps: int = 32) -> RadialLayeredMedium:
        """Radial extension of ``b`` into ``B_{r3}``: linear from ``I`` at 0 to ``b(r2+)``,
        approximated by ``steps`` constant rings, then ``b`` up to ``r3``."""
        s = self.spec
        if not s.is_radial:
            raise ValidationError("the modal extension needs a RadialObject")
        pieces = s.obj.intervals(s.r2, s.r3)
        b_edge = pieces[0][2]
        edges = np.linspace(0.0, s.r2, steps + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        layers = [Layer(float(a), float(b), 1.0 + (b_edge - 1.0) * m / s.r2)
                  for a, b, m in zip(edges[:-1], edges[1:], mids)]
        layers.extend(Layer(a, b, v) for a, b, v in pieces)
        return RadialLayeredMedium(s.d, tuple(layers))


def build_cloak(d: int, r2: float, r3: float, R_omega: float, b: ObjectLike = None, delta: float = 0.1,
                ellipticity: Optional[float] = None, core_coefficient: Optional[float] = None,
                check: bool = True) -> tuple[CloakSpec, Medium]:
    """Assemble the cloak for object ``b`` (default: identity object)."""
    if b is None:
        b = RadialObject.identity(r2)
    if not delta > 0:
        raise ValidationError("loss delta must be positive")
    if ellipticity is None:
        ellipticity = b.ellipticity() if isinstance(b, RadialObject) else b.ellipticity
    spec = CloakSpec(d, r2, r3, R_omega, b, delta, ellipticity, core_coefficient)
    bf = _object_field(spec)
    if check:
        obj = b.as_field(d) if isinstance(b, RadialObject) else b
        rep = validate_ellipticity(obj, ellipticity, (r2, 2 * r2), n_samples=512)
        if not rep.passed:
            raise ValidationError(
                f"object is not elliptic with constant {ellipticity}: Rayleigh quotients in "
                f"[{rep.min_quotient:.6g}, {rep.max_quotient:.6g}]"
            )
    return spec, Medium(spec, bf)


def check_source(spec: CloakSpec, sources: Union[ModalSource, Sequence[ModalSource]]) -> None:
    """Sources must live in ``Omega \\ B_{r3}``."""
    sources = [sources] if isinstance(sources, ModalSource) else sources
    for s in sources:
        if not spec.r3 < s.radius < spec.R_omega:
            raise ValidationError(f"source ring at {s.radius} must satisfy r3 < radius < R_omega")


# ---------------------------------------------------------------------------
# structural checks on the object


def _sample_annulus(d: int, region, n: int, rng) -> np.ndarray:
    lo, hi = region
    u = rng.random(n)
    r = (lo**d + u * (hi**d - lo**d)) ** (1.0 / d)
    v = rng.normal(size=(n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return r[:, None] * v


@dataclass
class EllipticityReport:
    min_quotient: float
    max_quotient: float
    bound: float
    passed: bool


def validate_ellipticity(b: TensorField, bound: float, region=(1.0, 2.0), n_samples: int = 2048,
                         seed: int = 0, tol: float = 1e-9) -> EllipticityReport:
    """Rayleigh quotients ``<b ξ, ξ>/|ξ|^2`` at random points/directions must lie in
    ``[1/bound - tol, bound + tol]``. Eigenvalue extremes are included as well."""
    rng = np.random.default_rng(seed)
    x = _sample_annulus(b.d, region, n_samples, rng)
    M = np.real(b(x))
    xi = rng.normal(size=(n_samples, b.d))
    q = np.einsum("ni,nij,nj->n", xi, M, xi) / np.einsum("ni,ni->n", xi, xi)
    ev = np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, -1, -2)))
    lo = float(min(q.min(), ev.min()))
    hi = float(max(q.max(), ev.max()))
    ok = lo >= 1.0 / bound - tol and hi <= bound + tol
    return EllipticityReport(lo, hi, bound, bool(ok))


@dataclass
class LipschitzReport:
    constant: float
    by_separation: dict
    lipschitz: bool


def estimate_lipschitz(b: TensorField, region=(1.0, 2.0), r2: float = 1.0, n_samples: int = 20000,
                       seed: int = 0, separations=(1e-2, 1e-3), growth_flag: float = 3.0) -> LipschitzReport:
    """Max of ``||b(x) - b(y)||_2 / |x - y|`` over random pairs at separations ``s * r2``.

    The field is flagged non-Lipschitz when the estimate at the finest separation
    exceeds ``growth_flag`` times the one at the coarsest.
    """
    rng = np.random.default_rng(seed)
    lo, hi = region
    out = {}
    for sep in separations:
        h = sep * r2
        x = _sample_annulus(b.d, (lo + h, hi - h), n_samples, rng)
        dirs = rng.normal(size=x.shape)
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        y = x + h * dirs
        diff = b(x) - b(y)
        out[sep] = float(np.linalg.norm(diff, ord=2, axis=(-2, -1)).max() / h)
    seps = sorted(out)
    coarse, fine = out[seps[-1]], out[seps[0]]
    lip = not (fine > growth_flag * max(coarse, 1e-300) and fine > 0)
    return LipschitzReport(max(out.values()), out, lip)


# ---------------------------------------------------------------------------
# complementary identity


def _ball_samples(d: int, lo: float, hi: float, n: int, seed: int) -> np.ndarray:
    return _sample_annulus(d, (lo, hi), n, np.random.default_rng(seed))


def verify_complementary_identity(spec: CloakSpec, n_samples: int = 1000, seed: int = 0) -> float:
    """Max Frobenius distance of ``G_* F_* A`` to ``I`` over random points of ``B_{r3}``.

    ``G ∘ F`` is the dilation by ``(r3/r2)**2`` and pulls ``B_{r3}`` back onto the core,
    so this measures whether the core coefficient is the complementary one.
    """
    _, medium = build_cloak(spec.d, spec.r2, spec.r3, spec.R_omega, spec.obj, max(spec.delta, 1e-300),
                            spec.ellipticity, spec.core_coefficient, check=False)
    F = Kelvin(spec.r2, domain=(0.0, spec.r1))
    G = Kelvin(spec.r3, domain=(spec.r3, np.inf))
    GF = Composition(G, F)
    A = TensorField(spec.d, medium.A)
    z = _ball_samples(spec.d, 1e-6 * spec.r3, spec.r3 * (1 - 1e-6), n_samples, seed)
    M = pushforward(GF, A, z)
    return float(np.linalg.norm(M - np.eye(spec.d), axis=(-2, -1)).max())


def verify_shell_complement(medium: Medium, n_samples: int = 1000, seed: int = 0) -> float:
    """Max Frobenius distance of ``F_*(A|shell)`` to ``b`` on ``r2 < |y| < r3``."""
    s = medium.spec
    F = Kelvin(s.r2, domain=(s.r1, s.r2))
    A = TensorField(s.d, medium.A)
    y = _ball_samples(s.d, s.r2 * (1 + 1e-9), s.r3 * (1 - 1e-9), n_samples, seed)
    return float(np.linalg.norm(pushforward(F, A, y) - medium.b(y), axis=(-2, -1)).max())
