"""Point maps, Jacobians and push-forwards for Kelvin inversions and dilations.

All maps act on arrays of points with shape ``(..., d)``. Jacobians are closed
form; numerical differentiation lives only in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "DomainError",
    "Diffeomorphism",
    "Kelvin",
    "Dilation",
    "Composition",
    "Identity",
    "TensorField",
    "map_point",
    "jacobian",
    "pushforward",
    "pushforward_field",
    "verify_complementary_identity",
]

# relative distance to the origin / domain boundary below which points are refused
_EDGE_TOL = 1e-12


class DomainError(ValueError):
    """A point lies outside the open domain of a map or field."""


def _as_points(x, d: Optional[int] = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        raise DomainError("points must have a trailing coordinate axis")
    if d is not None and x.shape[-1] != d:
        raise DomainError(f"expected {d}-dimensional points, got shape {x.shape}")
    if x.shape[-1] not in (2, 3):
        raise DomainError(f"only d=2 or d=3 points are supported, got {x.shape[-1]}")
    return x


def _check_annulus(radius: np.ndarray, lo: float, hi: float, scale: float) -> None:
    tol = _EDGE_TOL * scale
    if np.any(radius <= tol):
        raise DomainError("point at (or numerically at) the origin")
    bad = (radius <= lo + tol) if lo > 0 else np.zeros(radius.shape, bool)
    if np.isfinite(hi):
        bad |= radius >= hi - tol
    if np.any(bad):
        raise DomainError(f"point outside the open annulus ({lo}, {hi})")


class Diffeomorphism:
    """Base class. Subclasses provide ``_map``, ``_inverse`` and ``_jac``."""

    domain: tuple[float, float]

    def map_annulus(self, lo: float, hi: float) -> tuple[float, float]:
        raise NotImplementedError

    def image(self) -> tuple[float, float]:
        return self.map_annulus(*self.domain)

    def _scale(self) -> float:
        return 1.0

    def check_domain(self, x: np.ndarray) -> None:
        _check_annulus(np.linalg.norm(x, axis=-1), *self.domain, self._scale())

    def check_image(self, y: np.ndarray) -> None:
        _check_annulus(np.linalg.norm(y, axis=-1), *self.image(), self._scale())

    def __call__(self, x):
        x = _as_points(x)
        self.check_domain(x)
        return self._map(x)

    def inverse(self, y):
        y = _as_points(y)
        self.check_image(y)
        return self._inverse(y)

    def jacobian(self, x):
        x = _as_points(x)
        self.check_domain(x)
        return self._jac(x)

    def then(self, outer: "Diffeomorphism") -> "Composition":
        """Return ``outer ∘ self``."""
        return Composition(outer, self)


@dataclass(frozen=True)
class Kelvin(Diffeomorphism):
    """Inversion ``x -> R^2 x / |x|^2`` restricted to the annulus ``domain``."""

    radius: float
    domain: tuple[float, float] = (0.0, np.inf)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("Kelvin radius must be positive")
        lo, hi = self.domain
        if not 0 <= lo < hi:
            raise ValueError(f"bad domain annulus {self.domain}")

    def _scale(self):
        return self.radius

    def map_annulus(self, lo, hi):
        R2 = self.radius**2
        return (R2 / hi if np.isfinite(hi) else 0.0, R2 / lo if lo > 0 else np.inf)

    def _map(self, x):
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        return self.radius**2 * x / r2

    # an involution
    _inverse = _map

    def _jac(self, x):
        d = x.shape[-1]
        r2 = np.sum(x * x, axis=-1)[..., None, None]
        xhat_outer = x[..., :, None] * x[..., None, :] / r2
        return (self.radius**2 / r2) * (np.eye(d) - 2.0 * xhat_outer)


@dataclass(frozen=True)
class Dilation(Diffeomorphism):
    """``x -> factor * x``."""

    factor: float
    domain: tuple[float, float] = (0.0, np.inf)

    def __post_init__(self):
        if self.factor <= 0:
            raise ValueError("dilation factor must be positive")

    def _scale(self):
        lo, hi = self.domain
        return hi if np.isfinite(hi) else max(lo, 1.0)

    def check_domain(self, x):
        # the origin is a regular point of a dilation; only the annulus matters
        r = np.linalg.norm(x, axis=-1)
        lo, hi = self.domain
        if lo > 0 and np.any(r <= lo):
            raise DomainError(f"point outside the annulus ({lo}, {hi})")
        if np.isfinite(hi) and np.any(r >= hi):
            raise DomainError(f"point outside the annulus ({lo}, {hi})")

    def check_image(self, y):
        r = np.linalg.norm(y, axis=-1)
        lo, hi = self.image()
        if lo > 0 and np.any(r <= lo):
            raise DomainError(f"point outside the image annulus ({lo}, {hi})")
        if np.isfinite(hi) and np.any(r >= hi):
            raise DomainError(f"point outside the image annulus ({lo}, {hi})")

    def map_annulus(self, lo, hi):
        return (self.factor * lo, self.factor * hi)

    def _map(self, x):
        return self.factor * x

    def _inverse(self, y):
        return y / self.factor

    def _jac(self, x):
        d = x.shape[-1]
        return np.broadcast_to(self.factor * np.eye(d), x.shape[:-1] + (d, d)).copy()


@dataclass(frozen=True)
class Identity(Dilation):
    factor: float = 1.0


@dataclass(frozen=True)
class Composition(Diffeomorphism):
    """``outer ∘ inner``; the domain is that of ``inner``."""

    outer: Diffeomorphism
    inner: Diffeomorphism

    @property
    def domain(self):  # type: ignore[override]
        return self.inner.domain

    def check_domain(self, x):
        self.inner.check_domain(x)
        self.outer.check_domain(self.inner._map(x))

    def check_image(self, y):
        self.outer.check_image(y)
        self.inner.check_image(self.outer._inverse(y))

    def map_annulus(self, lo, hi):
        return self.outer.map_annulus(*self.inner.map_annulus(lo, hi))

    def _map(self, x):
        return self.outer._map(self.inner._map(x))

    def _inverse(self, y):
        return self.inner._inverse(self.outer._inverse(y))

    def _jac(self, x):
        return self.outer._jac(self.inner._map(x)) @ self.inner._jac(x)


def map_point(T: Diffeomorphism, x) -> np.ndarray:
    return T(x)


def jacobian(T: Diffeomorphism, x) -> np.ndarray:
    return T.jacobian(x)


@dataclass(frozen=True)
class TensorField:
    """Matrix-valued coefficient ``x -> a(x)`` (shape ``(..., d, d)``).

    ``ellipticity`` is the bound Λ ≥ 1 the field is claimed to satisfy;
    ``lipschitz`` is an optional sampled estimate.
    """

    d: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    ellipticity: float = 1.0
    lipschitz: Optional[float] = None

    def __call__(self, x) -> np.ndarray:
        x = _as_points(x, self.d)
        out = np.asarray(self.evaluator(x))
        if out.shape != x.shape[:-1] + (self.d, self.d):
            raise ValueError(f"tensor evaluator returned shape {out.shape}")
        return out

    @classmethod
    def identity(cls, d: int) -> "TensorField":
        return cls.scalar(d, lambda r: np.ones_like(r))

    @classmethod
    def constant(cls, matrix) -> "TensorField":
        m = np.asarray(matrix)
        d = m.shape[0]
        ev = np.linalg.eigvalsh(np.real(m))
        lam = float(max(ev.max(), 1.0 / ev.min())) if ev.min() > 0 else np.inf
        return cls(d, lambda x: np.broadcast_to(m, x.shape[:-1] + (d, d)).copy(), lam)

    @classmethod
    def scalar(cls, d: int, profile: Callable[[np.ndarray], np.ndarray], ellipticity: float = 1.0):
        """Isotropic field ``profile(|x|) * I``."""

        def ev(x):
            s = np.asarray(profile(np.linalg.norm(x, axis=-1)))
            return s[..., None, None] * np.eye(d)

        return cls(d, ev, ellipticity)


def pushforward(T: Diffeomorphism, b, y) -> np.ndarray:
    """``T_*b(y) = DT(x) b(x) DT(x)^T / |det DT(x)|`` with ``x = T^{-1}(y)``.

    ``b`` is a :class:`TensorField` or any callable returning ``(..., d, d)``.
    """
    y = _as_points(y)
    x = T.inverse(y)
    D = T._jac(x)
    J = np.abs(np.linalg.det(D))[..., None, None]
    return D @ b(x) @ np.swapaxes(D, -1, -2) / J


def pushforward_field(T: Diffeomorphism, b: TensorField) -> TensorField:
    """Lazy push-forward as a new :class:`TensorField` on the image of ``T``."""
    return TensorField(b.d, lambda y: pushforward(T, b, y), b.ellipticity)


def verify_complementary_identity(spec, n_samples: int = 1000, seed: int = 0) -> float:
    """See :func:`cloaksim.media.verify_complementary_identity`."""
    from .media import verify_complementary_identity as _verify

    return _verify(spec, n_samples, seed)
