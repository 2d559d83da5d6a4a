"""Radial layers, their modal exponents, and exact integrals of power/log terms.

A layer carries a coefficient ``sigma * r**power`` (``power`` is 0 for
piecewise-constant media and -2 for the three-dimensional Kelvin image of a
constant layer). For angular mode ``n`` the radial solutions are ``r**a`` with

    a**2 + (d - 2 + power) * a - n * (n + d - 2) = 0,

and ``r**a, r**a * ln r`` when the root is double (``n = 0`` and
``power = 2 - d``, i.e. the two-dimensional ``1, ln r`` pair).

Radial functions are handled as term arrays ``(coef, exponent, logpow)``
meaning ``sum coef * r**exponent * ln(r)**logpow``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class Layer:
    r_in: float
    r_out: float
    sigma: complex
    power: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.r_in < self.r_out):
            raise ValueError(f"layer radii must satisfy 0 <= r_in < r_out, got {self.r_in}, {self.r_out}")
        if self.sigma == 0:
            raise ValueError("layer coefficient must be nonzero")

    def coefficient(self, r):
        return self.sigma * np.asarray(r, dtype=float) ** self.power

    def split(self, radius: float) -> tuple["Layer", "Layer"]:
        return (Layer(self.r_in, radius, self.sigma, self.power), Layer(radius, self.r_out, self.sigma, self.power))

    def same_material(self, other: "Layer") -> bool:
        return self.sigma == other.sigma and self.power == other.power


@lru_cache(maxsize=None)
def exponents(d: int, n: int, power: float = 0.0) -> tuple[float, float, bool]:
    """Return ``(a_hi, a_lo, is_log)`` for mode ``n`` in a layer of the given power."""
    b = d - 2 + power
    disc = b * b + 4.0 * n * (n + d - 2)
    if disc == 0.0:
        a = -b / 2.0
        return a, a, True
    s = float(np.sqrt(disc))
    return (-b + s) / 2.0, (-b - s) / 2.0, False


def angular_eigenvalue(d: int, n: int) -> float:
    return float(n * (n + d - 2))


def radial_terms(d: int, n: int, power: float, p: complex, q: complex) -> list[tuple[complex, float, int]]:
    a_hi, a_lo, is_log = exponents(d, n, power)
    if is_log:
        return [(p, a_hi, 0), (q, a_hi, 1)]
    return [(p, a_hi, 0), (q, a_lo, 0)]


def derivative(terms):
    out = []
    for c, e, j in terms:
        if c == 0:
            continue
        if e != 0:
            out.append((c * e, e - 1.0, j))
        if j > 0:
            out.append((c * j, e - 1.0, j - 1))
    return out


def evaluate_terms(terms, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    out = np.zeros(r.shape, dtype=complex)
    lr = None
    for c, e, j in terms:
        if c == 0:
            continue
        t = c * r**e
        if j:
            if lr is None:
                lr = np.log(r)
            t = t * lr**j
        out = out + t
    return out


def conj_product(f, g, extra_power: float = 0.0):
    """Terms of ``conj(f) * g * r**extra_power`` with like terms merged."""
    acc: dict[tuple[float, int], complex] = {}
    for c1, e1, j1 in f:
        if c1 == 0:
            continue
        for c2, e2, j2 in g:
            if c2 == 0:
                continue
            key = (e1 + e2 + extra_power, j1 + j2)
            acc[key] = acc.get(key, 0.0) + np.conj(c1) * c2
    return [(c, e, j) for (e, j), c in acc.items()]


def _antiderivative(s: float, j: int, r: float) -> float:
    """Antiderivative of ``r**s * ln(r)**j`` evaluated at ``r > 0``."""
    L = np.log(r)
    if s == -1.0:
        return L ** (j + 1) / (j + 1)
    t = s + 1.0
    rt = r**t
    if j == 0:
        return rt / t
    if j == 1:
        return rt * (L / t - 1.0 / t**2)
    if j == 2:
        return rt * (L * L / t - 2.0 * L / t**2 + 2.0 / t**3)
    if j == 3:
        return rt * (L**3 / t - 3.0 * L * L / t**2 + 6.0 * L / t**3 - 6.0 / t**4)
    if j == 4:
        return rt * (L**4 / t - 4.0 * L**3 / t**2 + 12.0 * L * L / t**3 - 24.0 * L / t**4 + 24.0 / t**5)
    raise NotImplementedError(f"log power {j}")


def integrate_terms(terms, lo: float, hi: float) -> complex:
    """Exact ``∫_lo^hi sum c r**s ln(r)**j dr``; ``lo`` may be 0 for integrable terms."""
    total = 0.0 + 0.0j
    for c, s, j in terms:
        if c == 0:
            continue
        upper = _antiderivative(s, j, hi)
        if lo == 0.0:
            if s + 1.0 <= 0.0:
                raise ValueError(f"term r^{s} ln^{j} r is not integrable at the origin")
            lower = 0.0
        else:
            lower = _antiderivative(s, j, lo)
        total += c * (upper - lower)
    return total
