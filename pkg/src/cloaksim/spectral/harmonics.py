"""Angular bases: ``exp(i k θ)`` on the circle, real orthonormal ``Y_n^k`` on the sphere."""

from __future__ import annotations

import numpy as np
from scipy.special import sph_harm_y


def mode_list(d: int, n_max: int) -> np.ndarray:
    """All ``(n, k)`` pairs up to ``n_max``; ``k = ±n`` in 2D, ``-n..n`` in 3D."""
    out = []
    for n in range(n_max + 1):
        ks = ([0] if n == 0 else [-n, n]) if d == 2 else range(-n, n + 1)
        out.extend((n, k) for k in ks)
    return np.array(out, dtype=int).reshape(-1, 2)


def angular_norm2(d: int) -> float:
    """Squared L2 norm of one angular basis function over the unit circle/sphere."""
    return 2.0 * np.pi if d == 2 else 1.0


def to_spherical(points: np.ndarray):
    p = np.asarray(points, dtype=float)
    r = np.linalg.norm(p, axis=-1)
    if p.shape[-1] == 2:
        return r, np.arctan2(p[..., 1], p[..., 0])
    polar = np.arccos(np.clip(p[..., 2] / np.where(r > 0, r, 1.0), -1.0, 1.0))
    azim = np.arctan2(p[..., 1], p[..., 0])
    return r, polar, azim


def _complex_y(n, m, polar, azim):
    return sph_harm_y(n, m, polar, azim)


def real_sph_harm(n: int, k: int, polar, azim) -> np.ndarray:
    if k == 0:
        return np.real(_complex_y(n, 0, polar, azim))
    y = _complex_y(n, abs(k), polar, azim)
    s = np.sqrt(2.0) * (-1.0) ** k
    return s * (np.real(y) if k > 0 else np.imag(y))


def _complex_y_dpolar(n, m, polar, azim):
    # d/dθ Y_n^m = m cotθ Y_n^m + sqrt((n-m)(n+m+1)) e^{-iφ} Y_n^{m+1}
    y = _complex_y(n, m, polar, azim)
    out = m * np.cos(polar) / np.sin(polar) * y
    if m < n:
        out = out + np.sqrt((n - m) * (n + m + 1.0)) * np.exp(-1j * azim) * _complex_y(n, m + 1, polar, azim)
    return out


def real_sph_harm_grad(n: int, k: int, polar, azim):
    """``(∂_θ Y, (1/sinθ) ∂_φ Y)`` for the real harmonic."""
    m = abs(k)
    dth = _complex_y_dpolar(n, m, polar, azim)
    dph = 1j * m * _complex_y(n, m, polar, azim) / np.sin(polar)
    if k == 0:
        return np.real(dth), np.real(dph)
    s = np.sqrt(2.0) * (-1.0) ** k
    part = np.real if k > 0 else np.imag
    return s * part(dth), s * part(dph)


def angular_values(d: int, modes: np.ndarray, angles) -> np.ndarray:
    """Basis values, shape ``(M, P)``."""
    if d == 2:
        (theta,) = angles
        return np.exp(1j * np.outer(modes[:, 1], theta))
    polar, azim = angles
    return np.array([real_sph_harm(int(n), int(k), polar, azim) for n, k in modes], dtype=complex)


def point_source_weights(d: int, modes: np.ndarray, direction) -> np.ndarray:
    """Conjugate basis values at ``direction``; a unit point charge on a sphere of
    radius ρ has modal ring strengths ``weights / ρ**(d-1)`` (times ``1/2π`` in 2D)."""
    if d == 2:
        theta = float(direction)
        return np.exp(-1j * modes[:, 1] * theta) / (2.0 * np.pi)
    polar, azim = direction
    return np.array([real_sph_harm(int(n), int(k), polar, azim) for n, k in modes], dtype=complex)
