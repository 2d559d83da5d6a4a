"""Raster sampling and binary PGM/PPM output (no plotting library needed)."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .media import Medium, Region

# core, shell, cloaked, exterior, outside the domain
REGION_COLORS = np.array([
    [214, 96, 77],
    [67, 147, 195],
    [244, 165, 130],
    [209, 229, 240],
    [255, 255, 255],
], dtype=np.uint8)

# a short perceptual ramp (dark blue -> teal -> yellow), linearly interpolated
_RAMP = np.array([
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
], dtype=float)


def raster_points(bounds: tuple[float, float, float, float], width: int, height: int) -> np.ndarray:
    """Pixel-centre coordinates ``(height, width, 2)``; row 0 is the top (largest y)."""
    x0, x1, y0, y1 = bounds
    if width < 1 or height < 1:
        raise ValueError("raster must have at least one pixel")
    xs = x0 + (np.arange(width) + 0.5) * (x1 - x0) / width
    ys = y1 - (np.arange(height) + 0.5) * (y1 - y0) / height
    X, Y = np.meshgrid(xs, ys)
    return np.stack([X, Y], -1)


def sample_raster(fn: Callable[[np.ndarray], np.ndarray], bounds, width: int, height: int,
                  radius: Optional[float] = None) -> np.ndarray:
    """Evaluate ``fn`` on pixel centres; pixels with ``|x| >= radius`` become NaN."""
    pts = raster_points(bounds, width, height)
    out = np.full(pts.shape[:-1], np.nan, dtype=complex)
    mask = np.ones(pts.shape[:-1], bool) if radius is None else np.linalg.norm(pts, axis=-1) < radius
    if np.any(mask):
        out[mask] = fn(pts[mask])
    return out


def scale_magnitude(values: np.ndarray, scale: str = "linear", floor: float = 1e-12,
                    vmin: Optional[float] = None, vmax: Optional[float] = None) -> np.ndarray:
    """Map ``|values|`` to [0, 1]; NaN stays NaN. ``log`` uses ``log10`` clipped at
    ``floor * max``. A constant raster maps to 0 everywhere."""
    mag = np.abs(np.asarray(values))
    finite = np.isfinite(mag)
    if mag.size == 0:
        raise ValueError("empty raster")
    if not np.any(finite):
        raise ValueError("raster has no finite samples")
    top = float(mag[finite].max())
    if scale == "log":
        lo_clip = max(top * floor, np.finfo(float).tiny)
        data = np.log10(np.maximum(mag, lo_clip))
    elif scale == "linear":
        data = mag
    else:
        raise ValueError(f"unknown scale {scale!r}")
    lo = float(np.nanmin(np.where(finite, data, np.nan))) if vmin is None else vmin
    hi = float(np.nanmax(np.where(finite, data, np.nan))) if vmax is None else vmax
    span = hi - lo
    out = np.where(finite, 0.0, np.nan)
    if span > 0:
        out = np.where(finite, np.clip((data - lo) / span, 0.0, 1.0), np.nan)
    return out


def _gray(u: np.ndarray) -> np.ndarray:
    return np.where(np.isfinite(u), np.round(np.nan_to_num(u) * 255), 255).astype(np.uint8)


def _color(u: np.ndarray) -> np.ndarray:
    t = np.nan_to_num(u) * (len(_RAMP) - 1)
    i = np.clip(np.floor(t).astype(int), 0, len(_RAMP) - 2)
    f = (t - i)[..., None]
    rgb = (1 - f) * _RAMP[i] + f * _RAMP[i + 1]
    rgb[~np.isfinite(u)] = 255
    return np.round(rgb).astype(np.uint8)


def encode_pnm(pixels: np.ndarray) -> bytes:
    """``(h, w)`` uint8 -> P5, ``(h, w, 3)`` uint8 -> P6."""
    px = np.ascontiguousarray(pixels, dtype=np.uint8)
    if px.size == 0:
        raise ValueError("empty raster")
    if px.ndim == 2:
        magic = b"P5"
    elif px.ndim == 3 and px.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError("pixels must be (h, w) or (h, w, 3)")
    h, w = px.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + px.tobytes()


def decode_pnm(data: bytes) -> np.ndarray:
    """Inverse of :func:`encode_pnm` for the header layout it writes."""
    magic, dims, maxval, rest = data.split(b"\n", 3)
    w, h = map(int, dims.split())
    if int(maxval) != 255:
        raise ValueError("only 8-bit maps are supported")
    px = np.frombuffer(rest, dtype=np.uint8)
    return px.reshape(h, w) if magic == b"P5" else px.reshape(h, w, 3)


def emit_heatmap(values: np.ndarray, path, palette: str = "gray", scale: str = "linear",
                 floor: float = 1e-12) -> np.ndarray:
    """Write ``|values|`` as a binary PGM (``gray``) or PPM (``color``); returns the pixels."""
    vals = np.asarray(values)
    if vals.ndim != 2 or vals.size == 0:
        raise ValueError("heatmap needs a non-empty 2D raster")
    u = scale_magnitude(vals, scale, floor)
    if palette == "gray":
        px = _gray(u)
    elif palette == "color":
        px = _color(u)
    else:
        raise ValueError(f"unknown palette {palette!r}")
    with open(path, "wb") as fh:
        fh.write(encode_pnm(px))
    return px


def region_map(medium: Medium, width: int, height: int, path=None, extent: Optional[float] = None) -> np.ndarray:
    """Colour-coded core/shell/cloaked/exterior layout of a 2D cloak (P6) on the
    square of half-width ``extent`` (default: the domain radius)."""
    s = medium.spec
    if s.d != 2:
        raise ValueError("region maps are drawn for d = 2")
    R = s.R_omega
    ext = extent or R
    pts = raster_points((-ext, ext, -ext, ext), width, height)
    inside = np.linalg.norm(pts, axis=-1) < R
    tags = np.full(pts.shape[:-1], len(Region), dtype=int)
    tags[inside] = medium.tags(pts[inside])
    px = REGION_COLORS[tags]
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(encode_pnm(px))
    return px
