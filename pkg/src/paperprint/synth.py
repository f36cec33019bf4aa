"""Synthetic paper microstructure and scanner degradation.

Surfaces are superpositions of randomly placed, randomly oriented elongated
Gaussian ridges (a stand-in for matted fiber bundles) plus per-pixel noise.
Default parameters are calibrated so that plane-fit normals of a 300 ppi
patch have tilt statistics resembling office paper measured at desk scale:
mean sin(theta) near 0.08 with standard deviation near 0.045.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .fields import HeightMap, NormalField, ScanImage

#: Ridge density used when scaling the default fiber count to other patch
#: sizes, in fibers per square millimeter.
DEFAULT_FIBER_DENSITY_MM2 = 6.0


@dataclass(frozen=True)
class FiberModelParams:
    """Knobs of the ridge-superposition surface generator."""

    fiber_count: int = 1720
    fiber_width_um: float = 160.0
    fiber_length_um: float = 1400.0
    ridge_height_um: float = 13.0
    noise_floor_um: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.fiber_count < 0:
            raise ValueError("fiber_count must be non-negative")
        for name in ("fiber_width_um", "fiber_length_um", "ridge_height_um"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.noise_floor_um < 0:
            raise ValueError("noise_floor_um must be non-negative")

    def scaled_to_area(self, rows: int, cols: int, pitch: float) -> "FiberModelParams":
        """Same texture statistics on a different patch footprint."""
        area_mm2 = rows * cols * pitch * pitch / 1e6
        return replace(self, fiber_count=int(round(DEFAULT_FIBER_DENSITY_MM2 * area_mm2)))


def generate_surface(
    params: FiberModelParams, rows: int, cols: int, pitch: float
) -> HeightMap:
    """Synthesize a seeded random heightmap on a rows-by-cols grid.

    Fibers are placed in continuous micrometer coordinates and rasterized at
    pixel centers, so the ridge field depends on the physical footprint and
    seed but not on the sampling pitch.
    """
    if rows < 32 or cols < 32:
        raise ValueError("grid must be at least 32x32")
    if not pitch > 0:
        raise ValueError("pitch must be positive")
    rng = np.random.default_rng(params.seed)
    extent_x = cols * pitch
    extent_y = rows * pitch

    m = params.fiber_count
    cx = rng.uniform(0.0, extent_x, m)
    cy = rng.uniform(0.0, extent_y, m)
    theta = rng.uniform(0.0, np.pi, m)
    s_along = 0.5 * params.fiber_length_um * rng.uniform(0.7, 1.3, m)
    s_across = 0.5 * params.fiber_width_um * rng.uniform(0.7, 1.3, m)
    amp = params.ridge_height_um * rng.uniform(0.5, 1.5, m)

    heights = np.zeros((rows, cols))
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    for k in range(m):
        hx = 3.0 * np.hypot(s_along[k] * cos_t[k], s_across[k] * sin_t[k])
        hy = 3.0 * np.hypot(s_along[k] * sin_t[k], s_across[k] * cos_t[k])
        j0 = max(0, int(np.floor((cx[k] - hx) / pitch)))
        j1 = min(cols - 1, int(np.ceil((cx[k] + hx) / pitch)))
        i0 = max(0, int(np.floor((cy[k] - hy) / pitch)))
        i1 = min(rows - 1, int(np.ceil((cy[k] + hy) / pitch)))
        if j0 > j1 or i0 > i1:
            continue
        xs = np.arange(j0, j1 + 1) * pitch - cx[k]
        ys = (np.arange(i0, i1 + 1) * pitch - cy[k])[:, None]
        u = xs * cos_t[k] + ys * sin_t[k]
        v = -xs * sin_t[k] + ys * cos_t[k]
        heights[i0 : i1 + 1, j0 : j1 + 1] += amp[k] * np.exp(
            -0.5 * (u / s_along[k]) ** 2 - 0.5 * (v / s_across[k]) ** 2
        )

    if params.noise_floor_um > 0:
        heights += rng.normal(0.0, params.noise_floor_um, (rows, cols))
    return HeightMap(heights=heights, pixel_pitch=pitch)


def normals_from_heightmap(hm: HeightMap, window: int = 3) -> NormalField:
    """Per-pixel unit normals from a least-squares plane fit over a window.

    Border pixels use the truncated window.  A degenerate window of equal
    heights yields the straight-up normal.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 3")
    z = hm.heights
    rows, cols = z.shape
    r = window // 2
    pitch = hm.pixel_pitch

    # Accumulate clipped-window sums by shifting; local sums avoid the
    # cancellation that integral images suffer on large grids.
    n_pix = np.zeros_like(z)
    s_z = np.zeros_like(z)
    s_x = np.zeros_like(z)
    s_y = np.zeros_like(z)
    s_xx = np.zeros_like(z)
    s_yy = np.zeros_like(z)
    s_xz = np.zeros_like(z)
    s_yz = np.zeros_like(z)
    for du in range(-r, r + 1):
        src_i = slice(max(du, 0), rows + min(du, 0))
        dst_i = slice(max(-du, 0), rows + min(-du, 0))
        dy = du * pitch
        for dv in range(-r, r + 1):
            src_j = slice(max(dv, 0), cols + min(dv, 0))
            dst_j = slice(max(-dv, 0), cols + min(-dv, 0))
            dx = dv * pitch
            blk = z[src_i, src_j]
            n_pix[dst_i, dst_j] += 1.0
            s_z[dst_i, dst_j] += blk
            s_x[dst_i, dst_j] += dx
            s_y[dst_i, dst_j] += dy
            s_xx[dst_i, dst_j] += dx * dx
            s_yy[dst_i, dst_j] += dy * dy
            s_xz[dst_i, dst_j] += dx * blk
            s_yz[dst_i, dst_j] += dy * blk

    var_x = s_xx - s_x * s_x / n_pix
    var_y = s_yy - s_y * s_y / n_pix
    gx = (s_xz - s_x * s_z / n_pix) / var_x
    gy = (s_yz - s_y * s_z / n_pix) / var_y

    norm = np.sqrt(gx * gx + gy * gy + 1.0)
    return NormalField(nx=-gx / norm, ny=-gy / norm, nz=1.0 / norm)


def degrade_scan(
    img: ScanImage, sigma_x: float, sigma_y: float, noise_std: float, seed: int
) -> ScanImage:
    """Anisotropic Gaussian blur then additive white noise, seed-deterministic.

    ``sigma_x`` blurs along image columns and ``sigma_y`` along rows, in
    pixels; reflect padding at the borders.
    """
    if sigma_x < 0 or sigma_y < 0 or noise_std < 0:
        raise ValueError("blur sigmas and noise_std must be non-negative")
    out = img.intensities
    if sigma_x > 0 or sigma_y > 0:
        out = ndimage.gaussian_filter(out, sigma=(sigma_y, sigma_x), mode="reflect")
    if noise_std > 0:
        rng = np.random.default_rng(seed)
        out = out + rng.normal(0.0, noise_std, out.shape)
    return ScanImage(
        intensities=out, orientation=img.orientation, pixel_pitch=img.pixel_pitch
    )
