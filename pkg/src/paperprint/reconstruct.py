"""Heightmap reconstruction and the feature chain built on it.

A normal field is integrated to the least-squares-closest surface, the
macroscopic warp is removed by subtracting a heavy Gaussian blur, and a
difference-of-Gaussians stack splits the result into spatial-frequency
subbands used as authentication features.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.fft import dctn, idctn

from .fields import HeightMap, NormalField, PITCH_300PPI_UM
from .synth import normals_from_heightmap

DOG_LEVELS = 10
DOG_SIGMA = 1.6
TREND_SIGMA_PX = 25.0
MAX_SLOPE = 10.0

FEATURE_KINDS = ("heightmap", "detrended", "norm_map_x", "norm_map_y", "subband")
_SUBBAND_RE = re.compile(r"^subband([1-9]\d*)$")


def gaussian_blur(grid: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, reflect padding, kernel truncated at 4 sigma."""
    grid = np.asarray(grid, dtype=np.float64)
    if sigma <= 0:
        return grid.copy()
    return ndimage.gaussian_filter(grid, sigma, mode="reflect", truncate=4.0)


def integrate_surface(
    nf: NormalField,
    pixel_pitch: float = PITCH_300PPI_UM,
    max_slope: float = MAX_SLOPE,
    method: str = "dct-least-squares",
) -> HeightMap:
    """Heightmap whose gradient field best matches the normals, least squares.

    The per-pixel slopes are the in-plane components divided by the upward
    component (capped at ``max_slope`` so clamped flat-z pixels stay finite),
    averaged onto cell edges; the resulting normal equations are a Neumann
    Poisson system solved exactly by cosine transforms.  The integration
    constant is fixed by mean-centering.  ``method`` exists as a hook for
    alternative integrators; only the transform solver ships.
    """
    if method != "dct-least-squares":
        raise ValueError(f"unknown integration method {method!r}")
    nz = np.maximum(nf.nz, 1e-12)
    p = np.clip(-nf.nx / nz, -max_slope, max_slope)
    q = np.clip(-nf.ny / nz, -max_slope, max_slope)

    gx = 0.5 * (p[:, :-1] + p[:, 1:]) * pixel_pitch
    gy = 0.5 * (q[:-1, :] + q[1:, :]) * pixel_pitch

    rhs = np.zeros(nf.shape)
    rhs[:, 1:] += gx
    rhs[:, :-1] -= gx
    rhs[1:, :] += gy
    rhs[:-1, :] -= gy

    rows, cols = nf.shape
    lam_y = 4.0 * np.sin(0.5 * np.pi * np.arange(rows) / rows) ** 2
    lam_x = 4.0 * np.sin(0.5 * np.pi * np.arange(cols) / cols) ** 2
    denom = lam_y[:, None] + lam_x[None, :]
    denom[0, 0] = 1.0

    spectrum = dctn(rhs, type=2, norm="ortho")
    spectrum[0, 0] = 0.0
    heights = idctn(spectrum / denom, type=2, norm="ortho")
    heights -= heights.mean()
    return HeightMap(heights=heights, pixel_pitch=pixel_pitch)


def detrend(hm: HeightMap, trend_sigma: float = TREND_SIGMA_PX) -> HeightMap:
    """Remove the macroscopic warp: subtract a heavy Gaussian blur."""
    if not trend_sigma > 0:
        raise ValueError("trend_sigma must be positive")
    flat = hm.heights - gaussian_blur(hm.heights, trend_sigma)
    return HeightMap(heights=flat, pixel_pitch=hm.pixel_pitch)


@dataclass(frozen=True)
class SubbandStack:
    """Difference-of-Gaussians decomposition; level 1 holds the finest detail."""

    levels: tuple[np.ndarray, ...]
    dog_base_sigma: float

    def __post_init__(self):
        if len(self.levels) < 2:
            raise ValueError("need at least two levels")
        if not self.dog_base_sigma > 1.0:
            raise ValueError("dog_base_sigma must exceed 1")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def level(self, index: int) -> np.ndarray:
        """1-based subband accessor."""
        if not 1 <= index <= len(self.levels):
            raise ValueError(f"subband index must be in 1..{len(self.levels)}")
        return self.levels[index - 1]

    def recompose(self) -> np.ndarray:
        return np.sum(self.levels, axis=0)


def dog_decompose(
    grid: np.ndarray, n_levels: int = DOG_LEVELS, sigma: float = DOG_SIGMA
) -> SubbandStack:
    """Split a grid into subbands by differencing a Gaussian blur ladder.

    Blur scales grow geometrically (sigma, sigma^2, ...); the last level is
    the residual coarsest blur, so the stack sums back to the input exactly.
    """
    if n_levels < 2:
        raise ValueError("n_levels must be >= 2")
    if not sigma > 1.0:
        raise ValueError("sigma must exceed 1")
    grid = np.asarray(grid, dtype=np.float64)
    blurred = [grid]
    for level in range(1, n_levels):
        blurred.append(gaussian_blur(grid, sigma**level))
    levels = [blurred[k] - blurred[k + 1] for k in range(n_levels - 1)]
    levels.append(blurred[-1])
    return SubbandStack(levels=tuple(levels), dog_base_sigma=sigma)


def parse_feature_kind(kind: str) -> tuple[str, int | None]:
    """Validate a feature name, returning (family, subband index or None)."""
    if kind in ("heightmap", "detrended", "norm_map_x", "norm_map_y"):
        return kind, None
    m = _SUBBAND_RE.match(kind)
    if m:
        index = int(m.group(1))
        if index > DOG_LEVELS:
            raise ValueError(f"subband index must be in 1..{DOG_LEVELS}")
        return "subband", index
    raise ValueError(f"unknown feature kind {kind!r}")


def feature_from_heightmap(hm: HeightMap, kind: str) -> np.ndarray:
    """Dispatch a heightmap through the transform chain named by ``kind``.

    Kinds: ``heightmap`` (pass-through), ``detrended``, ``norm_map_x`` /
    ``norm_map_y`` (plane-fit normal components), and ``subband<n>``.
    """
    family, index = parse_feature_kind(kind)
    if family == "heightmap":
        return hm.heights.copy()
    if family == "detrended":
        return detrend(hm).heights
    if family in ("norm_map_x", "norm_map_y"):
        nf = normals_from_heightmap(hm)
        return nf.nx.copy() if family == "norm_map_x" else nf.ny.copy()
    return dog_decompose(hm.heights).level(index).copy()
