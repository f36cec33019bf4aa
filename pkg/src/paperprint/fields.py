"""Grid-shaped data carriers shared across the pipeline.

Conventions: grids are 2-D float64 arrays indexed [row, col]; the column axis
is x and the row axis is y.  Patch orientations are physical counterclockwise
rotations on the scanner bed, restricted to 0/90/180/270 degrees.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORIENTATIONS = (0, 90, 180, 270)

#: Pixel pitch of a 300 ppi scan, in micrometers per pixel.
PITCH_300PPI_UM = 25400.0 / 300.0


def _as_grid(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D grid, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("grid contains non-finite values")
    return arr


def rotate_grid(grid: np.ndarray, degrees: int) -> np.ndarray:
    """Spatially rotate a grid by a quarter-turn multiple (patch rotated CCW)."""
    if degrees % 90 != 0:
        raise ValueError(f"orientation must be a multiple of 90, got {degrees}")
    return np.rot90(grid, -(degrees // 90) % 4)


def unrotate_grid(grid: np.ndarray, degrees: int) -> np.ndarray:
    """Inverse of :func:`rotate_grid`: map a rotated acquisition back to 0 deg."""
    return np.rot90(grid, (degrees // 90) % 4)


@dataclass(frozen=True)
class HeightMap:
    """Surface elevation grid in micrometers with square pixels."""

    heights: np.ndarray
    pixel_pitch: float  # micrometers per pixel

    def __post_init__(self):
        object.__setattr__(self, "heights", _as_grid(self.heights))
        if not self.pixel_pitch > 0:
            raise ValueError("pixel_pitch must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.heights.shape


@dataclass(frozen=True)
class NormalField:
    """Per-pixel unit surface normals with upward z-components."""

    nx: np.ndarray
    ny: np.ndarray
    nz: np.ndarray

    def __post_init__(self):
        nx, ny, nz = map(_as_grid, (self.nx, self.ny, self.nz))
        if not (nx.shape == ny.shape == nz.shape):
            raise ValueError("normal components must share one shape")
        norms = nx * nx + ny * ny + nz * nz
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ValueError("normals must have unit length")
        if np.min(nz) < 0:
            raise ValueError("normals must point upward (nz >= 0)")
        object.__setattr__(self, "nx", nx)
        object.__setattr__(self, "ny", ny)
        object.__setattr__(self, "nz", nz)

    @property
    def shape(self) -> tuple[int, int]:
        return self.nx.shape

    def rotated(self, degrees: int) -> "NormalField":
        """Rotate the patch: grid layout and vector components together.

        Quarter turns use exact sign swaps so repeated rotation is bit-exact.
        """
        gx = rotate_grid(self.nx, degrees)
        gy = rotate_grid(self.ny, degrees)
        gz = rotate_grid(self.nz, degrees)
        k = (degrees // 90) % 4
        if k == 0:
            nx, ny = gx, gy
        elif k == 1:
            nx, ny = -gy, gx
        elif k == 2:
            nx, ny = -gx, -gy
        else:
            nx, ny = gy, -gx
        return NormalField(nx=nx, ny=ny, nz=gz)


def normal_field_from_components(nx, ny, clip: bool = False) -> NormalField:
    """Build a unit field from in-plane components, completing z upward.

    With ``clip`` the in-plane magnitude is scaled back onto the unit circle
    wherever it exceeds 1 (z clamps to 0) instead of raising.
    """
    nx = _as_grid(nx)
    ny = _as_grid(ny)
    r2 = nx * nx + ny * ny
    over = r2 > 1.0
    if clip:
        if np.any(over):
            scale = 1.0 / np.sqrt(r2[over])
            nx = nx.copy()
            ny = ny.copy()
            nx[over] *= scale
            ny[over] *= scale
            r2 = np.minimum(nx * nx + ny * ny, 1.0)
    elif np.any(over):
        raise ValueError("in-plane components exceed unit length")
    nz = np.sqrt(np.maximum(1.0 - r2, 0.0))
    if clip and np.any(over):
        nz[over] = 0.0
    return NormalField(nx=nx, ny=ny, nz=nz)


@dataclass(frozen=True)
class ScanImage:
    """Simulated scanner acquisition tagged with its bed orientation."""

    intensities: np.ndarray
    orientation: int
    pixel_pitch: float = PITCH_300PPI_UM

    def __post_init__(self):
        object.__setattr__(self, "intensities", _as_grid(self.intensities))
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {ORIENTATIONS}")
        if not self.pixel_pitch > 0:
            raise ValueError("pixel_pitch must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.intensities.shape

    def aligned(self) -> np.ndarray:
        """Intensities mapped back into the 0-degree patch frame."""
        return unrotate_grid(self.intensities, self.orientation)


@dataclass(frozen=True)
class NormMap:
    """Scaled in-plane normal components estimated from opposed scans."""

    nx_scaled: np.ndarray
    ny_scaled: np.ndarray
    source: str = "scanner"  # scanner | confocal | deblurred

    def __post_init__(self):
        nx = _as_grid(self.nx_scaled)
        ny = _as_grid(self.ny_scaled)
        if nx.shape != ny.shape:
            raise ValueError("norm map components must share one shape")
        if self.source not in ("scanner", "confocal", "deblurred"):
            raise ValueError(f"unknown norm map source {self.source!r}")
        object.__setattr__(self, "nx_scaled", nx)
        object.__setattr__(self, "ny_scaled", ny)

    @property
    def shape(self) -> tuple[int, int]:
        return self.nx_scaled.shape

    def component_stds(self) -> tuple[float, float]:
        return float(np.std(self.nx_scaled)), float(np.std(self.ny_scaled))
