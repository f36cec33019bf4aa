"""Flatbed-scanner light transport under a diffuse plus specular surface model.

A scanner lights each surface point with a thin linear source parallel to the
x-axis (offset o_y along the scan direction, o_z above the bed) and senses
only rays parallel to the yz-plane.  The perceived intensity at a point is
the superposition of the point-source reflection over the light segment.
Subtracting opposed acquisitions cancels the specular contribution when the
sensor direction has no x-component, leaving a signal proportional to the
in-plane normal components; :func:`predicted_difference` evaluates that
closed form and :func:`render_scan` produces the quadrature ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ORIENTATIONS, NormalField, ScanImage, PITCH_300PPI_UM

_PHI = np.deg2rad(10.0)
DEFAULT_SENSOR_DIR = (0.0, float(np.sin(_PHI)), float(np.cos(_PHI)))

# Cap on elements of one (pixels x nodes) quadrature block, ~32 MB of float64.
_CHUNK_BUDGET = 1 << 22


@dataclass(frozen=True)
class ReflectanceParams:
    """Weights of the diffuse and specular lobes and the gloss exponent."""

    diffuse_weight: float = 1.0
    specular_weight: float = 0.0
    gloss: float = 1.0

    def __post_init__(self):
        if self.diffuse_weight < 0 or self.specular_weight < 0:
            raise ValueError("reflectance weights must be non-negative")
        if self.diffuse_weight + self.specular_weight <= 0:
            raise ValueError("at least one reflectance weight must be positive")
        if not self.gloss > 0:
            raise ValueError("gloss exponent must be positive")


@dataclass(frozen=True)
class ScannerGeometry:
    """Linear-light extent and placement plus the sensor acceptance direction.

    Lengths are millimeters.  ``light_span_near`` is the half-extent a of the
    symmetric light segment [-a, a]; ``light_span_far`` is the far end b of
    the physical segment [-a, b], used only when integrating the full span.
    """

    light_span_near: float = 20.0
    light_span_far: float = 40.0
    light_offset_y: float = 2.0
    light_offset_z: float = 2.0
    sensor_dir: tuple[float, float, float] = DEFAULT_SENSOR_DIR
    light_strength: float = 1.0
    quadrature_steps: int = 1024

    def __post_init__(self):
        if not 0 < self.light_span_near <= self.light_span_far:
            raise ValueError("require 0 < light_span_near <= light_span_far")
        if not self.light_offset_z > 0:
            raise ValueError("light_offset_z must be positive")
        v = np.asarray(self.sensor_dir, dtype=np.float64)
        if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError("sensor_dir must be a unit 3-vector")
        if self.quadrature_steps < 2 or self.quadrature_steps % 2:
            raise ValueError("quadrature_steps must be an even integer >= 2")
        object.__setattr__(self, "sensor_dir", (float(v[0]), float(v[1]), float(v[2])))

    @property
    def scanner_faithful(self) -> bool:
        """True when the sensor accepts only rays parallel to the yz-plane."""
        return self.sensor_dir[0] == 0.0

    def quadrature(self, include_far_segment: bool = False):
        """Simpson nodes along the light segment and their weights."""
        lo = -self.light_span_near
        hi = self.light_span_far if include_far_segment else self.light_span_near
        x = np.linspace(lo, hi, self.quadrature_steps + 1)
        h = (hi - lo) / self.quadrature_steps
        w = np.full(x.size, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        return x, w * (h / 3.0)


def _check_unit(v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != 3:
        raise ValueError(f"{name} must have 3 components")
    if np.max(np.abs(np.sum(v * v, axis=-1) - 1.0)) > 1e-9:
        raise ValueError(f"{name} must be unit length")
    return v


def reflect_point(
    normal,
    light_point,
    sensor_dir,
    params: ReflectanceParams,
    light_strength: float = 1.0,
    distance_sq: float | None = None,
) -> float:
    """Intensity reflected from a point light toward the sensor direction.

    The surface point sits at the origin; the inverse-square falloff uses the
    light distance unless ``distance_sq`` overrides it.  The diffuse dot is
    clamped at zero; the specular dot is not, so the opposed-scan difference
    stays linear in the normal components when the gloss exponent is 1.
    """
    n = _check_unit(normal, "normal")
    v_c = _check_unit(sensor_dir, "sensor_dir")
    o = np.asarray(light_point, dtype=np.float64)
    d2 = float(o @ o)
    if d2 == 0.0:
        raise ValueError("light_point must not coincide with the surface point")
    v_i = o / np.sqrt(d2)
    if distance_sq is None:
        distance_sq = d2
    diffuse = max(float(n @ v_i), 0.0)
    # v_r = (2 n n^T - I) v_i, folded into dot products
    spec_dot = 2.0 * float(n @ v_i) * float(n @ v_c) - float(v_c @ v_i)
    specular = spec_dot if params.gloss == 1.0 else float(spec_dot) ** params.gloss
    return (light_strength / distance_sq) * (
        params.diffuse_weight * diffuse + params.specular_weight * specular
    )


def line_integral_intensity(
    normal,
    geometry: ScannerGeometry,
    params: ReflectanceParams,
    include_far_segment: bool = False,
):
    """Intensity under the linear light, integrated along its extent.

    ``normal`` may be a single 3-vector or an array of shape (..., 3); the
    result matches the leading shape.  Composite Simpson quadrature over the
    light's x-extent.
    """
    n = _check_unit(normal, "normal")
    scalar_input = n.ndim == 1
    pts = n.reshape(-1, 3)

    ox, wts = geometry.quadrature(include_far_segment)
    oy, oz = geometry.light_offset_y, geometry.light_offset_z
    d2 = ox * ox + oy * oy + oz * oz
    inv_d = 1.0 / np.sqrt(d2)
    v_i = np.stack([ox, np.full_like(ox, oy), np.full_like(ox, oz)], axis=1)
    v_i *= inv_d[:, None]
    v_c = np.asarray(geometry.sensor_dir)
    cdotv = v_i @ v_c
    inv_d2 = 1.0 / d2

    out = np.empty(pts.shape[0])
    chunk = max(1, _CHUNK_BUDGET // ox.size)
    for lo in range(0, pts.shape[0], chunk):
        blk = pts[lo : lo + chunk]
        ndotv = blk @ v_i.T
        ndotc = blk @ v_c
        integrand = params.diffuse_weight * np.maximum(ndotv, 0.0)
        if params.specular_weight:
            spec = 2.0 * ndotv * ndotc[:, None] - cdotv[None, :]
            if params.gloss != 1.0:
                spec = np.power(spec, params.gloss)
            integrand += params.specular_weight * spec
        integrand *= inv_d2[None, :]
        out[lo : lo + chunk] = integrand @ wts
    out *= geometry.light_strength

    if scalar_input:
        return float(out[0])
    return out.reshape(n.shape[:-1])


def segment_moment(geometry: ScannerGeometry) -> float:
    """Quadrature of the inverse-cubed light distance over the symmetric span."""
    ox, wts = geometry.quadrature()
    d2 = ox * ox + geometry.light_offset_y**2 + geometry.light_offset_z**2
    return float(wts @ d2**-1.5)


def difference_gains(
    geometry: ScannerGeometry, params: ReflectanceParams
) -> tuple[float, float]:
    """Diffuse and specular gain constants of the opposed-scan difference."""
    q = segment_moment(geometry)
    base = 2.0 * geometry.light_strength * geometry.light_offset_y * q
    return params.diffuse_weight * base, params.specular_weight * base


def predicted_difference(
    normal,
    geometry: ScannerGeometry,
    params: ReflectanceParams,
    vertical_normal_approx: bool = False,
):
    """Closed-form 0-minus-180-degree intensity difference for a normal.

    Valid only for scanner-faithful geometry (sensor x-component zero) and
    gloss exponent 1; both terms of the light integral then reduce to odd and
    even parts, and the difference is proportional to the y-component of the
    normal.  With ``vertical_normal_approx`` the z-component is replaced by 1,
    which makes the specular gain a constant shared by all pixels.
    """
    if not geometry.scanner_faithful:
        raise ValueError(
            "closed form requires a scanner-faithful geometry (sensor_dir[0] == 0); "
            "render and subtract instead"
        )
    if params.gloss != 1.0:
        raise ValueError("closed form requires gloss exponent 1")
    n = _check_unit(normal, "normal")
    s_d, s_s = difference_gains(geometry, params)
    _, vcy, vcz = geometry.sensor_dir
    tilt = vcz + vcy * geometry.light_offset_z / geometry.light_offset_y
    ny = n[..., 1]
    nz = 1.0 if vertical_normal_approx else n[..., 2]
    out = (s_d + 2.0 * s_s * tilt * nz) * ny
    return float(out) if n.ndim == 1 else out


def render_scan(
    normals: NormalField,
    geometry: ScannerGeometry,
    params: ReflectanceParams,
    orientation: int,
    pixel_pitch: float = PITCH_300PPI_UM,
) -> ScanImage:
    """Simulate one acquisition of a patch laid at the given orientation.

    The patch grid is rotated on the bed and every normal is rotated with it,
    then each pixel is evaluated independently under the linear light.
    """
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}")
    rotated = normals.rotated(orientation)
    stacked = np.stack([rotated.nx, rotated.ny, rotated.nz], axis=-1)
    img = line_integral_intensity(stacked, geometry, params)
    return ScanImage(intensities=img, orientation=orientation, pixel_pitch=pixel_pitch)
