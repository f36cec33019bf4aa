"""Printed registration target: rendering, detection, and rectification.

The target is a square authentication patch bounded by four long guide
lines, with a circle printed around each line intersection and a QR-sized
block of machine texture to the side (its payload is carried out of band).
Detection finds the guide lines with a Hough accumulator, intersects them,
and refines each corner to subpixel accuracy using the ink centroid inside
the surrounding circle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

Point = tuple[float, float]


class NoFiducialError(RuntimeError):
    """Raised when too few guide lines are found to locate the target."""


class AmbiguousFiducialError(RuntimeError):
    """Raised when detected lines do not resolve into two clean families."""


def homography_from_points(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Projective 3x3 transform mapping four source points to four targets."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != (4, 2) or dst.shape != (4, 2):
        raise ValueError("need exactly four 2-D point pairs")
    rows = []
    rhs = []
    for (x, y), (u, v) in zip(src, dst):
        rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y])
        rows.append([0, 0, 0, x, y, 1, -v * x, -v * y])
        rhs.extend([u, v])
    try:
        sol = np.linalg.solve(np.asarray(rows), np.asarray(rhs))
    except np.linalg.LinAlgError as exc:
        raise ValueError("degenerate point configuration") from exc
    return np.append(sol, 1.0).reshape(3, 3)


def apply_homography(transform: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Apply a 3x3 projective transform to an (n, 2) point array."""
    pts = np.asarray(points, dtype=np.float64)
    ones = np.ones((pts.shape[0], 1))
    mapped = np.hstack([pts, ones]) @ np.asarray(transform).T
    w = mapped[:, 2:3]
    if np.any(np.abs(w) < 1e-12):
        raise ValueError("transform sends points to infinity")
    return mapped[:, :2] / w


@dataclass(frozen=True)
class CornerSet:
    """Four subpixel corner locations, convex and consistently wound."""

    points: np.ndarray  # shape (4, 2), ordered around the square

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (4, 2):
            raise ValueError("corner set must hold four 2-D points")
        crosses = []
        for i in range(4):
            a = pts[(i + 1) % 4] - pts[i]
            b = pts[(i + 2) % 4] - pts[(i + 1) % 4]
            crosses.append(a[0] * b[1] - a[1] * b[0])
        crosses = np.asarray(crosses)
        if np.any(crosses == 0) or not (np.all(crosses > 0) or np.all(crosses < 0)):
            raise ValueError("corners must form a convex, consistently wound quad")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class FiducialLayout:
    """Geometry of the printed target in layout pixel coordinates."""

    patch_square: np.ndarray  # (4, 2) corners, ordered
    guide_lines: tuple[tuple[Point, Point], ...]
    circles: tuple[tuple[Point, float], ...]
    qr_region: tuple[float, float, float, float]  # x0, y0, x1, y1

    def __post_init__(self):
        square = np.asarray(self.patch_square, dtype=np.float64)
        if square.shape != (4, 2):
            raise ValueError("patch_square must hold four corners")
        object.__setattr__(self, "patch_square", square)
        intersections = _segment_intersections(self.guide_lines)
        for center, _radius in self.circles:
            d = np.min(np.linalg.norm(intersections - np.asarray(center), axis=1))
            if d > 0.5:
                raise ValueError("every circle must sit on a guide-line intersection")
        for corner in square:
            d = np.min(np.linalg.norm(intersections - corner, axis=1))
            if d > 0.5:
                raise ValueError("patch corners must sit on guide-line intersections")

    @property
    def circle_radius(self) -> float:
        return float(self.circles[0][1])


def _line_params(seg: tuple[Point, Point]) -> tuple[float, float, float]:
    """Implicit a*x + b*y = c with unit (a, b) for a segment's carrier line."""
    (x0, y0), (x1, y1) = seg
    a, b = y1 - y0, -(x1 - x0)
    norm = float(np.hypot(a, b))
    if norm == 0:
        raise ValueError("degenerate segment")
    return a / norm, b / norm, (a * x0 + b * y0) / norm


def _intersect(l1, l2) -> np.ndarray | None:
    a1, b1, c1 = l1
    a2, b2, c2 = l2
    det = a1 * b2 - a2 * b1
    if abs(det) < 1e-9:
        return None
    return np.array([(c1 * b2 - c2 * b1) / det, (a1 * c2 - a2 * c1) / det])


def _segment_intersections(segments) -> np.ndarray:
    lines = [_line_params(s) for s in segments]
    pts = []
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            p = _intersect(lines[i], lines[j])
            if p is not None:
                pts.append(p)
    if not pts:
        raise ValueError("guide lines have no intersections")
    return np.asarray(pts)


def default_layout(
    size: int = 280,
    margin: float = 40.0,
    patch_px: float = 160.0,
    circle_radius: float = 9.0,
    overhang: float = 24.0,
) -> FiducialLayout:
    """Square patch bounded by four guide lines, circles on the corners,
    and a QR-sized texture block to the right of the patch."""
    lo = margin
    hi = margin + patch_px
    corners = np.array([[lo, lo], [hi, lo], [hi, hi], [lo, lo + patch_px]])
    corners[3] = [lo, hi]
    lines = (
        ((lo - overhang, lo), (hi + overhang, lo)),
        ((lo - overhang, hi), (hi + overhang, hi)),
        ((lo, lo - overhang), (lo, hi + overhang)),
        ((hi, lo - overhang), (hi, hi + overhang)),
    )
    circles = tuple((tuple(c), circle_radius) for c in corners.tolist())
    qr0 = hi + overhang / 2.0
    qr_region = (qr0, lo + patch_px * 0.3, min(qr0 + 52.0, size - 4.0), lo + patch_px * 0.3 + 52.0)
    return FiducialLayout(
        patch_square=corners, guide_lines=lines, circles=circles, qr_region=qr_region
    )


def layout_from_config(config: dict) -> FiducialLayout:
    """Build a layout from a declarative description in millimeters.

    Required keys: ``px_per_mm``, ``patch_mm``; optional: ``margin_mm``,
    ``circle_radius_mm``, ``overhang_mm``.  All geometry is converted to
    layout pixels through the single ``px_per_mm`` mapping.
    """
    try:
        scale = float(config["px_per_mm"])
        patch_mm = float(config["patch_mm"])
    except KeyError as exc:
        raise ValueError(f"layout config missing key {exc}") from exc
    if scale <= 0 or patch_mm <= 0:
        raise ValueError("px_per_mm and patch_mm must be positive")
    margin_mm = float(config.get("margin_mm", 3.5))
    radius_mm = float(config.get("circle_radius_mm", 0.75))
    overhang_mm = float(config.get("overhang_mm", 2.0))
    patch_px = patch_mm * scale
    size = int(np.ceil((patch_mm + 2 * margin_mm + overhang_mm) * scale)) + 40
    return default_layout(
        size=size,
        margin=margin_mm * scale,
        patch_px=patch_px,
        circle_radius=radius_mm * scale,
        overhang=overhang_mm * scale,
    )


def _segment_distance(px, py, seg) -> np.ndarray:
    (x0, y0), (x1, y1) = seg
    dx, dy = x1 - x0, y1 - y0
    length2 = dx * dx + dy * dy
    t = ((px - x0) * dx + (py - y0) * dy) / length2
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(px - (x0 + t * dx), py - (y0 + t * dy))


def render_fiducial(
    layout: FiducialLayout,
    transform: np.ndarray,
    size: int,
    blur_sigma: float = 0.6,
    noise_std: float = 0.01,
    seed: int = 0,
    line_width: float = 2.0,
    ring_width: float = 2.0,
) -> np.ndarray:
    """Render the warped target on a light background, then degrade it.

    ``transform`` maps layout coordinates to image coordinates; rendering
    samples the layout ink through its inverse, which anti-aliases edges
    with a one-pixel coverage ramp.  Background is 1.0, full ink is 0.0.
    """
    transform = np.asarray(transform, dtype=np.float64)
    if transform.shape != (3, 3) or abs(np.linalg.det(transform)) < 1e-9:
        raise ValueError("transform must be an invertible 3x3 matrix")
    inv = np.linalg.inv(transform)

    jj, ii = np.meshgrid(np.arange(size), np.arange(size))
    pix = np.stack([jj.ravel(), ii.ravel()], axis=1).astype(np.float64)
    src = apply_homography(inv, pix)
    px = src[:, 0].reshape(size, size)
    py = src[:, 1].reshape(size, size)

    ink = np.zeros((size, size))
    half = line_width / 2.0
    for seg in layout.guide_lines:
        cover = np.clip(half + 0.5 - _segment_distance(px, py, seg), 0.0, 1.0)
        np.maximum(ink, cover, out=ink)
    for center, radius in layout.circles:
        d = np.hypot(px - center[0], py - center[1])
        cover = np.clip(ring_width / 2.0 + 0.5 - np.abs(d - radius), 0.0, 1.0)
        np.maximum(ink, cover, out=ink)

    rng = np.random.default_rng(seed)
    # Paper texture inside the patch: faint speckle, far lighter than ink.
    sq = layout.patch_square
    inside = (
        (px >= sq[:, 0].min()) & (px <= sq[:, 0].max())
        & (py >= sq[:, 1].min()) & (py <= sq[:, 1].max())
    )
    tex_cells = 8.0
    tex = rng.uniform(0.0, 0.3, (64, 64))
    ti = np.clip((py / tex_cells).astype(int) % 64, 0, 63)
    tj = np.clip((px / tex_cells).astype(int) % 64, 0, 63)
    np.maximum(ink, np.where(inside, tex[ti, tj], 0.0), out=ink)

    # QR block: dark/light modules, payload meaningless here.
    x0, y0, x1, y1 = layout.qr_region
    modules = rng.integers(0, 2, (16, 16)).astype(float)
    in_qr = (px >= x0) & (px < x1) & (py >= y0) & (py < y1)
    mi = np.clip(((py - y0) / (y1 - y0) * 16).astype(int), 0, 15)
    mj = np.clip(((px - x0) / (x1 - x0) * 16).astype(int), 0, 15)
    np.maximum(ink, np.where(in_qr, modules[mi, mj] * 0.95, 0.0), out=ink)

    img = 1.0 - ink
    if blur_sigma > 0:
        img = ndimage.gaussian_filter(img, blur_sigma, mode="reflect")
    if noise_std > 0:
        img = img + rng.normal(0.0, noise_std, img.shape)
    return img


def _hough_lines(mask: np.ndarray, n_angles: int = 180, peak_frac: float = 0.6):
    """Return (rho, theta) peaks of a straight-line Hough accumulator."""
    ys, xs = np.nonzero(mask)
    if xs.size == 0:
        return []
    thetas = np.deg2rad(np.arange(n_angles))
    diag = int(np.ceil(np.hypot(*mask.shape)))
    rho = xs[:, None] * np.cos(thetas) + ys[:, None] * np.sin(thetas)
    rho_idx = np.round(rho).astype(int) + diag
    acc = np.zeros((2 * diag + 1, n_angles))
    for t in range(n_angles):
        acc[:, t] = np.bincount(rho_idx[:, t], minlength=2 * diag + 1)

    peaks = []
    threshold = peak_frac * acc.max()
    work = acc.copy()
    while len(peaks) < 12:
        flat = int(np.argmax(work))
        ri, ti = np.unravel_index(flat, work.shape)
        if work[ri, ti] < threshold:
            break
        peaks.append((float(ri - diag), float(thetas[ti])))
        r0, r1 = max(0, ri - 10), ri + 11
        for dt in range(-6, 7):
            work[r0:r1, (ti + dt) % n_angles] = 0.0
    return peaks


def _line_family_angle(theta: float) -> float:
    """Fold a Hough angle onto [0, pi) treating opposite normals as equal."""
    return theta % np.pi


def detect_fiducial(img: np.ndarray, circle_radius: float = 9.0) -> CornerSet:
    """Locate the four patch corners in a rendered target.

    Guide lines come from a Hough accumulator (1-degree, 1-pixel bins, peaks
    at 60 percent of the maximum); the two strongest lines of each of the two
    perpendicular families are intersected, and each intersection is refined
    by iterating the ink-weighted centroid inside a window of 1.5 times the
    circle radius.
    """
    img = np.asarray(img, dtype=np.float64)
    darkness = 1.0 - img
    peak = darkness.max()
    if peak <= 0.2:
        raise NoFiducialError("image has no dark features")
    mask = darkness > 0.55 * peak

    peaks = _hough_lines(mask)
    if len(peaks) < 4:
        raise NoFiducialError(f"found only {len(peaks)} candidate lines")

    ref = _line_family_angle(peaks[0][1])
    fam_a, fam_b = [], []
    for rho, theta in peaks:
        delta = (_line_family_angle(theta) - ref + np.pi / 2) % np.pi - np.pi / 2
        if abs(delta) < np.deg2rad(25):
            fam_a.append((rho, theta))
        else:
            off = (_line_family_angle(theta) - ref) % np.pi
            if abs(off - np.pi / 2) < np.deg2rad(25):
                fam_b.append((rho, theta))
    if len(fam_a) < 2 or len(fam_b) < 2:
        raise AmbiguousFiducialError(
            f"line families of sizes {len(fam_a)} and {len(fam_b)}"
        )
    fam_a, fam_b = fam_a[:2], fam_b[:2]

    corners = []
    for rho_a, th_a in fam_a:
        for rho_b, th_b in fam_b:
            det = np.cos(th_a) * np.sin(th_b) - np.cos(th_b) * np.sin(th_a)
            if abs(det) < 1e-9:
                raise AmbiguousFiducialError("parallel lines across families")
            x = (rho_a * np.sin(th_b) - rho_b * np.sin(th_a)) / det
            y = (rho_b * np.cos(th_a) - rho_a * np.cos(th_b)) / det
            corners.append((x, y))
    corners = np.asarray(corners)

    corners = np.asarray(
        [_refine_corner(darkness, c, circle_radius) for c in corners]
    )
    # Order consistently: by angle around the centroid.
    center = corners.mean(axis=0)
    order = np.argsort(np.arctan2(corners[:, 1] - center[1], corners[:, 0] - center[0]))
    return CornerSet(points=corners[order])


def _refine_corner(
    darkness: np.ndarray, estimate, circle_radius: float, iterations: int = 3
) -> np.ndarray:
    """Ink-weighted centroid inside a window of 1.5x the circle radius."""
    h, w = darkness.shape
    window = 1.5 * circle_radius
    c = np.asarray(estimate, dtype=np.float64)
    for _ in range(iterations):
        x0 = max(0, int(np.floor(c[0] - window)))
        x1 = min(w, int(np.ceil(c[0] + window)) + 1)
        y0 = max(0, int(np.floor(c[1] - window)))
        y1 = min(h, int(np.ceil(c[1] + window)) + 1)
        if x1 <= x0 or y1 <= y0:
            return c
        sub = darkness[y0:y1, x0:x1]
        yy, xx = np.mgrid[y0:y1, x0:x1]
        dist = np.hypot(xx - c[0], yy - c[1])
        weights = np.where(dist <= window, np.maximum(sub - 0.45, 0.0), 0.0)
        total = weights.sum()
        if total <= 0:
            return c
        c = np.array([(weights * xx).sum() / total, (weights * yy).sum() / total])
    return c


def rectify(img: np.ndarray, corners: CornerSet, out_size: int) -> np.ndarray:
    """Projective warp sending the corner quad onto an axis-aligned square.

    Bilinear resampling; source coordinates outside the image clamp to the
    border.  Corners already axis-aligned at the output size reproduce the
    input region exactly.
    """
    img = np.asarray(img, dtype=np.float64)
    s = float(out_size - 1)
    dst = np.array([[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]])
    transform = homography_from_points(dst, corners.points)

    jj, ii = np.meshgrid(np.arange(out_size), np.arange(out_size))
    pts = np.stack([jj.ravel(), ii.ravel()], axis=1).astype(np.float64)
    src = apply_homography(transform, pts)
    x = np.clip(src[:, 0], 0.0, img.shape[1] - 1.0)
    y = np.clip(src[:, 1], 0.0, img.shape[0] - 1.0)

    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    x1 = np.minimum(x0 + 1, img.shape[1] - 1)
    y1 = np.minimum(y0 + 1, img.shape[0] - 1)
    fx = x - x0
    fy = y - y0
    vals = (
        img[y0, x0] * (1 - fx) * (1 - fy)
        + img[y0, x1] * fx * (1 - fy)
        + img[y1, x0] * (1 - fx) * fy
        + img[y1, x1] * fx * fy
    )
    return vals.reshape(out_size, out_size)


def perturb_corners(corners: CornerSet, level: float, seed: int) -> CornerSet:
    """Add i.i.d. Gaussian offsets of the given standard deviation (px)."""
    if level < 0:
        raise ValueError("perturbation level must be non-negative")
    rng = np.random.default_rng(seed)
    noisy = corners.points + rng.normal(0.0, level, (4, 2)) if level > 0 else corners.points.copy()
    return CornerSet(points=noisy)
