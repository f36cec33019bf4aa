"""From opposed scans to a usable normal field.

Covers the opposed-scan difference estimator, recovery of the unknown
estimator gain by matching component spreads against a reference, upward
completion of the z-component, and the linear blur/deblur kernel estimators
that relate scanner norm maps to reference norm maps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import ndimage
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize, nnls

from .fields import ORIENTATIONS, NormMap, NormalField, ScanImage

DEFAULT_LAMBDA_GRID = tuple(np.logspace(-6.0, 2.0, 20))
SIGMA_FLOOR = 0.05  # px, lower bound for fitted Gaussian spreads


@dataclass(frozen=True)
class Kernel2D:
    """Small odd-sized convolution kernel, tagged blur or deblur."""

    coefficients: np.ndarray
    kind: str  # blur | deblur

    def __post_init__(self):
        k = np.asarray(self.coefficients, dtype=np.float64)
        if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] % 2 == 0:
            raise ValueError("kernel must be square with odd size")
        if self.kind == "blur":
            if np.min(k) < -1e-12:
                raise ValueError("blur kernels must be non-negative")
            k = np.maximum(k, 0.0)
        elif self.kind == "deblur":
            center = abs(k[k.shape[0] // 2, k.shape[1] // 2])
            if center + 1e-12 < np.max(np.abs(k)):
                raise ValueError("deblur kernels must have a dominant center")
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        object.__setattr__(self, "coefficients", k)

    @property
    def size(self) -> int:
        return self.coefficients.shape[0]


def estimate_normmap(scans: Iterable[ScanImage]) -> NormMap:
    """Difference of opposed acquisitions, one component per scan axis.

    The 90/180/270 images are rotated back into the 0-degree patch frame
    first; the y-component is the 0-minus-180 difference and the x-component
    the 90-minus-270 difference.  No deblurring is applied.
    """
    by_orient: dict[int, np.ndarray] = {}
    for scan in scans:
        if scan.orientation in by_orient:
            raise ValueError(f"duplicate orientation {scan.orientation}")
        by_orient[scan.orientation] = scan.aligned()
    missing = [d for d in ORIENTATIONS if d not in by_orient]
    if missing:
        raise ValueError(f"missing orientations: {missing}")
    shapes = {a.shape for a in by_orient.values()}
    if len(shapes) != 1:
        raise ValueError(f"aligned scans disagree in shape: {sorted(shapes)}")
    return NormMap(
        nx_scaled=by_orient[90] - by_orient[270],
        ny_scaled=by_orient[0] - by_orient[180],
        source="scanner",
    )


def estimate_alpha(sx_s: float, sy_s: float, sx_c: float, sy_c: float) -> float:
    """Least-squares gain relating scanner component spreads to reference ones.

    Both scan axes share one multiplicative constant, so the estimate blends
    the x and y spread ratios weighted by the reference spreads.
    """
    if min(sx_s, sy_s, sx_c, sy_c) <= 0:
        raise ValueError("component spreads must be positive")
    return (sx_s * sx_c + sy_s * sy_c) / (sx_c**2 + sy_c**2)


def complete_z(nm: NormMap, alpha: float) -> tuple[NormalField, int]:
    """Rescale a norm map by the estimated gain and complete the z-component.

    Pixels whose rescaled in-plane magnitude exceeds 1 are pulled back onto
    the unit circle with z clamped to 0; the number of clamped pixels is
    returned alongside the field.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    nx = nm.nx_scaled / alpha
    ny = nm.ny_scaled / alpha
    r2 = nx * nx + ny * ny
    clamped = r2 > 1.0
    n_clamped = int(np.count_nonzero(clamped))
    if n_clamped:
        scale = 1.0 / np.sqrt(r2[clamped])
        nx = nx.copy()
        ny = ny.copy()
        nx[clamped] *= scale
        ny[clamped] *= scale
        r2 = np.minimum(nx * nx + ny * ny, 1.0)
    nz = np.sqrt(np.maximum(1.0 - r2, 0.0))
    if n_clamped:
        nz[clamped] = 0.0
    return NormalField(nx=nx, ny=ny, nz=nz), n_clamped


def convolve_same(grid: np.ndarray, kernel: Kernel2D) -> np.ndarray:
    """2-D convolution preserving shape, reflect padding at the borders."""
    return ndimage.convolve(
        np.asarray(grid, dtype=np.float64), kernel.coefficients, mode="reflect"
    )


def _regression_system(src: np.ndarray, target: np.ndarray, size: int):
    """Row-per-pixel linear system target ~ kernel * src on the interior.

    Pixels within size//2 of the border are excluded so every row uses only
    in-bounds source values.  Returns the design matrix (n_rows, size**2)
    and the target vector.
    """
    src = np.asarray(src, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if src.shape != target.shape:
        raise ValueError("source and target grids must share one shape")
    if min(src.shape) < 50:
        raise ValueError("grids must be at least 50x50 for a stable kernel fit")
    if np.ptp(src) == 0.0:
        raise ValueError("source map is constant; kernel fit is singular")
    windows = np.lib.stride_tricks.sliding_window_view(src, (size, size))
    a = windows[:, :, ::-1, ::-1].reshape(-1, size * size)
    r = size // 2
    b = target[r:-r, r:-r].reshape(-1)
    return np.ascontiguousarray(a), b


class _FoldStats(NamedTuple):
    gram: np.ndarray
    moment: np.ndarray
    rows: np.ndarray
    targets: np.ndarray


def fit_deblur_filter(
    scanner_map: np.ndarray,
    reference_map: np.ndarray,
    size: int = 7,
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    folds: int = 10,
    rng_seed: int = 0,
) -> Kernel2D:
    """Ridge-regressed kernel mapping a blurred map onto its reference.

    The penalty weight is chosen by k-fold cross-validation over the grid,
    then relaxed to the largest weight whose CV error is within one standard
    error of the minimum, and the kernel is refit on all rows.  Deterministic
    for a fixed seed.
    """
    a, b = _regression_system(scanner_map, reference_map, size)
    n_rows, n_coef = a.shape

    order = np.random.default_rng(rng_seed).permutation(n_rows)
    bounds = np.linspace(0, n_rows, folds + 1).astype(int)
    fold_stats = []
    for f in range(folds):
        idx = order[bounds[f] : bounds[f + 1]]
        af = a[idx]
        fold_stats.append(_FoldStats(af.T @ af, af.T @ b[idx], af, b[idx]))
    gram = sum(fs.gram for fs in fold_stats)
    moment = sum(fs.moment for fs in fold_stats)

    lambdas = np.asarray(sorted(lambda_grid))
    cv_err = np.zeros((lambdas.size, folds))
    eye = np.eye(n_coef)
    for f, fs in enumerate(fold_stats):
        g_train = (gram - fs.gram) / (n_rows - fs.rows.shape[0])
        m_train = (moment - fs.moment) / (n_rows - fs.rows.shape[0])
        for li, lam in enumerate(lambdas):
            h = np.linalg.solve(g_train + lam * eye, m_train)
            resid = fs.rows @ h - fs.targets
            cv_err[li, f] = np.mean(resid * resid)
    mean_err = cv_err.mean(axis=1)
    if not np.all(np.isfinite(mean_err)):
        raise ValueError("singular regression system; is the source map constant?")
    best = int(np.argmin(mean_err))
    one_se = mean_err[best] + cv_err[best].std(ddof=1) / np.sqrt(folds)
    chosen = max(i for i in range(lambdas.size) if mean_err[i] <= one_se)

    h = np.linalg.solve(gram / n_rows + lambdas[chosen] * eye, moment / n_rows)
    return Kernel2D(coefficients=h.reshape(size, size), kind="deblur")


def fit_blur_filter_nnls(
    reference_map: np.ndarray, degraded_map: np.ndarray, size: int = 7
) -> Kernel2D:
    """Non-negative kernel mapping a reference map onto its degraded version.

    Solved through the Cholesky-compressed normal equations, which preserve
    the least-squares minimizer while keeping the active-set solve tiny.
    """
    a, b = _regression_system(reference_map, degraded_map, size)
    gram = a.T @ a
    moment = a.T @ b
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular regression system; is the reference map constant?") from exc
    z = solve_triangular(chol, moment, lower=True)
    coef, _ = nnls(chol.T, z)
    return Kernel2D(coefficients=coef.reshape(size, size), kind="blur")


class GaussianBlurFit(NamedTuple):
    """Separable Gaussian description of a blur kernel."""

    mu_x: float
    mu_y: float
    sigma_x: float
    sigma_y: float
    residual: float

    def kernel(self, size: int = 7) -> Kernel2D:
        return Kernel2D(
            coefficients=gaussian_kernel(
                self.mu_x, self.mu_y, self.sigma_x, self.sigma_y, size
            ),
            kind="blur",
        )


def gaussian_kernel(
    mu_x: float, mu_y: float, sigma_x: float, sigma_y: float, size: int = 7
) -> np.ndarray:
    """Separable bivariate Gaussian discretized on an odd grid, unit sum."""
    d = np.arange(size) - size // 2
    gx = np.exp(-0.5 * ((d - mu_x) / sigma_x) ** 2)
    gy = np.exp(-0.5 * ((d - mu_y) / sigma_y) ** 2)
    k = np.outer(gy, gx)
    return k / k.sum()


def fit_blur_gaussian(
    reference_map: np.ndarray,
    degraded_map: np.ndarray,
    restarts: int = 8,
    rng_seed: int = 0,
    size: int = 7,
) -> GaussianBlurFit:
    """Nonconvex least-squares fit of a separable Gaussian blur kernel.

    Each restart begins at unit spreads with the kernel center drawn
    uniformly from (-0.5, 0.5); the lowest-residual converged run wins.
    Raises if no restart converges, carrying the best attempt in the message.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    a, b = _regression_system(reference_map, degraded_map, size)
    gram = a.T @ a
    moment = a.T @ b
    offset = float(b @ b)

    def objective(theta):
        k = gaussian_kernel(*theta, size=size).ravel()
        return float(k @ gram @ k - 2.0 * (k @ moment) + offset)

    rng = np.random.default_rng(rng_seed)
    span = size // 2
    bounds = [(-span, span), (-span, span), (SIGMA_FLOOR, 2.0 * size), (SIGMA_FLOOR, 2.0 * size)]
    best = None
    converged = False
    for _ in range(restarts):
        x0 = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 1.0, 1.0])
        res = minimize(objective, x0, method="L-BFGS-B", bounds=bounds)
        if best is None or res.fun < best.fun:
            best = res
        converged = converged or res.success
    if not converged:
        raise RuntimeError(
            f"Gaussian blur fit failed to converge; best attempt {best.x} "
            f"with residual {best.fun:.3e}"
        )
    mu_x, mu_y, sigma_x, sigma_y = best.x
    return GaussianBlurFit(
        mu_x=float(mu_x),
        mu_y=float(mu_y),
        sigma_x=float(sigma_x),
        sigma_y=float(sigma_y),
        residual=float(best.fun),
    )


def sigma_from_kernel(kernel: Kernel2D) -> tuple[float, float]:
    """Spreads of a kernel via a least-squares fit of the discretized Gaussian."""
    k = kernel.coefficients
    size = k.shape[0]

    def objective(theta):
        diff = gaussian_kernel(*theta, size=size) - k
        return float(np.sum(diff * diff))

    span = size // 2
    res = minimize(
        objective,
        np.array([0.0, 0.0, 1.0, 1.0]),
        method="L-BFGS-B",
        bounds=[(-span, span), (-span, span), (SIGMA_FLOOR, 2.0 * size), (SIGMA_FLOOR, 2.0 * size)],
    )
    return float(res.x[2]), float(res.x[3])


def ridge_solution(
    scanner_map: np.ndarray, reference_map: np.ndarray, lam: float, size: int = 7
) -> np.ndarray:
    """Direct ridge solve at one penalty weight (no CV); mainly for oracles."""
    a, b = _regression_system(scanner_map, reference_map, size)
    n_rows, n_coef = a.shape
    h = cho_solve(
        cho_factor(a.T @ a / n_rows + lam * np.eye(n_coef)), a.T @ b / n_rows
    )
    return h.reshape(size, size)
