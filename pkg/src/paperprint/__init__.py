"""Paper-surface authentication toolkit: synthesis, scanner simulation,
microstructure estimation, feature extraction, and EER analysis."""

__version__ = "0.1.0"

from .fields import HeightMap, NormMap, NormalField, ScanImage
from .match import (
    EERReport,
    MatchStats,
    correlation,
    eer_gaussian,
    eer_laplace,
    empirical_eer,
    hypothesis_stats,
)
from .normmap import (
    Kernel2D,
    complete_z,
    convolve_same,
    estimate_alpha,
    estimate_normmap,
    fit_blur_filter_nnls,
    fit_blur_gaussian,
    fit_deblur_filter,
)
from .optics import ReflectanceParams, ScannerGeometry, predicted_difference, render_scan
from .reconstruct import SubbandStack, detrend, dog_decompose, feature_from_heightmap, integrate_surface
from .synth import FiberModelParams, degrade_scan, generate_surface, normals_from_heightmap

__all__ = [
    "__version__",
    "HeightMap",
    "NormMap",
    "NormalField",
    "ScanImage",
    "EERReport",
    "MatchStats",
    "correlation",
    "eer_gaussian",
    "eer_laplace",
    "empirical_eer",
    "hypothesis_stats",
    "Kernel2D",
    "complete_z",
    "convolve_same",
    "estimate_alpha",
    "estimate_normmap",
    "fit_blur_filter_nnls",
    "fit_blur_gaussian",
    "fit_deblur_filter",
    "ReflectanceParams",
    "ScannerGeometry",
    "predicted_difference",
    "render_scan",
    "SubbandStack",
    "detrend",
    "dog_decompose",
    "feature_from_heightmap",
    "integrate_surface",
    "FiberModelParams",
    "degrade_scan",
    "generate_surface",
    "normals_from_heightmap",
]
