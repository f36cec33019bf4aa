"""Simulation corpus and the quantitative studies built on it.

A corpus mirrors the desk-scale acquisition design: a handful of synthetic
patches, each scanned several times at four orientations with blur and
per-acquisition noise, then pushed through the estimation chain to features.
The studies cover the specular ablation grid, the block-cutting scaling law,
the subblock correlation residual and its covariance test, corner-
perturbation robustness, and the digitization resolution sweep.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats as sstats

from .fields import (
    HeightMap,
    NormalField,
    PITCH_300PPI_UM,
    ScanImage,
)
from .match import (
    correlation,
    hypothesis_stats,
    log10_eer_gaussian,
    log10_eer_laplace,
)
from .normmap import complete_z, estimate_alpha, estimate_normmap
from .optics import ReflectanceParams, ScannerGeometry, render_scan
from .reconstruct import (
    DOG_LEVELS,
    DOG_SIGMA,
    detrend,
    dog_decompose,
    gaussian_blur,
    integrate_surface,
)
from .registration import CornerSet, perturb_corners, rectify
from .synth import FiberModelParams, degrade_scan, generate_surface, normals_from_heightmap

ORIENTS = (0, 90, 180, 270)


# ---------------------------------------------------------------------------
# study report container


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


@dataclass(frozen=True)
class StudyReport:
    """One row per cell of a study, plus the reproducibility manifest."""

    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    config: dict
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError("row width disagrees with columns")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def column(self, name: str) -> list:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def write(self, directory) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        csv_path = directory / f"{self.name}.csv"
        manifest_path = directory / f"{self.name}.manifest.json"
        csv_path.write_text(self.to_csv())
        manifest_path.write_text(
            json.dumps(
                {"study": self.name, "config": self.config, "summary": self.summary},
                indent=2,
                sort_keys=True,
            )
        )
        return csv_path, manifest_path


# ---------------------------------------------------------------------------
# simulated acquisition corpus


@dataclass(frozen=True)
class SimulationConfig:
    """Everything needed to rebuild a corpus bit-for-bit."""

    n_patches: int = 9
    n_acquisitions: int = 9
    size: int = 200
    pitch_um: float = PITCH_300PPI_UM
    seed: int = 0
    quadrature_steps: int = 256
    diffuse_weight: float = 1.0
    specular_weight: float = 0.0
    gloss: float = 1.0
    # Scanner blur in the bed frame: stronger along the linear light (x)
    # than along the scan direction (y).
    blur_sigma_x: float = 1.2
    blur_sigma_y: float = 0.6
    noise_std: float = 0.09
    # Per-acquisition quality spread: the noise level is scaled by a draw
    # from this range, mimicking repeated scans on scanners of varying grade.
    noise_jitter: tuple[float, float] = (0.79, 1.21)
    margin_px: int = 0

    def geometry(self) -> ScannerGeometry:
        return ScannerGeometry(quadrature_steps=self.quadrature_steps)

    def reflectance(self) -> ReflectanceParams:
        return ReflectanceParams(self.diffuse_weight, self.specular_weight, self.gloss)

    def as_dict(self) -> dict:
        return asdict(self)


FEATURE_KINDS_ALL = (
    ("norm_map_x", "norm_map_y", "heightmap", "detrended")
    + tuple(f"subband{k}" for k in range(1, DOG_LEVELS + 1))
)


@dataclass
class PatchData:
    index: int
    heightmap: HeightMap
    normals: NormalField
    sigma_ref: tuple[float, float]
    clean_scans: list[ScanImage]
    reference_features: dict[str, np.ndarray]


@dataclass
class AcquisitionData:
    patch_index: int
    acq_index: int
    scans: list[ScanImage]
    features: dict[str, np.ndarray]


@dataclass
class Corpus:
    config: SimulationConfig
    patches: list[PatchData]
    acquisitions: list[list[AcquisitionData]]  # [patch][acq]


def _embed_in_canvas(nf: NormalField, margin: int) -> NormalField:
    if margin == 0:
        return nf
    pad = ((margin, margin), (margin, margin))
    return NormalField(
        nx=np.pad(nf.nx, pad),
        ny=np.pad(nf.ny, pad),
        nz=np.pad(nf.nz, pad, constant_values=1.0),
    )


def reference_features(hm: HeightMap, nf: NormalField) -> dict[str, np.ndarray]:
    """Reference-side feature chain computed from ground truth."""
    feats = {
        "norm_map_x": nf.nx,
        "norm_map_y": nf.ny,
        "heightmap": hm.heights,
        "detrended": detrend(hm).heights,
    }
    stack = dog_decompose(hm.heights)
    for k in range(1, stack.n_levels + 1):
        feats[f"subband{k}"] = stack.level(k)
    return feats


def acquisition_features(
    scans, sigma_ref: tuple[float, float], config: SimulationConfig
) -> dict[str, np.ndarray]:
    """Scanner-side feature chain: scans to norm map to heightmap features."""
    nm = estimate_normmap(scans)
    sx_s, sy_s = nm.component_stds()
    alpha = estimate_alpha(sx_s, sy_s, *sigma_ref)
    fld, _ = complete_z(nm, alpha)
    rec = integrate_surface(fld, pixel_pitch=config.pitch_um)
    feats = {
        "norm_map_x": nm.nx_scaled,
        "norm_map_y": nm.ny_scaled,
        "heightmap": rec.heights,
        "detrended": detrend(rec).heights,
    }
    stack = dog_decompose(rec.heights)
    for k in range(1, stack.n_levels + 1):
        feats[f"subband{k}"] = stack.level(k)
    return feats


def _acquisition_seed(base: int, patch: int, acq: int, orient_idx: int) -> int:
    return ((base * 1_000_003 + patch) * 1_009 + acq) * 7 + orient_idx


def degrade_acquisition(
    clean_scans, config: SimulationConfig, patch: int, acq: int
) -> list[ScanImage]:
    """One simulated acquisition: bed-frame blur plus jittered noise."""
    rng = np.random.default_rng(_acquisition_seed(config.seed, patch, acq, 6))
    lo, hi = config.noise_jitter
    noise = config.noise_std * rng.uniform(lo, hi)
    return [
        degrade_scan(
            scan,
            config.blur_sigma_x,
            config.blur_sigma_y,
            noise,
            seed=_acquisition_seed(config.seed, patch, acq, k),
        )
        for k, scan in enumerate(clean_scans)
    ]


def build_corpus(config: SimulationConfig, with_features: bool = True) -> Corpus:
    """Generate patches, simulate every acquisition, and extract features."""
    geom = config.geometry()
    refl = config.reflectance()
    patches = []
    acquisitions = []
    for p in range(config.n_patches):
        params = FiberModelParams(seed=config.seed * 9973 + p)
        hm = generate_surface(params, config.size, config.size, config.pitch_um)
        nf = normals_from_heightmap(hm, 3)
        sigma_ref = (float(np.std(nf.nx)), float(np.std(nf.ny)))
        canvas = _embed_in_canvas(nf, config.margin_px)
        clean = [
            render_scan(canvas, geom, refl, o, pixel_pitch=config.pitch_um)
            for o in ORIENTS
        ]
        patches.append(
            PatchData(
                index=p,
                heightmap=hm,
                normals=nf,
                sigma_ref=sigma_ref,
                clean_scans=clean,
                reference_features=reference_features(hm, nf),
            )
        )
        per_patch = []
        for a in range(config.n_acquisitions):
            scans = degrade_acquisition(clean, config, p, a)
            feats = {}
            if with_features and config.margin_px == 0:
                feats = acquisition_features(scans, sigma_ref, config)
            per_patch.append(
                AcquisitionData(patch_index=p, acq_index=a, scans=scans, features=feats)
            )
        acquisitions.append(per_patch)
    return Corpus(config=config, patches=patches, acquisitions=acquisitions)


def _partner_indices(n_patches: int, seed: int) -> list[int]:
    """One seeded unmatched partner per patch, never the patch itself."""
    rng = np.random.default_rng(seed + 424243)
    partners = []
    for p in range(n_patches):
        q = int(rng.integers(0, n_patches - 1))
        partners.append(q + 1 if q >= p else q)
    return partners


def feature_pairs(corpus: Corpus, kind: str):
    """Matched and unmatched feature-grid pairs under the scanner-reference
    design: matched pairs are two acquisitions of one patch, unmatched pairs
    cross every acquisition of a patch with one seeded partner patch."""
    matched = []
    unmatched = []
    n = corpus.config.n_acquisitions
    for p, acqs in enumerate(corpus.acquisitions):
        for i in range(n):
            for j in range(i + 1, n):
                matched.append((acqs[i].features[kind], acqs[j].features[kind]))
    partners = _partner_indices(corpus.config.n_patches, corpus.config.seed)
    for p, q in enumerate(partners):
        for a in corpus.acquisitions[p]:
            for b in corpus.acquisitions[q]:
                unmatched.append((a.features[kind], b.features[kind]))
    return matched, unmatched


def score_sets(corpus: Corpus, kind: str):
    matched_pairs, unmatched_pairs = feature_pairs(corpus, kind)
    matched = [correlation(a, b) for a, b in matched_pairs]
    unmatched = [correlation(a, b) for a, b in unmatched_pairs]
    return matched, unmatched


def corpus_eer_table(corpus: Corpus, kinds=FEATURE_KINDS_ALL) -> StudyReport:
    """Closed-form EERs per feature kind on the scanner-reference design."""
    rows = []
    for kind in kinds:
        matched, unmatched = score_sets(corpus, kind)
        st = hypothesis_stats(matched, unmatched)
        rows.append(
            (
                kind,
                st.mu_unmatched,
                st.sigma_unmatched,
                st.mu_matched,
                st.sigma_matched,
                log10_eer_gaussian(st),
                log10_eer_laplace(st),
            )
        )
    return StudyReport(
        name="feature_eer",
        columns=("feature", "mu0", "sigma0", "mu1", "sigma1", "log10_eer_g", "log10_eer_l"),
        rows=tuple(rows),
        config=corpus.config.as_dict(),
    )


# ---------------------------------------------------------------------------
# specular ablation


def specular_ablation(
    specular_weights=(0.0, 0.1, 0.2, 0.3),
    sensor_x_components=(0.0, 0.1, 0.3),
    n_fields: int = 9,
    seed: int = 0,
    size: int = 64,
    quadrature_steps: int = 192,
) -> StudyReport:
    """Correlation of the difference estimator with the true y-component,
    over a grid of specular strengths and sensor x-components."""
    if 0.0 not in specular_weights or 0.0 not in sensor_x_components:
        raise ValueError("the scanner-faithful baseline cell must be included")
    phi = np.deg2rad(10.0)
    fields = []
    for k in range(n_fields):
        hm = generate_surface(
            FiberModelParams(seed=seed * 131 + k), size, size, PITCH_300PPI_UM
        )
        fields.append(normals_from_heightmap(hm, 3))

    rows = []
    for vcx in sensor_x_components:
        direction = np.array([vcx, np.sin(phi), np.cos(phi)])
        direction /= np.linalg.norm(direction)
        geom = ScannerGeometry(
            sensor_dir=tuple(direction), quadrature_steps=quadrature_steps
        )
        for w_s in specular_weights:
            refl = ReflectanceParams(1.0, w_s, 1.0)
            corrs = []
            for nf in fields:
                i0 = render_scan(nf, geom, refl, 0).aligned()
                i180 = render_scan(nf, geom, refl, 180).aligned()
                corrs.append(correlation(i0 - i180, nf.ny))
            rows.append((w_s, vcx, float(np.mean(corrs)), n_fields))
    return StudyReport(
        name="specular_ablation",
        columns=("specular_weight", "sensor_x", "mean_corr_ny", "n_fields"),
        rows=tuple(rows),
        config={
            "seed": seed,
            "size": size,
            "n_fields": n_fields,
            "quadrature_steps": quadrature_steps,
            "specular_weights": list(specular_weights),
            "sensor_x_components": list(sensor_x_components),
        },
    )


# ---------------------------------------------------------------------------
# block cutting


def _center_crop_edge(shape, max_cuts: int) -> int:
    edge = int(min(shape) * 4 // 5)
    edge -= edge % (2**max_cuts)
    return edge


def block_cut_study(matched_pairs, unmatched_pairs, max_cuts: int = 3, min_edge: int = 16) -> StudyReport:
    """Score statistics and closed-form EERs as one patch is cut into 4^n blocks."""
    if not matched_pairs or not unmatched_pairs:
        raise ValueError("need at least one pair per hypothesis")
    shape = matched_pairs[0][0].shape
    root = _center_crop_edge(shape, max_cuts)
    if root < min_edge:
        raise ValueError("root block is already below the minimum edge")
    r0 = (shape[0] - root) // 2
    c0 = (shape[1] - root) // 2

    rows = []
    prev_sigma = None
    edges, log_eers = [], []
    for level in range(max_cuts + 1):
        edge = root // (2**level)
        if edge < min_edge:
            break
        blocks = [
            (slice(r0 + bi * edge, r0 + (bi + 1) * edge), slice(c0 + bj * edge, c0 + (bj + 1) * edge))
            for bi in range(root // edge)
            for bj in range(root // edge)
        ]

        def block_scores(pairs):
            return [correlation(a[blk], b[blk]) for a, b in pairs for blk in blocks]

        st = hypothesis_stats(block_scores(matched_pairs), block_scores(unmatched_pairs))
        if prev_sigma is None:
            ratio0 = ratio1 = float("nan")
        else:
            ratio0 = st.sigma_unmatched / prev_sigma[0]
            ratio1 = st.sigma_matched / prev_sigma[1]
        prev_sigma = (st.sigma_unmatched, st.sigma_matched)
        lg = log10_eer_gaussian(st)
        ll = log10_eer_laplace(st)
        rows.append(
            (
                level,
                edge,
                st.mu_unmatched,
                st.sigma_unmatched,
                st.mu_matched,
                st.sigma_matched,
                ratio0,
                ratio1,
                lg,
                ll,
            )
        )
        edges.append(edge)
        log_eers.append(ll)

    slope, intercept, rvalue, _, _ = sstats.linregress(edges, log_eers)
    return StudyReport(
        name="block_cut",
        columns=(
            "level",
            "edge_px",
            "mu0",
            "sigma0",
            "mu1",
            "sigma1",
            "sigma0_ratio",
            "sigma1_ratio",
            "log10_eer_g",
            "log10_eer_l",
        ),
        rows=tuple(rows),
        config={"max_cuts": max_cuts, "min_edge": min_edge, "root_edge": root},
        summary={
            "laplace_slope_per_px": float(slope),
            "laplace_intercept": float(intercept),
            "laplace_fit_r2": float(rvalue**2),
        },
    )


# ---------------------------------------------------------------------------
# subblock residual and covariance


def quadrant_slices(shape):
    rows, cols = shape
    if rows % 2 or cols % 2:
        raise ValueError("grids must have even dimensions")
    rh, ch = rows // 2, cols // 2
    return (
        (slice(0, rh), slice(0, ch)),
        (slice(0, rh), slice(ch, cols)),
        (slice(rh, rows), slice(0, ch)),
        (slice(rh, rows), slice(ch, cols)),
    )


def quadrant_correlations(x: np.ndarray, y: np.ndarray) -> list[float]:
    return [correlation(x[blk], y[blk]) for blk in quadrant_slices(x.shape)]


def subblock_residual(x: np.ndarray, y: np.ndarray) -> float:
    """Whole-block correlation minus the mean of the four quadrant correlations."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("grids must share one shape")
    rho = correlation(x, y)
    rho_i = quadrant_correlations(x, y)
    return float(rho - np.mean(rho_i))


def residual_study(pairs, subblock_edges=(25, 50, 100), name: str = "subblock_residual") -> StudyReport:
    """Distribution of the decomposition residual across pairs and scales."""
    rows = []
    for edge in subblock_edges:
        block = 2 * edge
        residuals = []
        for a, b in pairs:
            if min(a.shape) < block:
                raise ValueError(f"pairs too small for subblock edge {edge}")
            r0 = (a.shape[0] - block) // 2
            c0 = (a.shape[1] - block) // 2
            win = (slice(r0, r0 + block), slice(c0, c0 + block))
            residuals.append(subblock_residual(a[win], b[win]))
        rows.append(
            (edge, edge * edge, len(residuals), float(np.mean(residuals)), float(np.std(residuals, ddof=1)))
        )
    return StudyReport(
        name=name,
        columns=("subblock_edge", "subblock_pixels", "n_pairs", "mean_residual", "std_residual"),
        rows=tuple(rows),
        config={"subblock_edges": list(subblock_edges), "n_pairs": len(pairs)},
    )


def subblock_covariance_test(pairs, hypothesis: str) -> StudyReport:
    """Correlation between collocated quadrant scores across pairs, with a
    one-sample t-test on the Fisher-transformed values.

    Unmatched pairs are tested two-sided against zero; matched pairs
    one-sided for positive dependence.
    """
    if hypothesis not in ("matched", "unmatched"):
        raise ValueError("hypothesis must be 'matched' or 'unmatched'")
    if len(pairs) < 20:
        raise ValueError("need at least 20 pairs")
    quad_scores = np.array([quadrant_correlations(a, b) for a, b in pairs])
    rows = []
    zs = []
    for i in range(4):
        for j in range(i + 1, 4):
            r = correlation(quad_scores[:, i], quad_scores[:, j])
            rows.append((i + 1, j + 1, r))
            zs.append(np.arctanh(np.clip(r, -0.999999, 0.999999)))
    alternative = "greater" if hypothesis == "matched" else "two-sided"
    t_stat, p_value = sstats.ttest_1samp(zs, 0.0, alternative=alternative)
    return StudyReport(
        name=f"subblock_covariance_{hypothesis}",
        columns=("quadrant_i", "quadrant_j", "corr_across_pairs"),
        rows=tuple(rows),
        config={"hypothesis": hypothesis, "n_pairs": len(pairs)},
        summary={
            "mean_corr": float(np.mean([r[2] for r in rows])),
            "t_statistic": float(t_stat),
            "p_value": float(p_value),
        },
    )


# ---------------------------------------------------------------------------
# corner perturbation


def _subband_only(grid: np.ndarray, index: int, n_levels: int = DOG_LEVELS, sigma: float = DOG_SIGMA) -> np.ndarray:
    """Single DoG level without building the full stack (two blurs at most)."""
    upper = grid if index == 1 else gaussian_blur(grid, sigma ** (index - 1))
    if index == n_levels:
        return upper
    return upper - gaussian_blur(grid, sigma**index)


def patch_corners(canvas_px: int, margin: int, size: int) -> CornerSet:
    hi = margin + size - 1
    if hi >= canvas_px:
        raise ValueError("patch does not fit the canvas")
    pts = np.array(
        [[margin, margin], [hi, margin], [hi, hi], [margin, hi]], dtype=np.float64
    )
    return CornerSet(points=pts)


def perturbation_study(
    corpus: Corpus,
    levels=(0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0),
    feature_kind: str = "subband2",
    trials: int = 1,
    seed: int = 0,
) -> StudyReport:
    """Closed-form EERs as the rectification corners are jittered.

    The corpus must carry a canvas margin; every scan is rectified from its
    own (perturbed) corner estimate before the feature chain runs, as a
    registration stage would do.
    """
    cfg = corpus.config
    if cfg.margin_px <= 0:
        raise ValueError("perturbation study needs a corpus with margin_px > 0")
    canvas_px = cfg.size + 2 * cfg.margin_px
    corners = patch_corners(canvas_px, cfg.margin_px, cfg.size)
    sub_index = int(feature_kind.removeprefix("subband")) if feature_kind.startswith("subband") else None

    rows = []
    for level in levels:
        if level < 0:
            raise ValueError("perturbation level must be non-negative")
        trial_g, trial_l = [], []
        for trial in range(trials):
            feats: list[list[np.ndarray]] = []
            for p, acqs in enumerate(corpus.acquisitions):
                per_patch = []
                for a in acqs:
                    rectified = []
                    for k, scan in enumerate(a.scans):
                        jitter_seed = _acquisition_seed(
                            seed + 17 * trial + int(round(level * 1000)), p, a.acq_index, k
                        )
                        noisy = perturb_corners(corners, level, jitter_seed)
                        img = rectify(scan.intensities, noisy, cfg.size)
                        rectified.append(
                            ScanImage(intensities=img, orientation=scan.orientation, pixel_pitch=cfg.pitch_um)
                        )
                    nm = estimate_normmap(rectified)
                    if feature_kind == "norm_map_x":
                        per_patch.append(nm.nx_scaled)
                        continue
                    if feature_kind == "norm_map_y":
                        per_patch.append(nm.ny_scaled)
                        continue
                    sx_s, sy_s = nm.component_stds()
                    alpha = estimate_alpha(sx_s, sy_s, *corpus.patches[p].sigma_ref)
                    fld, _ = complete_z(nm, alpha)
                    rec = integrate_surface(fld, pixel_pitch=cfg.pitch_um)
                    if feature_kind == "heightmap":
                        per_patch.append(rec.heights)
                    elif feature_kind == "detrended":
                        per_patch.append(detrend(rec).heights)
                    else:
                        per_patch.append(_subband_only(rec.heights, sub_index))
                feats.append(per_patch)

            matched, unmatched = [], []
            n = cfg.n_acquisitions
            for p in range(cfg.n_patches):
                for i in range(n):
                    for j in range(i + 1, n):
                        matched.append(correlation(feats[p][i], feats[p][j]))
            for p, q in enumerate(_partner_indices(cfg.n_patches, cfg.seed)):
                for a in range(n):
                    for b in range(n):
                        unmatched.append(correlation(feats[p][a], feats[q][b]))
            st = hypothesis_stats(matched, unmatched)
            trial_g.append(log10_eer_gaussian(st))
            trial_l.append(log10_eer_laplace(st))
        rows.append(
            (float(level), trials, float(np.mean(trial_g)), float(np.mean(trial_l)))
        )
    return StudyReport(
        name="perturbation",
        columns=("perturbation_px", "trials", "log10_eer_g", "log10_eer_l"),
        rows=tuple(rows),
        config={
            "corpus": cfg.as_dict(),
            "levels": [float(l) for l in levels],
            "feature_kind": feature_kind,
            "trials": trials,
            "seed": seed,
        },
    )


# ---------------------------------------------------------------------------
# resolution sweep


def resolution_study(
    hm: HeightMap,
    ppi_values=(150, 200, 300, 400, 600, 800, 1200),
    window: int = 3,
) -> StudyReport:
    """Tilt statistics of plane-fit normals as the working pixel size varies.

    The source heightmap is block-averaged down to each requested density;
    the effective density is reported when the pitch ratio must round to an
    integer block size.
    """
    rows = []
    for ppi in ppi_values:
        target_pitch = 25400.0 / ppi
        k = target_pitch / hm.pixel_pitch
        if k < 1.0 - 1e-9:
            raise ValueError(f"{ppi} ppi is finer than the source heightmap")
        k = max(1, int(round(k)))
        rows_c = hm.heights.shape[0] // k
        cols_c = hm.heights.shape[1] // k
        block = hm.heights[: rows_c * k, : cols_c * k].reshape(rows_c, k, cols_c, k)
        coarse = HeightMap(heights=block.mean(axis=(1, 3)), pixel_pitch=hm.pixel_pitch * k)
        nf = normals_from_heightmap(coarse, window)
        sin_theta = np.hypot(nf.nx, nf.ny)
        rows.append(
            (
                int(ppi),
                25400.0 / coarse.pixel_pitch,
                k,
                float(np.mean(sin_theta)),
                float(np.std(sin_theta)),
            )
        )
    return StudyReport(
        name="resolution",
        columns=("ppi_requested", "ppi_effective", "block_px", "mean_sin_theta", "std_sin_theta"),
        rows=tuple(rows),
        config={"ppi_values": [int(p) for p in ppi_values], "window": window},
    )
