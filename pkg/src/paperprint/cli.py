"""Command-line operator surface.

Every pipeline stage reads the same declarative JSON config; its canonical
digest is embedded in each artifact so chained stages can refuse mismatched
inputs.  Exit codes: 0 success, 2 invalid input, 3 integrity failure,
4 verification reject or no match.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments as xp
from .fields import HeightMap, NormMap, ScanImage
from .gridio import GridFileError, canonical_digest, read_grid, write_grid
from .normmap import complete_z, estimate_alpha, estimate_normmap
from .optics import ReflectanceParams, ScannerGeometry, render_scan
from .reconstruct import feature_from_heightmap, integrate_surface, parse_feature_kind
from .store import FeatureStore, StoreError
from .synth import FiberModelParams, degrade_scan, generate_surface, normals_from_heightmap

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INTEGRITY = 3
EXIT_REJECT = 4

ORIENTS = (0, 90, 180, 270)


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


def _load_config(path) -> tuple[dict, str]:
    try:
        config = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise CliError("config root must be a JSON object")
    return config, canonical_digest(config)


def _read_artifact(path, digest: str) -> tuple[np.ndarray, dict]:
    try:
        grid, meta = read_grid(path)
    except FileNotFoundError as exc:
        raise CliError(f"missing input {path}", EXIT_INVALID) from exc
    except GridFileError as exc:
        raise CliError(f"corrupt input {path}: {exc}", EXIT_INTEGRITY) from exc
    upstream = meta.get("config_digest")
    if upstream is not None and upstream != digest:
        raise CliError(
            f"config digest mismatch for {path}: artifact was produced by a "
            f"different configuration ({upstream[:12]}... != {digest[:12]}...)",
            EXIT_INTEGRITY,
        )
    return grid, meta


def _geometry(config: dict) -> ScannerGeometry:
    section = config.get("scanner", {})
    kwargs = {
        k: section[k]
        for k in (
            "light_span_near",
            "light_span_far",
            "light_offset_y",
            "light_offset_z",
            "light_strength",
            "quadrature_steps",
        )
        if k in section
    }
    if "sensor_dir" in section:
        kwargs["sensor_dir"] = tuple(section["sensor_dir"])
    return ScannerGeometry(**kwargs)


def _reflectance(config: dict) -> ReflectanceParams:
    section = config.get("scanner", {})
    return ReflectanceParams(
        diffuse_weight=section.get("diffuse_weight", 1.0),
        specular_weight=section.get("specular_weight", 0.0),
        gloss=section.get("gloss", 1.0),
    )


# ---------------------------------------------------------------------------
# pipeline commands


def cmd_synth(args) -> int:
    config, digest = _load_config(args.config)
    section = dict(config.get("surface", {}))
    rows = int(section.pop("rows", 200))
    cols = int(section.pop("cols", 200))
    pitch = float(section.pop("pitch_um", 25400.0 / 300.0))
    if "seed" not in section:
        section["seed"] = int(np.random.SeedSequence().entropy % (2**63))
    params = FiberModelParams(**section)
    hm = generate_surface(params, rows, cols, pitch)
    write_grid(
        args.out,
        hm.heights,
        {
            "kind": "heightmap",
            "units": "um",
            "pixel_pitch": repr(pitch),
            "seed": str(params.seed),
            "source": "synth",
            "config_digest": digest,
        },
    )
    print(f"wrote {args.out} ({rows}x{cols}, seed {params.seed})")
    return EXIT_OK


def cmd_scan(args) -> int:
    config, digest = _load_config(args.config)
    grid, meta = _read_artifact(args.surface, digest)
    pitch = float(meta.get("pixel_pitch", 25400.0 / 300.0))
    hm = HeightMap(heights=grid, pixel_pitch=pitch)
    section = config.get("scan", {})
    window = int(section.get("window", 3))
    nf = normals_from_heightmap(hm, window)
    geom = _geometry(config)
    refl = _reflectance(config)
    seed = int(section.get("seed", 0))
    blur = (float(section.get("blur_sigma_x", 0.0)), float(section.get("blur_sigma_y", 0.0)))
    noise = float(section.get("noise_std", 0.0))
    for k, orient in enumerate(ORIENTS):
        scan = render_scan(nf, geom, refl, orient, pixel_pitch=pitch)
        scan = degrade_scan(scan, blur[0], blur[1], noise, seed=seed * 31 + k)
        out = f"{args.out_prefix}_{orient:03d}.pgrd"
        write_grid(
            out,
            scan.intensities,
            {
                "kind": "scan",
                "orientation": str(orient),
                "pixel_pitch": repr(pitch),
                "seed": str(seed),
                "source": "scan",
                "config_digest": digest,
            },
        )
        print(f"wrote {out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    config, digest = _load_config(args.config)
    scans = []
    pitch = None
    for path in args.scans:
        grid, meta = _read_artifact(path, digest)
        try:
            orient = int(meta["orientation"])
        except KeyError as exc:
            raise CliError(f"{path} lacks orientation metadata") from exc
        pitch = float(meta.get("pixel_pitch", 25400.0 / 300.0))
        scans.append(ScanImage(intensities=grid, orientation=orient, pixel_pitch=pitch))
    nm = estimate_normmap(scans)
    for comp, grid in (("x", nm.nx_scaled), ("y", nm.ny_scaled)):
        out = f"{args.out_prefix}_{comp}.pgrd"
        write_grid(
            out,
            grid,
            {
                "kind": f"normmap_{comp}",
                "pixel_pitch": repr(pitch),
                "source": "scanner",
                "config_digest": digest,
            },
        )
        print(f"wrote {out}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    config, digest = _load_config(args.config)
    gx, meta = _read_artifact(args.normmap_x, digest)
    gy, _ = _read_artifact(args.normmap_y, digest)
    pitch = float(meta.get("pixel_pitch", 25400.0 / 300.0))
    nm = NormMap(nx_scaled=gx, ny_scaled=gy, source="scanner")
    section = config.get("reconstruct", {})
    if "alpha" in section:
        alpha = float(section["alpha"])
    elif "reference_std" in section:
        sx_c, sy_c = map(float, section["reference_std"])
        sx_s, sy_s = nm.component_stds()
        alpha = estimate_alpha(sx_s, sy_s, sx_c, sy_c)
    else:
        raise CliError("reconstruct config needs 'alpha' or 'reference_std'")
    field, clamped = complete_z(nm, alpha)
    hm = integrate_surface(field, pixel_pitch=pitch)
    write_grid(
        args.out,
        hm.heights,
        {
            "kind": "heightmap",
            "units": "um",
            "pixel_pitch": repr(pitch),
            "alpha": repr(alpha),
            "clamped_pixels": str(clamped),
            "source": "reconstruct",
            "config_digest": digest,
        },
    )
    print(f"wrote {args.out} (alpha {alpha:.6g}, {clamped} clamped px)")
    return EXIT_OK


def cmd_feature(args) -> int:
    config, digest = _load_config(args.config)
    kind = args.kind or config.get("feature", {}).get("kind")
    if not kind:
        raise CliError("feature kind missing (flag --kind or config feature.kind)")
    parse_feature_kind(kind)
    grid, meta = _read_artifact(args.heightmap, digest)
    pitch = float(meta.get("pixel_pitch", 25400.0 / 300.0))
    hm = HeightMap(heights=grid, pixel_pitch=pitch)
    feat = feature_from_heightmap(hm, kind)
    write_grid(
        args.out,
        feat,
        {
            "kind": f"feature_{kind}",
            "pixel_pitch": repr(pitch),
            "source": "feature",
            "config_digest": digest,
        },
    )
    print(f"wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# store commands


def _store(args) -> FeatureStore:
    root = args.store or os.environ.get("PAPERPRINT_STORE")
    if not root:
        raise CliError("no store given (flag --store or PAPERPRINT_STORE)")
    return FeatureStore(root)


def cmd_enroll(args) -> int:
    store = _store(args)
    try:
        grid, meta = read_grid(args.feature)
    except (OSError, GridFileError) as exc:
        raise CliError(f"cannot read feature {args.feature}: {exc}") from exc
    kind = meta.get("kind", "feature_unknown").removeprefix("feature_")
    try:
        _, sub = parse_feature_kind(kind)
    except ValueError:
        kind, sub = "unknown", None
    try:
        store.enroll(
            args.patch_id,
            grid,
            feature_kind=kind,
            subband_index=sub,
            config_digest=meta.get("config_digest", ""),
        )
    except StoreError as exc:
        raise CliError(str(exc), EXIT_INTEGRITY) from exc
    print(f"enrolled {args.patch_id}")
    return EXIT_OK


def cmd_verify(args) -> int:
    store = _store(args)
    try:
        grid, _ = read_grid(args.feature)
    except (OSError, GridFileError) as exc:
        raise CliError(f"cannot read feature {args.feature}: {exc}") from exc
    try:
        store.verify_integrity()
        best_id, score = store.verify(grid, patch_id=args.patch_id)
    except StoreError as exc:
        raise CliError(str(exc), EXIT_INTEGRITY) from exc

    threshold = args.threshold
    if threshold is None:
        stats_path = store.root / "stats.json"
        if stats_path.exists():
            stats = json.loads(stats_path.read_text())
            threshold = 0.5 * (stats["mu_unmatched"] + stats["mu_matched"])
        else:
            threshold = 0.5
    accept = score >= threshold
    verdict = "accept" if accept else "reject"
    print(f"{verdict} {best_id} score={score:.6f} threshold={threshold:.6f}")
    return EXIT_OK if accept else EXIT_REJECT


def cmd_report(args) -> int:
    store = _store(args)
    try:
        records = store.records()
        store.verify_integrity()
    except StoreError as exc:
        raise CliError(str(exc), EXIT_INTEGRITY) from exc
    lines = ["patch_id,feature_kind,subband_index,filename,sha256,config_digest"]
    for rec in records:
        sub = "" if rec.subband_index is None else str(rec.subband_index)
        lines.append(
            f"{rec.patch_id},{rec.feature_kind},{sub},{rec.filename},{rec.sha256},{rec.config_digest}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiments


def cmd_experiment(args) -> int:
    config, _ = _load_config(args.config)
    section = config.get("experiment", {})
    out_dir = Path(args.out_dir)

    if args.study == "specular":
        report = xp.specular_ablation(**section.get("specular", {}))
    elif args.study in ("blocks", "residual"):
        corpus_cfg = xp.SimulationConfig(**section.get("corpus", {}))
        corpus = xp.build_corpus(corpus_cfg)
        kind = section.get("feature_kind", "subband2")
        matched, unmatched = xp.feature_pairs(corpus, kind)
        if args.study == "blocks":
            full = xp.block_cut_study(matched, unmatched, **section.get("blocks", {}))
            wanted = (
                "level",
                "edge_px",
                "mu0",
                "sigma0",
                "mu1",
                "sigma1",
                "log10_eer_g",
                "log10_eer_l",
            )
            idx = [full.columns.index(c) for c in wanted]
            report = xp.StudyReport(
                name=full.name,
                columns=wanted,
                rows=tuple(tuple(row[i] for i in idx) for row in full.rows),
                config=full.config | {"corpus": corpus_cfg.as_dict(), "feature_kind": kind},
                summary=full.summary,
            )
        else:
            report = xp.residual_study(matched, **section.get("residual", {}))
            report = xp.StudyReport(
                name=report.name,
                columns=report.columns,
                rows=report.rows,
                config=report.config | {"corpus": corpus_cfg.as_dict(), "feature_kind": kind},
                summary=report.summary,
            )
    elif args.study == "perturb":
        corpus_section = dict(section.get("corpus", {}))
        corpus_section.setdefault("margin_px", 10)
        corpus_cfg = xp.SimulationConfig(**corpus_section)
        corpus = xp.build_corpus(corpus_cfg, with_features=False)
        report = xp.perturbation_study(corpus, **section.get("perturb", {}))
    elif args.study == "resolution":
        res_cfg = section.get("resolution", {})
        pitch = float(res_cfg.get("source_pitch_um", 25400.0 / 2400.0))
        size = int(res_cfg.get("source_px", 640))
        params = FiberModelParams(seed=int(res_cfg.get("seed", 0))).scaled_to_area(
            size, size, pitch
        )
        hm = generate_surface(params, size, size, pitch)
        report = xp.resolution_study(hm, tuple(res_cfg.get("ppi_values", (150, 200, 300, 400, 600, 800, 1200))))
    else:
        raise CliError(f"unknown study {args.study!r}")

    csv_path, manifest_path = report.write(out_dir)
    print(f"wrote {csv_path}")
    print(f"wrote {manifest_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paperprint",
        description="Paper-surface authentication toolkit: synthesis, scanning, estimation, and studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic ground-truth surface")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("scan", help="simulate the four oriented acquisitions")
    p.add_argument("--config", required=True)
    p.add_argument("--surface", required=True)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("estimate", help="estimate the norm map from four scans")
    p.add_argument("--config", required=True)
    p.add_argument("--scans", nargs=4, required=True)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("reconstruct", help="rebuild a heightmap from a norm map")
    p.add_argument("--config", required=True)
    p.add_argument("--normmap-x", required=True)
    p.add_argument("--normmap-y", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("feature", help="extract an authentication feature")
    p.add_argument("--config", required=True)
    p.add_argument("--heightmap", required=True)
    p.add_argument("--kind")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_feature)

    p = sub.add_parser("enroll", help="add a reference feature to a store")
    p.add_argument("--store")
    p.add_argument("--patch-id", required=True)
    p.add_argument("--feature", required=True)
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("verify", help="match a test feature against the store")
    p.add_argument("--store")
    p.add_argument("--feature", required=True)
    p.add_argument("--patch-id")
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="inventory a store as CSV")
    p.add_argument("--store")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("experiment", help="run a study and emit its CSV")
    p.add_argument("study", choices=("specular", "blocks", "residual", "perturb", "resolution"))
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
