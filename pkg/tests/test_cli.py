import json

import numpy as np
import pytest

from paperprint.cli import main
from paperprint.fields import HeightMap
from paperprint.gridio import read_grid, write_grid
from paperprint.reconstruct import feature_from_heightmap


@pytest.fixture()
def config_path(tmp_path):
    config = {
        "surface": {"rows": 64, "cols": 64, "pitch_um": 84.7, "seed": 11, "fiber_count": 180},
        "scanner": {"quadrature_steps": 128},
        "scan": {"window": 3, "seed": 5, "blur_sigma_x": 1.2, "blur_sigma_y": 0.6, "noise_std": 0.02},
        "reconstruct": {"reference_std": [0.05, 0.05]},
        "feature": {"kind": "subband2"},
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(config))
    return path


def run(*argv):
    return main([str(a) for a in argv])


class TestPipeline:
    def test_synth_is_reproducible_bytes(self, tmp_path, config_path):
        a = tmp_path / "a.pgrd"
        b = tmp_path / "b.pgrd"
        assert run("synth", "--config", config_path, "--out", a) == 0
        assert run("synth", "--config", config_path, "--out", b) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_synth_payload_size(self, tmp_path, config_path):
        out = tmp_path / "s.pgrd"
        run("synth", "--config", config_path, "--out", out)
        grid, meta = read_grid(out)
        assert grid.shape == (64, 64)
        assert meta["seed"] == "11"

    def test_omitted_seed_gives_distinct_runs(self, tmp_path):
        config = {"surface": {"rows": 32, "cols": 32, "fiber_count": 30}}
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(config))
        a, b = tmp_path / "a.pgrd", tmp_path / "b.pgrd"
        run("synth", "--config", cfg, "--out", a)
        run("synth", "--config", cfg, "--out", b)
        _, meta_a = read_grid(a)
        _, meta_b = read_grid(b)
        assert meta_a["seed"] != meta_b["seed"]
        assert a.read_bytes() != b.read_bytes()

    def test_full_chain_and_composition_equivalence(self, tmp_path, config_path):
        surface = tmp_path / "surface.pgrd"
        assert run("synth", "--config", config_path, "--out", surface) == 0
        assert run("scan", "--config", config_path, "--surface", surface,
                   "--out-prefix", tmp_path / "scan") == 0
        scans = [tmp_path / f"scan_{o:03d}.pgrd" for o in (0, 90, 180, 270)]
        for s in scans:
            assert s.exists()
        assert run("estimate", "--config", config_path, "--scans", *scans,
                   "--out-prefix", tmp_path / "nm") == 0
        assert run("reconstruct", "--config", config_path,
                   "--normmap-x", tmp_path / "nm_x.pgrd",
                   "--normmap-y", tmp_path / "nm_y.pgrd",
                   "--out", tmp_path / "height.pgrd") == 0
        assert run("feature", "--config", config_path,
                   "--heightmap", tmp_path / "height.pgrd",
                   "--out", tmp_path / "feat.pgrd") == 0

        # single-shot dispatch equals the staged chain bit-for-bit
        heights, meta = read_grid(tmp_path / "height.pgrd")
        hm = HeightMap(heights=heights, pixel_pitch=float(meta["pixel_pitch"]))
        direct = feature_from_heightmap(hm, "subband2")
        staged, _ = read_grid(tmp_path / "feat.pgrd")
        assert np.array_equal(direct, staged)

    def test_corrupted_input_fails_with_integrity_code(self, tmp_path, config_path):
        surface = tmp_path / "surface.pgrd"
        run("synth", "--config", config_path, "--out", surface)
        raw = bytearray(surface.read_bytes())
        raw[-3] ^= 0x10
        surface.write_bytes(bytes(raw))
        code = run("scan", "--config", config_path, "--surface", surface,
                   "--out-prefix", tmp_path / "scan")
        assert code == 3

    def test_config_digest_mismatch_refused(self, tmp_path, config_path):
        surface = tmp_path / "surface.pgrd"
        run("synth", "--config", config_path, "--out", surface)
        other = json.loads(config_path.read_text())
        other["scan"]["noise_std"] = 0.5
        cfg2 = tmp_path / "other.json"
        cfg2.write_text(json.dumps(other))
        code = run("scan", "--config", cfg2, "--surface", surface,
                   "--out-prefix", tmp_path / "scan")
        assert code == 3

    def test_missing_config_is_invalid_input(self, tmp_path):
        assert run("synth", "--config", tmp_path / "nope.json", "--out", tmp_path / "x") == 2


class TestStoreCommands:
    @pytest.fixture()
    def enrolled(self, tmp_path, config_path):
        feats = {}
        for pid, seed in (("alpha", 101), ("beta", 202)):
            grid = np.random.default_rng(seed).normal(size=(48, 48))
            path = tmp_path / f"{pid}.pgrd"
            write_grid(path, grid, {"kind": "feature_subband2"})
            feats[pid] = (path, grid)
        store = tmp_path / "store"
        for pid, (path, _) in feats.items():
            assert run("enroll", "--store", store, "--patch-id", pid, "--feature", path) == 0
        return store, feats

    def test_enroll_duplicate_fails(self, enrolled):
        store, feats = enrolled
        path, _ = feats["alpha"]
        assert run("enroll", "--store", store, "--patch-id", "alpha", "--feature", path) == 3

    def test_verify_accepts_own_feature(self, enrolled):
        store, feats = enrolled
        path, _ = feats["alpha"]
        assert run("verify", "--store", store, "--feature", path,
                   "--patch-id", "alpha", "--threshold", "0.9") == 0

    def test_verify_rejects_foreign_feature(self, enrolled, tmp_path):
        store, _ = enrolled
        probe = tmp_path / "probe.pgrd"
        write_grid(probe, np.random.default_rng(999).normal(size=(48, 48)),
                   {"kind": "feature_subband2"})
        assert run("verify", "--store", store, "--feature", probe, "--threshold", "0.5") == 4

    def test_search_mode_finds_best(self, enrolled):
        store, feats = enrolled
        path, _ = feats["beta"]
        assert run("verify", "--store", store, "--feature", path, "--threshold", "0.9") == 0

    def test_env_var_store(self, enrolled, monkeypatch):
        store, feats = enrolled
        path, _ = feats["alpha"]
        monkeypatch.setenv("PAPERPRINT_STORE", str(store))
        assert run("verify", "--feature", path, "--patch-id", "alpha", "--threshold", "0.9") == 0

    def test_report_lists_records(self, enrolled, tmp_path, capsys):
        store, _ = enrolled
        assert run("report", "--store", store) == 0
        out = capsys.readouterr().out
        assert "patch_id" in out
        assert "alpha" in out and "beta" in out


class TestExperimentCommand:
    def test_specular_csv_schema_and_determinism(self, tmp_path):
        config = {
            "experiment": {
                "specular": {
                    "n_fields": 2,
                    "size": 48,
                    "quadrature_steps": 96,
                    "seed": 3,
                }
            }
        }
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(config))
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        assert run("experiment", "specular", "--config", cfg, "--out-dir", out1) == 0
        assert run("experiment", "specular", "--config", cfg, "--out-dir", out2) == 0
        csv1 = (out1 / "specular_ablation.csv").read_bytes()
        csv2 = (out2 / "specular_ablation.csv").read_bytes()
        assert csv1 == csv2
        header = csv1.decode().splitlines()[0]
        assert header == "specular_weight,sensor_x,mean_corr_ny,n_fields"

    def test_blocks_csv_schema(self, tmp_path):
        config = {
            "experiment": {
                "corpus": {"n_patches": 3, "n_acquisitions": 3, "size": 80, "quadrature_steps": 96},
                "feature_kind": "subband2",
            }
        }
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(config))
        out = tmp_path / "blocks"
        assert run("experiment", "blocks", "--config", cfg, "--out-dir", out) == 0
        lines = (out / "block_cut.csv").read_text().splitlines()
        assert lines[0] == "level,edge_px,mu0,sigma0,mu1,sigma1,log10_eer_g,log10_eer_l"
        assert len(lines) >= 3  # at least two cut levels on an 80 px corpus

    def test_perturb_csv_one_row_per_level(self, tmp_path):
        config = {
            "experiment": {
                "corpus": {
                    "n_patches": 2,
                    "n_acquisitions": 2,
                    "size": 64,
                    "margin_px": 6,
                    "quadrature_steps": 96,
                },
                "perturb": {"levels": [0.0, 0.5], "feature_kind": "subband1", "trials": 1},
            }
        }
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(config))
        out = tmp_path / "perturb"
        assert run("experiment", "perturb", "--config", cfg, "--out-dir", out) == 0
        lines = (out / "perturbation.csv").read_text().splitlines()
        assert lines[0] == "perturbation_px,trials,log10_eer_g,log10_eer_l"
        assert len(lines) == 3

    def test_resolution_runs(self, tmp_path):
        config = {
            "experiment": {
                "resolution": {
                    "source_pitch_um": 25400.0 / 1200.0,
                    "source_px": 128,
                    "ppi_values": [150, 300, 600],
                    "seed": 1,
                }
            }
        }
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(config))
        out = tmp_path / "res"
        assert run("experiment", "resolution", "--config", cfg, "--out-dir", out) == 0
        lines = (out / "resolution.csv").read_text().splitlines()
        assert lines[0].startswith("ppi_requested,ppi_effective")
        assert len(lines) == 4
