import numpy as np
import pytest

from paperprint.fields import HeightMap, ScanImage
from paperprint.synth import (
    FiberModelParams,
    degrade_scan,
    generate_surface,
    normals_from_heightmap,
)


class TestGenerateSurface:
    def test_same_seed_is_bit_identical(self):
        p = FiberModelParams(seed=42, fiber_count=50)
        a = generate_surface(p, 48, 48, 84.7)
        b = generate_surface(p, 48, 48, 84.7)
        assert np.array_equal(a.heights, b.heights)

    def test_different_seeds_differ(self):
        a = generate_surface(FiberModelParams(seed=1, fiber_count=50), 48, 48, 84.7)
        b = generate_surface(FiberModelParams(seed=2, fiber_count=50), 48, 48, 84.7)
        assert not np.array_equal(a.heights, b.heights)

    def test_empty_superposition_is_flat(self):
        p = FiberModelParams(seed=0, fiber_count=0, noise_floor_um=0.0)
        hm = generate_surface(p, 32, 32, 84.7)
        assert np.all(hm.heights == 0.0)

    def test_default_calibration_matches_tilt_band(self):
        hm = generate_surface(FiberModelParams(seed=0), 200, 200, 84.7)
        nf = normals_from_heightmap(hm, 3)
        sin_theta = np.hypot(nf.nx, nf.ny)
        assert 0.05 <= sin_theta.mean() <= 0.11
        assert 0.03 <= sin_theta.std() <= 0.06

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            generate_surface(FiberModelParams(), 16, 200, 84.7)

    def test_area_scaling_keeps_density(self):
        p = FiberModelParams()
        bigger = p.scaled_to_area(400, 400, 84.7)
        assert bigger.fiber_count == pytest.approx(4 * p.scaled_to_area(200, 200, 84.7).fiber_count, rel=0.01)


class TestNormalsFromHeightmap:
    def test_exact_plane_recovery_everywhere(self):
        jj, ii = np.meshgrid(np.arange(40.0), np.arange(30.0))
        hm = HeightMap(heights=0.1 * jj + 0.2 * ii, pixel_pitch=1.0)
        nf = normals_from_heightmap(hm, 3)
        expected = np.array([-0.1, -0.2, 1.0]) / np.linalg.norm([-0.1, -0.2, 1.0])
        # plane fits are exact on a plane, truncated border windows included
        assert np.allclose(nf.nx, expected[0], atol=1e-9)
        assert np.allclose(nf.ny, expected[1], atol=1e-9)
        assert np.allclose(nf.nz, expected[2], atol=1e-9)

    def test_constant_heights_point_straight_up(self):
        hm = HeightMap(heights=np.full((20, 20), 3.7), pixel_pitch=84.7)
        nf = normals_from_heightmap(hm, 5)
        assert np.allclose(nf.nx, 0.0, atol=1e-12)
        assert np.allclose(nf.ny, 0.0, atol=1e-12)
        assert np.allclose(nf.nz, 1.0, atol=1e-12)

    def test_agrees_with_central_difference_on_smooth_region(self):
        from scipy import ndimage

        rng = np.random.default_rng(5)
        z = ndimage.gaussian_filter(rng.normal(0, 5.0, (60, 60)), 3.0)
        hm = HeightMap(heights=z, pixel_pitch=1.0)
        nf = normals_from_heightmap(hm, 3)

        gx = (z[1:-1, 2:] - z[1:-1, :-2]) / 2.0
        gy = (z[2:, 1:-1] - z[:-2, 1:-1]) / 2.0
        norm = np.sqrt(gx**2 + gy**2 + 1.0)
        fd = np.stack([-gx / norm, -gy / norm, 1.0 / norm], axis=-1)
        fit = np.stack(
            [nf.nx[1:-1, 1:-1], nf.ny[1:-1, 1:-1], nf.nz[1:-1, 1:-1]], axis=-1
        )
        dots = np.clip(np.sum(fd * fit, axis=-1), -1.0, 1.0)
        assert np.degrees(np.arccos(dots)).max() <= 2.0

    def test_rejects_even_window(self):
        hm = HeightMap(heights=np.zeros((10, 10)), pixel_pitch=1.0)
        with pytest.raises(ValueError):
            normals_from_heightmap(hm, 4)


class TestDegradeScan:
    def test_identity_when_disabled(self):
        rng = np.random.default_rng(1)
        img = ScanImage(intensities=rng.normal(size=(16, 16)), orientation=0, pixel_pitch=1.0)
        out = degrade_scan(img, 0.0, 0.0, 0.0, seed=9)
        assert np.array_equal(out.intensities, img.intensities)

    def test_blur_preserves_constants(self):
        img = ScanImage(intensities=np.full((20, 20), 0.37), orientation=0, pixel_pitch=1.0)
        out = degrade_scan(img, 1.3, 0.5, 0.0, seed=0)
        assert np.allclose(out.intensities, 0.37, atol=1e-12)

    def test_impulse_response_matches_sampled_kernel(self):
        img = np.zeros((31, 41))
        img[15, 20] = 1.0
        scan = ScanImage(intensities=img, orientation=0, pixel_pitch=1.0)
        out = degrade_scan(scan, 0.8, 1.5, 0.0, seed=0).intensities

        def kernel(sigma):
            radius = int(4.0 * sigma + 0.5)
            d = np.arange(-radius, radius + 1)
            k = np.exp(-0.5 * (d / sigma) ** 2)
            return k / k.sum()

        expected = np.zeros_like(img)
        ky = kernel(1.5)
        kx = kernel(0.8)
        ry, rx = len(ky) // 2, len(kx) // 2
        expected[15 - ry : 15 + ry + 1, 20 - rx : 20 + rx + 1] = np.outer(ky, kx)
        assert np.allclose(out, expected, atol=1e-10)

    def test_noise_is_seed_deterministic(self):
        img = ScanImage(intensities=np.zeros((12, 12)), orientation=0, pixel_pitch=1.0)
        a = degrade_scan(img, 0.0, 0.0, 0.1, seed=4).intensities
        b = degrade_scan(img, 0.0, 0.0, 0.1, seed=4).intensities
        c = degrade_scan(img, 0.0, 0.0, 0.1, seed=5).intensities
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_blur_preserves_mean(self):
        rng = np.random.default_rng(8)
        img = ScanImage(intensities=rng.uniform(0, 1, (40, 40)), orientation=0, pixel_pitch=1.0)
        out = degrade_scan(img, 0.6, 1.2, 0.0, seed=0)
        drift = abs(out.intensities.mean() - img.intensities.mean())
        assert drift <= 1e-6 * np.ptp(img.intensities)
