"""Tests for PGM I/O, the synthetic degradation operator, and PSNR."""

import math

import numpy as np
import pytest

from ggmm_sr import degrade, load_pgm, psnr, save_pgm, upsample_nearest


def eight_bit_image(rng, shape):
    return rng.integers(0, 256, size=shape).astype(float) / 255.0


class TestPgmIO:
    def test_p5_round_trip_bytes(self, tmp_path):
        img = np.array([[0, 128, 255], [1, 2, 3]], dtype=float) / 255.0
        first = tmp_path / "a.pgm"
        second = tmp_path / "b.pgm"
        save_pgm(img, first)
        save_pgm(load_pgm(first), second)
        assert first.read_bytes() == second.read_bytes()
        np.testing.assert_array_equal(load_pgm(first), img)

    def test_p2_and_p5_load_equal(self, tmp_path, rng):
        img = eight_bit_image(rng, (7, 5))
        save_pgm(img, tmp_path / "bin.pgm")
        save_pgm(img, tmp_path / "asc.pgm", ascii_format=True)
        np.testing.assert_array_equal(
            load_pgm(tmp_path / "bin.pgm"), load_pgm(tmp_path / "asc.pgm")
        )

    def test_header_comments_are_skipped(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# a comment\n2 1\n# more\n255\n\x00\xff")
        np.testing.assert_array_equal(load_pgm(path), np.array([[0.0, 1.0]]))

    def test_rejects_maxval_65535(self, tmp_path):
        path = tmp_path / "deep.pgm"
        path.write_bytes(b"P5\n1 1\n65535\n\x00\x00")
        with pytest.raises(ValueError, match="maxval"):
            load_pgm(path)

    def test_rejects_color(self, tmp_path):
        path = tmp_path / "c.ppm"
        path.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
        with pytest.raises(ValueError, match="color"):
            load_pgm(path)

    def test_rejects_truncated_payload(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n2 2\n255\n\x00\x01")
        with pytest.raises(ValueError, match="truncated"):
            load_pgm(path)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "g.pgm"
        path.write_bytes(b"hello world")
        with pytest.raises(ValueError):
            load_pgm(path)

    def test_rejects_bad_header_token(self, tmp_path):
        path = tmp_path / "h.pgm"
        path.write_bytes(b"P5\ntwo 2\n255\n\x00\x01")
        with pytest.raises(ValueError, match="malformed"):
            load_pgm(path)

    def test_p2_out_of_range_sample(self, tmp_path):
        path = tmp_path / "r.pgm"
        path.write_bytes(b"P2\n2 1\n255\n12 300\n")
        with pytest.raises(ValueError, match="range"):
            load_pgm(path)


class TestDegrade:
    def test_constant_image(self):
        img = np.full((4, 4), 0.25)
        np.testing.assert_allclose(degrade(img, 2), np.full((2, 2), 0.25), atol=1e-15)

    def test_block_mean_hand_value(self):
        img = np.array([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(degrade(img, 2), [[0.5]], atol=1e-15)

    def test_rejects_non_divisible(self):
        with pytest.raises(ValueError, match="divisible"):
            degrade(np.zeros((5, 4)), 2)

    def test_identity_for_q1(self, rng):
        img = rng.uniform(size=(6, 7))
        np.testing.assert_array_equal(degrade(img, 1), img)

    def test_linear_without_noise(self, rng):
        x = rng.uniform(0.0, 0.5, size=(8, 8))
        y = rng.uniform(0.0, 0.5, size=(8, 8))
        a, b = 0.4, 0.6
        lhs = degrade(a * x + b * y, 2)
        rhs = a * degrade(x, 2) + b * degrade(y, 2)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_noise_deterministic_given_seed(self, rng):
        img = rng.uniform(size=(8, 8))
        np.testing.assert_array_equal(
            degrade(img, 2, noise_sigma=0.05, seed=3),
            degrade(img, 2, noise_sigma=0.05, seed=3),
        )
        assert not np.array_equal(
            degrade(img, 2, noise_sigma=0.05, seed=3),
            degrade(img, 2, noise_sigma=0.05, seed=4),
        )

    def test_noisy_output_clipped(self):
        img = np.ones((4, 4))
        out = degrade(img, 2, noise_sigma=0.5, seed=0)
        assert out.max() <= 1.0 and out.min() >= 0.0


class TestUpsampleNearest:
    def test_single_pixel(self):
        np.testing.assert_array_equal(
            upsample_nearest(np.array([[0.3]]), 2), np.full((2, 2), 0.3)
        )

    def test_degrade_inverts_replication(self, rng):
        img = rng.uniform(size=(5, 4))
        np.testing.assert_allclose(degrade(upsample_nearest(img, 3), 3), img, atol=1e-12)

    def test_output_size(self, rng):
        out = upsample_nearest(rng.uniform(size=(3, 5)), 4)
        assert out.shape == (12, 20)


class TestPsnr:
    def test_identical_images_infinite(self, rng):
        img = rng.uniform(size=(6, 6))
        assert math.isinf(psnr(img, img))

    def test_constant_offset_hand_value(self):
        a = np.zeros((10, 10))
        b = np.full((10, 10), 1.0 / 255.0)
        assert psnr(a, b) == pytest.approx(20 * math.log10(255.0), abs=1e-9)

    def test_symmetry(self, rng):
        a, b = rng.uniform(size=(5, 5)), rng.uniform(size=(5, 5))
        assert psnr(a, b) == psnr(b, a)

    def test_monotone_in_mse(self, rng):
        base = rng.uniform(0.3, 0.7, size=(8, 8))
        for _ in range(10):
            small = base + rng.uniform(0.0, 0.01, size=(8, 8))
            large = base + rng.uniform(0.05, 0.1, size=(8, 8))
            assert psnr(base, small) > psnr(base, large)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((2, 2)), np.zeros((3, 3)))

    def test_peak_validation(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((2, 2)), np.ones((2, 2)), peak=0.0)
