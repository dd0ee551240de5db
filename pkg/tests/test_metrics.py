import numpy as np
import pytest
from skimage.metrics import structural_similarity

from phasekit import phase_image, psnr, ssim, wrap_phase


class TestSsim:
    def test_identical_images_give_one(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 255, (32, 32))
        assert ssim(x, x, 255.0) == pytest.approx(1.0, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(0, 255, (32, 32))
        b = rng.uniform(0, 255, (32, 32))
        assert ssim(a, b, 255.0) == pytest.approx(ssim(b, a, 255.0), abs=1e-12)

    def test_inverted_structure_is_negative(self):
        rng = np.random.default_rng(2)
        # zero-mean structured image with local variance well above C2
        x = rng.normal(0.0, 80.0, (64, 64))
        assert ssim(x, -x + 255.0, 255.0) < 0.0

    def test_bounded(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            a = rng.uniform(0, 255, (24, 24))
            b = rng.uniform(0, 255, (24, 24))
            value = ssim(a, b, 255.0)
            assert -1.0 <= value <= 1.0

    def test_matches_reference_implementation(self):
        rng = np.random.default_rng(4)
        for _ in range(4):
            a = rng.uniform(0, 255, (48, 48))
            b = np.clip(a + rng.normal(0, 25, a.shape), 0, 255)
            expected = structural_similarity(
                a, b, win_size=11, gaussian_weights=True, sigma=1.5,
                use_sample_covariance=False, data_range=255.0,
            )
            assert ssim(a, b, 255.0) == pytest.approx(expected, abs=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            ssim(np.zeros((16, 16)), np.zeros((16, 17)), 255.0)

    def test_bad_dynamic_range(self):
        with pytest.raises(ValueError):
            ssim(np.zeros((16, 16)), np.zeros((16, 16)), 0.0)


class TestPsnr:
    def test_identical_images_give_inf(self):
        x = np.linspace(0, 255, 64).reshape(8, 8)
        assert psnr(x, x, 255.0) == float("inf")

    def test_unit_mse_at_peak_255(self):
        a = np.zeros((16, 16))
        b = np.ones((16, 16))
        assert psnr(a, b, 255.0) == pytest.approx(48.1308, abs=1e-3)

    def test_halving_error_gains_six_db(self):
        rng = np.random.default_rng(5)
        truth = rng.uniform(0, 255, (32, 32))
        err = rng.normal(0, 10, truth.shape)
        gain = psnr(truth + 0.5 * err, truth, 255.0) - psnr(truth + err, truth, 255.0)
        assert gain == pytest.approx(20.0 * np.log10(2.0), abs=1e-12)
        assert gain == pytest.approx(6.0206, abs=1e-3)

    def test_monotone_in_mse(self):
        truth = np.zeros((16, 16))
        values = [psnr(truth + scale, truth, 255.0) for scale in (1.0, 2.0, 4.0)]
        assert values[0] > values[1] > values[2]

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((16, 16)), np.zeros((17, 16)), 255.0)


class TestPhaseImage:
    def test_fixed_scaling(self):
        field = np.exp(1j * np.array([[0.0, np.pi], [3 * np.pi / 2, 2 * np.pi - 1e-9]]))
        img = phase_image(field)
        assert img[0, 0] == pytest.approx(0.0, abs=1e-6)
        assert img[0, 1] == pytest.approx(127.5, abs=1e-9)
        assert img[1, 0] == pytest.approx(191.25, abs=1e-9)
        assert img[1, 1] <= 255.0

    def test_consistent_with_wrap_phase(self):
        rng = np.random.default_rng(6)
        field = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        assert np.allclose(phase_image(field), wrap_phase(field) * 255.0 / (2 * np.pi))
