"""Distortion metrics, including an SSIM cross-check against scikit-image."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from skimage.metrics import structural_similarity

from diffrx.errors import InvalidInputError
from diffrx.metrics import (
    MetricsReport,
    moment_diagnostics,
    psnr,
    report_batch,
    rmse,
    ssim,
)


class TestRmse:
    def test_hand_value(self):
        # mse = (9 + 16)/2 = 12.5
        assert_allclose(rmse(np.zeros(2), np.array([3.0, 4.0])),
                        math.sqrt(12.5), atol=1e-12)

    def test_zero_on_identical(self):
        x = np.random.default_rng(0).standard_normal((4, 5))
        assert rmse(x, x) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            rmse(np.zeros(3), np.zeros(4))


class TestPsnr:
    def test_twenty_db(self):
        a = np.zeros(100)
        b = np.full(100, 0.1)  # mse = 0.01
        assert_allclose(psnr(a, b), 20.0, atol=1e-12)

    def test_zero_db(self):
        assert_allclose(psnr(np.zeros(10), np.ones(10)), 0.0, atol=1e-12)

    def test_identical_inputs_hit_the_cap(self):
        x = np.random.default_rng(1).random((8, 8))
        assert psnr(x, x) == 100.0

    def test_tiny_error_also_capped(self):
        a = np.zeros(4)
        b = np.full(4, 1e-12)
        assert psnr(a, b) == 100.0

    def test_peak_shifts_by_twenty_log(self):
        a = np.zeros(50)
        b = np.full(50, 0.1)
        assert_allclose(psnr(a, b, peak=2.0) - psnr(a, b, peak=1.0),
                        20.0 * math.log10(2.0), atol=1e-12)

    def test_rejects_bad_peak(self):
        with pytest.raises(InvalidInputError):
            psnr(np.zeros(4), np.zeros(4), peak=0.0)


class TestSsim:
    def test_identical_images_score_one(self):
        img = np.random.default_rng(2).random((16, 16))
        assert_allclose(ssim(img, img), 1.0, atol=1e-12)

    def test_constant_images_at_opposite_levels(self):
        """All-zero vs all-one: only the luminance stabilizer survives.

        Means 0 and 1, variances 0: the score reduces to C1/(1 + C1)
        with C1 = 1e-4.
        """
        zero = np.zeros((16, 16))
        one = np.ones((16, 16))
        want = 1e-4 / (1.0 + 1e-4)
        assert_allclose(ssim(zero, one), want, atol=1e-12)
        assert_allclose(ssim(zero, one), 9.9990001e-5, atol=1e-12)

    def test_imperceptible_noise_scores_near_one(self):
        rng = np.random.default_rng(3)
        img = rng.random((32, 32))
        noisy = img + 1e-6 * rng.standard_normal((32, 32))
        assert ssim(img, noisy) >= 0.9999

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_agrees_with_reference_implementation(self, seed):
        """Box window, population statistics: the scikit-image settings
        that correspond are an odd win_size with use_sample_covariance
        off and gaussian_weights off."""
        rng = np.random.default_rng(seed)
        a = rng.random((32, 32))
        b = np.clip(a + 0.15 * rng.standard_normal((32, 32)), 0.0, 1.0)
        mine = ssim(a, b, window=7, peak=1.0)
        ref = structural_similarity(a, b, win_size=7, data_range=1.0,
                                    gaussian_weights=False,
                                    use_sample_covariance=False)
        assert_allclose(mine, ref, atol=1e-10)

    def test_stacked_input_matches_per_image_calls(self):
        rng = np.random.default_rng(4)
        a = rng.random((3, 12, 12))
        b = rng.random((3, 12, 12))
        stacked = ssim(a, b, window=5)
        assert stacked.shape == (3,)
        for i in range(3):
            assert_allclose(stacked[i], ssim(a[i], b[i], window=5), atol=1e-12)

    def test_window_must_fit(self):
        with pytest.raises(InvalidInputError):
            ssim(np.zeros((4, 4)), np.zeros((4, 4)), window=5)

    def test_window_equal_to_side_is_allowed(self):
        img = np.random.default_rng(5).random((8, 8))
        assert_allclose(ssim(img, img, window=8), 1.0, atol=1e-12)

    def test_single_pixel_window(self):
        # degenerate but legal: variance terms vanish, luminance drives it
        img = np.random.default_rng(6).random((4, 4))
        out = ssim(img, img, window=1)
        assert_allclose(out, 1.0, atol=1e-12)


class TestMoments:
    def test_variance_recovery(self):
        rng = np.random.default_rng(7)
        batch = 0.5 * rng.standard_normal((100_000, 4))
        report = moment_diagnostics(batch)
        assert_allclose(report.pooled_energy, 0.25, rtol=1e-2)
        assert abs(report.pooled_mean) < 0.01
        assert report.energy.shape == (4,)

    def test_single_vector(self):
        report = moment_diagnostics(np.array([1.0, -1.0]))
        assert report.pooled_energy == 1.0

    def test_rejects_empty(self):
        with pytest.raises(InvalidInputError):
            moment_diagnostics(np.empty((0, 3)))


class TestReportBatch:
    def test_composes_the_individual_metrics(self):
        rng = np.random.default_rng(8)
        x_true = rng.random((6, 64))
        x_hat = np.clip(x_true + 0.05 * rng.standard_normal((6, 64)), 0, 1)
        report = report_batch(x_true, x_hat, shape=(8, 8), latent_mse=0.123)
        assert report.latent_mse == 0.123
        assert_allclose(report.rmse, rmse(x_true, x_hat), atol=1e-12)
        per_psnr = [psnr(x_true[i], x_hat[i]) for i in range(6)]
        assert_allclose(report.psnr_db, np.mean(per_psnr), atol=1e-12)
        per_ssim = [ssim(x_true[i].reshape(8, 8), x_hat[i].reshape(8, 8))
                    for i in range(6)]
        assert_allclose(report.ssim, np.mean(per_ssim), atol=1e-12)

    def test_identical_batch_hits_psnr_cap(self):
        x = np.random.default_rng(9).random((3, 16))
        report = report_batch(x, x, shape=(4, 4), latent_mse=0.0)
        assert report.psnr_db == 100.0
        assert_allclose(report.ssim, 1.0, atol=1e-12)

    def test_window_shrinks_to_thin_images(self):
        # d with no square root: latents viewed as 1 x d strips
        x = np.random.default_rng(10).random((4, 6))
        report = report_batch(x, x, shape=(1, 6), latent_mse=0.0)
        assert_allclose(report.ssim, 1.0, atol=1e-12)

    def test_shape_validation(self):
        x = np.zeros((2, 16))
        with pytest.raises(InvalidInputError):
            report_batch(x, x, shape=(3, 5), latent_mse=0.0)

    def test_report_validation(self):
        with pytest.raises(InvalidInputError):
            MetricsReport(rmse=-1.0, psnr_db=10.0, ssim=0.5, latent_mse=0.1)
        with pytest.raises(InvalidInputError):
            MetricsReport(rmse=1.0, psnr_db=10.0, ssim=1.5, latent_mse=0.1)
