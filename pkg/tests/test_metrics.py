import numpy as np
import pytest
from skimage.metrics import peak_signal_noise_ratio, structural_similarity

from livewarp.metrics import l1, psnr, ssim


def random_pair(rng, shape=(64, 64)):
    a = rng.random(shape)
    b = np.clip(a + rng.normal(scale=0.05, size=shape), 0.0, 1.0)
    return a, b


class TestPsnr:
    def test_identical_images_capped(self):
        img = np.random.default_rng(0).random((32, 32))
        assert psnr(img, img) == 99.0

    def test_known_mse(self):
        a = np.zeros((10, 10))
        b = np.full((10, 10), 0.1)
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)

    def test_matches_skimage(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            a, b = random_pair(rng)
            ref = peak_signal_noise_ratio(a, b, data_range=1.0)
            assert psnr(a, b) == pytest.approx(ref, rel=1e-9)

    def test_uint8_inputs_normalized(self):
        rng = np.random.default_rng(2)
        a = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
        b = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
        ref = peak_signal_noise_ratio(a / 255.0, b / 255.0, data_range=1.0)
        assert psnr(a, b) == pytest.approx(ref, rel=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((4, 4)), np.zeros((4, 5)))


class TestL1:
    def test_known_value(self):
        a = np.zeros((4, 4))
        b = np.full((4, 4), 0.25)
        assert l1(a, b) == pytest.approx(0.25)

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        a, b = random_pair(rng)
        assert l1(a, b) == pytest.approx(l1(b, a))


class TestSsim:
    def test_identical_is_one(self):
        img = np.random.default_rng(4).random((48, 48))
        assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)

    def test_matches_skimage_gaussian(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            a, b = random_pair(rng)
            ref = structural_similarity(
                a, b, data_range=1.0, gaussian_weights=True, sigma=1.5,
                use_sample_covariance=False,
            )
            assert ssim(a, b) == pytest.approx(ref, abs=2e-3)

    def test_multichannel_is_channel_mean(self):
        rng = np.random.default_rng(6)
        a = rng.random((32, 32, 3))
        b = np.clip(a + rng.normal(scale=0.03, size=a.shape), 0, 1)
        per_channel = [ssim(a[..., c], b[..., c]) for c in range(3)]
        assert ssim(a, b) == pytest.approx(float(np.mean(per_channel)), abs=1e-12)

    def test_degrades_with_noise(self):
        rng = np.random.default_rng(7)
        a = rng.random((48, 48))
        small = np.clip(a + rng.normal(scale=0.02, size=a.shape), 0, 1)
        big = np.clip(a + rng.normal(scale=0.2, size=a.shape), 0, 1)
        assert ssim(a, small) > ssim(a, big)
