"""Image quality metrics: PSNR, L1, SSIM (11x11 Gaussian window)."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

PSNR_CAP = 99.0
SSIM_SIGMA = 1.5
SSIM_TRUNCATE = 3.5  # radius 5 -> 11x11 window
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")


def to_float01(img: np.ndarray) -> np.ndarray:
    if img.dtype == np.uint8:
        return img.astype(np.float64) / 255.0
    return img.astype(np.float64)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10*log10(1/MSE) on [0,1] images, capped at 99 dB for identical inputs."""
    _check(a, b)
    mse = float(np.mean((to_float01(a) - to_float01(b)) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def l1(a: np.ndarray, b: np.ndarray) -> float:
    _check(a, b)
    return float(np.mean(np.abs(to_float01(a) - to_float01(b))))


def _ssim_single(x: np.ndarray, y: np.ndarray) -> float:
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    blur = lambda im: gaussian_filter(im, sigma=SSIM_SIGMA, truncate=SSIM_TRUNCATE)
    ux = blur(x)
    uy = blur(y)
    uxx = blur(x * x)
    uyy = blur(y * y)
    uxy = blur(x * y)
    vx = uxx - ux * ux
    vy = uyy - uy * uy
    vxy = uxy - ux * uy
    s = ((2 * ux * uy + c1) * (2 * vxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
    pad = 5
    return float(s[pad:-pad, pad:-pad].mean())


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean SSIM with a Gaussian window (sigma 1.5, 11x11), data range [0,1].

    Multichannel images are averaged over channels; the 5-pixel filter
    border is cropped from the mean.
    """
    _check(a, b)
    x = to_float01(a)
    y = to_float01(b)
    if x.ndim == 2:
        return _ssim_single(x, y)
    return float(np.mean([_ssim_single(x[..., c], y[..., c]) for c in range(x.shape[-1])]))
