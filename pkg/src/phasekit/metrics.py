"""Image-quality metrics for quantitative assessment of reconstructions.

SSIM follows the standard definition: mean of the local similarity map
computed with an 11x11 Gaussian window (sigma 1.5) and stabilizers
C1 = (0.01*L)^2, C2 = (0.03*L)^2 for dynamic range L.  Phase channels are
compared after the same fixed 0..2*pi -> 0..255 scaling used for the
phase rasters.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from .priors import wrap_phase

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(offsets**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(a: np.ndarray, b: np.ndarray, dynamic_range: float) -> float:
    """Mean structural similarity between two equally sized images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if not dynamic_range > 0:
        raise ValueError("dynamic_range must be > 0")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels on each side")

    win = _gaussian_window()
    mu_a = fftconvolve(a, win, mode="valid")
    mu_b = fftconvolve(b, win, mode="valid")
    mu_aa = fftconvolve(a * a, win, mode="valid")
    mu_bb = fftconvolve(b * b, win, mode="valid")
    mu_ab = fftconvolve(a * b, win, mode="valid")

    var_a = np.maximum(mu_aa - mu_a**2, 0.0)
    var_b = np.maximum(mu_bb - mu_b**2, 0.0)
    cov = mu_ab - mu_a * mu_b

    c1 = (0.01 * dynamic_range) ** 2
    c2 = (0.03 * dynamic_range) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def psnr(a: np.ndarray, b: np.ndarray, peak: float) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if not peak > 0:
        raise ValueError("peak must be > 0")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak**2 / mse))


def phase_image(field: np.ndarray) -> np.ndarray:
    """Wrapped phase of a complex field scaled onto [0, 255].

    This is the fixed 0..2*pi -> 0..255 display mapping, so metric values
    are comparable across reconstructions of the same scene.
    """
    return wrap_phase(field) * (255.0 / (2.0 * np.pi))
