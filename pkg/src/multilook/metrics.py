"""Image quality metrics: MSE, PSNR, SSIM (fixed constants, peak = 1)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import StructuralError, ValidationError

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricReport:
    mse: float
    psnr_db: float
    ssim: float


def _check_pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise StructuralError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _check_pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10 log10(1 / mse) for pixels in [0, 1], capped at 99 dB."""
    err = mse(a, b)
    if err == 0.0:
        return PSNR_CAP_DB
    return min(float(-10.0 * np.log10(err)), PSNR_CAP_DB)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def _filter_valid(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    return fftconvolve(img, window, mode="valid")


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01,
    K2=0.03, dynamic range 1.  Border windows are excluded (valid mode)."""
    a, b = _check_pair(a, b)
    if min(a.shape) < SSIM_WINDOW:
        raise ValidationError(f"images must be at least {SSIM_WINDOW} pixels per side")
    win = _gaussian_window()
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    mu_a = _filter_valid(a, win)
    mu_b = _filter_valid(b, win)
    var_a = _filter_valid(a * a, win) - mu_a ** 2
    var_b = _filter_valid(b * b, win) - mu_b ** 2
    cov = _filter_valid(a * b, win) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def report(a: np.ndarray, b: np.ndarray) -> MetricReport:
    return MetricReport(mse=mse(a, b), psnr_db=psnr(a, b), ssim=ssim(a, b))
