"""Image metrics: PSNR, single-scale SSIM, and rendered-normal MSE."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate

from ..errors import ShapeMismatch

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
PSNR_CAP = 100.0


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(img_a: np.ndarray, img_b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for [0, 1] images, capped at 100."""
    a, b = _check_pair(img_a, img_b)
    mse = float(((a - b) ** 2).mean())
    if mse <= 0.0:
        return PSNR_CAP
    return min(float(10.0 * np.log10(1.0 / mse)), PSNR_CAP)


def _gaussian_kernel() -> np.ndarray:
    half = (SSIM_WINDOW - 1) / 2.0
    x = np.arange(SSIM_WINDOW) - half
    g = np.exp(-(x**2) / (2.0 * SSIM_SIGMA**2))
    g /= g.sum()
    return np.outer(g, g)


_KERNEL = _gaussian_kernel()


def _windowed(img: np.ndarray) -> np.ndarray:
    """Gaussian-weighted local means, cropped to fully valid windows."""
    out = correlate(img, _KERNEL, mode="constant")
    m = SSIM_WINDOW // 2
    return out[m:-m, m:-m]


def ssim(img_a: np.ndarray, img_b: np.ndarray) -> float:
    """Mean single-scale SSIM over valid 11x11 Gaussian windows and channels."""
    a, b = _check_pair(img_a, img_b)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ShapeMismatch(f"images smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    vals = []
    for ch in range(a.shape[2]):
        x, y = a[..., ch], b[..., ch]
        mu_x, mu_y = _windowed(x), _windowed(y)
        var_x = _windowed(x * x) - mu_x**2
        var_y = _windowed(y * y) - mu_y**2
        cov = _windowed(x * y) - mu_x * mu_y
        num = (2 * mu_x * mu_y + SSIM_C1) * (2 * cov + SSIM_C2)
        den = (mu_x**2 + mu_y**2 + SSIM_C1) * (var_x + var_y + SSIM_C2)
        vals.append((num / den).mean())
    return float(np.mean(vals))


def normal_mse(pred_renders: list[np.ndarray], gt_renders: list[np.ndarray]) -> float:
    """MSE between encoded normal images, averaged over the yaw set."""
    if len(pred_renders) != len(gt_renders):
        raise ShapeMismatch(f"yaw sets differ: {len(pred_renders)} vs {len(gt_renders)}")
    if not pred_renders:
        raise ShapeMismatch("empty yaw set")
    per_yaw = []
    for p, g in zip(pred_renders, gt_renders):
        p, g = _check_pair(p, g)
        per_yaw.append(((p - g) ** 2).mean())
    return float(np.mean(per_yaw))
