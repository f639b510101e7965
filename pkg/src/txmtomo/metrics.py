"""Evaluation metrics: RMSE inside the field of view and SSIM.

The FOV is the inscribed circle of the reconstruction grid (lateral
truncation makes values outside it meaningless). SSIM follows the canonical
parameterization: 11x11 Gaussian window with sigma 1.5, K1 = 0.01,
K2 = 0.03; the mean local score can optionally be restricted to a mask so
both in-FOV and full-image values are available.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import convolve

from .phantom import Slice

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def fov_mask(size: int) -> np.ndarray:
    """Boolean mask of the inscribed circle, symmetric under 90-degree rotation."""
    if size <= 0:
        raise ValueError("size must be positive")
    c = (size - 1) / 2.0
    idx = np.arange(size) - c
    return idx[None, :] ** 2 + idx[:, None] ** 2 <= (size / 2.0) ** 2


def _as_array(img) -> np.ndarray:
    return np.asarray(img.data if isinstance(img, Slice) else img, dtype=float)


def rmse_fov(image, reference, mask: np.ndarray | None = None) -> float:
    """sqrt(mean squared difference) over the masked pixels, in 1/um."""
    a = _as_array(image)
    b = _as_array(reference)
    if a.shape != b.shape:
        raise ValueError("image and reference shapes must match")
    if mask is None:
        mask = fov_mask(a.shape[0]) if a.shape[0] == a.shape[1] else np.ones(a.shape, bool)
    if mask.shape != a.shape:
        raise ValueError("mask shape must match the images")
    if not mask.any():
        raise ValueError("mask selects no pixels")
    diff = a[mask] - b[mask]
    return float(np.sqrt(np.mean(diff ** 2)))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(image, reference, dynamic_range: float | None = None,
         mask: np.ndarray | None = None) -> float:
    """Mean local SSIM between two images.

    dynamic_range defaults to reference max - min; mask (when given)
    restricts the mean of the per-pixel SSIM map. Value is in [-1, 1] and
    equals 1 iff the images agree everywhere.
    """
    a = _as_array(image)
    b = _as_array(reference)
    if a.shape != b.shape:
        raise ValueError("image and reference shapes must match")
    if dynamic_range is None:
        dynamic_range = float(b.max() - b.min())
        if dynamic_range == 0.0:
            dynamic_range = 1.0
    if dynamic_range <= 0:
        raise ValueError("dynamic_range must be positive")

    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * dynamic_range) ** 2
    c2 = (SSIM_K2 * dynamic_range) ** 2

    def smooth(x):
        return convolve(x, win, mode="reflect")

    mu_a = smooth(a)
    mu_b = smooth(b)
    var_a = smooth(a * a) - mu_a ** 2
    var_b = smooth(b * b) - mu_b ** 2
    cov = smooth(a * b) - mu_a * mu_b
    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)
                / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))
    if mask is not None:
        if mask.shape != a.shape:
            raise ValueError("mask shape must match the images")
        if not mask.any():
            raise ValueError("mask selects no pixels")
        return float(ssim_map[mask].mean())
    return float(ssim_map.mean())
