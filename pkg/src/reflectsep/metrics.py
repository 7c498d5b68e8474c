"""Quality and exclusion metrics for separation results.

All metrics assume float64 images shaped (H, W, C) with intensities nominally
in [0, 1]; psnr and ssim use a fixed data range of 1.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError
from .operators import _check_image, edge_correlation_map, resize_bilinear
from .wavelet import WaveletBank, analyze

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(a, b):
    a = _check_image(a, "first image")
    b = _check_image(b, "second image")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(x, ref) -> float:
    """Peak signal-to-noise ratio in dB against a unit data range.

    Identical inputs return the 100 dB cap rather than infinity.
    """
    x, ref = _check_pair(x, ref)
    mse = float(np.mean((x - ref) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    g = np.exp(-0.5 * ((np.arange(size) - half) / sigma) ** 2)
    w = np.outer(g, g)
    return w / w.sum()


def ssim(x, ref) -> float:
    """Mean structural similarity over all fully interior 11x11 windows.

    Uses the standard Gaussian-weighted statistics (sigma 1.5, K1 = 0.01,
    K2 = 0.03, data range 1) per channel, averaged over channels.
    """
    x, ref = _check_pair(x, ref)
    h, w, c = x.shape
    if min(h, w) < SSIM_WINDOW:
        raise ValueError(
            f"image {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} ssim window"
        )
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2

    def local_mean(img):
        v = sliding_window_view(img, (SSIM_WINDOW, SSIM_WINDOW), axis=(0, 1))
        return np.einsum("hwcij,ij->hwc", v, win, optimize=True)

    mu_x = local_mean(x)
    mu_y = local_mean(ref)
    var_x = local_mean(x * x) - mu_x**2
    var_y = local_mean(ref * ref) - mu_y**2
    cov = local_mean(x * ref) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def exclusion_multiscale(t, r, levels: int = 3, beta_t=None, beta_r=None) -> float:
    """Sum over scales of the Frobenius norm of the co-edge map.

    Level j evaluates the pair downsampled j-1 times by factor 0.5; level 1
    is the original size. Betas default per level as in edge_correlation_map.
    """
    t, r = _check_pair(t, r)
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if 2 ** (levels - 1) > min(t.shape[0], t.shape[1]):
        raise ValueError(
            f"{levels} levels need min side >= {2 ** (levels - 1)}, got {min(t.shape[:2])}"
        )
    total = 0.0
    for j in range(levels):
        if j > 0:
            t = resize_bilinear(t, 0.5)
            r = resize_bilinear(r, 0.5)
        total += float(np.linalg.norm(edge_correlation_map(t, r, beta_t, beta_r)))
    return total


def exclusion_transform(t, r, bank: WaveletBank) -> float:
    """Sum over high bands of ||band(t) * band(r)||_1, the co-detail energy."""
    t, r = _check_pair(t, r)
    pt = analyze(t, bank)
    pr = analyze(r, bank)
    return float(
        sum(np.sum(np.abs(bt * br)) for bt, br in zip(pt.high, pr.high))
    )


def reconstruction_loss(t, t_hat, r, r_hat, decoded_t=None, decoded_r=None) -> float:
    """Sum of squared Frobenius distances of estimates to references.

    Adds ||t - decoded_t||^2 and ||r - decoded_r||^2 when the decoded images
    are supplied, mirroring the solver's dictionary coupling.
    """
    t, t_hat = _check_pair(t, t_hat)
    r, r_hat = _check_pair(r, r_hat)
    total = float(np.sum((t - t_hat) ** 2) + np.sum((r - r_hat) ** 2))
    if decoded_t is not None:
        total += float(np.sum((t - np.asarray(decoded_t)) ** 2))
    if decoded_r is not None:
        total += float(np.sum((r - np.asarray(decoded_r)) ** 2))
    return total


@dataclass
class MetricsReport:
    """Flat metric bundle; None marks metrics whose inputs were not given."""

    psnr_t: Optional[float]
    psnr_r: Optional[float]
    ssim_t: Optional[float]
    ssim_r: Optional[float]
    excl_multiscale: Optional[float]
    excl_transform: Optional[float]
    recon: Optional[float]

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(asdict(self), indent=indent, sort_keys=True)
