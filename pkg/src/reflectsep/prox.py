"""Proximal operators: elementwise soft threshold and the wavelet exclusion prox."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .wavelet import WaveletBank, WaveletPyramid, analyze, synthesize


def soft_threshold(x, theta):
    """sign(x) * max(|x| - theta, 0); theta may be a scalar or per-entry array."""
    x = np.asarray(x, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(theta < 0):
        raise ValueError("threshold must be nonnegative")
    return np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)


def prox_feature(z, theta: float):
    """Proximal map of theta * ||.||_1, applied to a feature map."""
    if np.ndim(theta) != 0:
        raise ValueError("feature threshold must be a scalar")
    return soft_threshold(z, float(theta))


@dataclass(frozen=True)
class ThresholdField:
    """Per-band, per-pixel nonnegative thresholds aligned with high bands."""

    bands: tuple

    def __post_init__(self):
        for b in self.bands:
            if np.any(b < 0):
                raise ValueError("threshold field must be nonnegative")

    @classmethod
    def from_pyramid(cls, pyramid: WaveletPyramid, kappa: float) -> "ThresholdField":
        return cls(tuple(kappa * np.abs(b) for b in pyramid.high))


def prox_exclusion(candidate, other, kappa: float, bank: WaveletBank) -> np.ndarray:
    """Suppress of the candidate's detail wherever the other layer has detail.

    Analyzes both images with the undecimated bank, soft-thresholds each high
    band of the candidate by kappa * |same band of other| pixel by pixel,
    passes the low band through untouched, and synthesizes the result. With
    kappa = 0 this is the identity.

    Args:
        candidate: image to be cleaned, (H, W, C).
        other: image supplying the co-located detail penalty, same shape.
        kappa: nonnegative exclusion weight.
        bank: wavelet bank shared with the solver objective.

    Returns:
        Image of the candidate's shape.
    """
    candidate = np.asarray(candidate, dtype=np.float64)
    other = np.asarray(other, dtype=np.float64)
    if candidate.shape != other.shape:
        raise DimensionError(
            f"shape mismatch: candidate {candidate.shape}, other {other.shape}"
        )
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if kappa == 0:
        return candidate.copy()
    pc = analyze(candidate, bank)
    po = analyze(other, bank)
    field = ThresholdField.from_pyramid(po, kappa)
    high = tuple(
        soft_threshold(band, theta) for band, theta in zip(pc.high, field.bands)
    )
    return synthesize(WaveletPyramid(low=pc.low, high=high), bank)
