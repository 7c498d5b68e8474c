"""Undecimated single-level Haar analysis and synthesis.

The bank holds four analysis stencils built from the 2x2 Haar pair (embedded
in odd 3x3 supports so every kernel is centered): one low-pass LL and three
directional high-pass bands LH, HL, HH. Because the four analysis stencils
sum to the identity tap, synthesis is the plain pointwise sum of the bands,
realized here as 1x1 identity kernels. That makes the round trip

    synthesize(analyze(x)) == x

exact to machine precision for any size, boundaries included.

Band orientation: LH is high-pass along rows (horizontal structure), HL is
high-pass along columns (vertical edges), HH along both diagonals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .operators import Kernel2D, correlate_channelwise

BAND_NAMES = ("LH", "HL", "HH")


@dataclass(frozen=True)
class WaveletBank:
    """Analysis/synthesis stencil set for the undecimated transform."""

    low_analysis: Kernel2D
    high_analysis: tuple
    low_synthesis: Kernel2D
    high_synthesis: tuple

    @property
    def n_high(self) -> int:
        return len(self.high_analysis)


@dataclass(frozen=True)
class WaveletPyramid:
    """One low band plus M same-size high bands, each shaped (H, W, C)."""

    low: np.ndarray
    high: tuple

    def __post_init__(self):
        for band in self.high:
            if band.shape != self.low.shape:
                raise DimensionError(
                    f"band shape {band.shape} != low band {self.low.shape}"
                )


def haar_bank() -> WaveletBank:
    """Build the undecimated 2x2 Haar bank.

    High-pass taps sum to zero, the low-pass taps sum to one, and the four
    analysis stencils sum to the Kronecker delta, which is what licenses the
    identity-synthesis construction.
    """
    lo = np.array([0.0, 0.5, 0.5])
    hi = np.array([0.0, 0.5, -0.5])
    ll = np.outer(lo, lo)
    lh = np.outer(hi, lo)
    hl = np.outer(lo, hi)
    hh = np.outer(hi, hi)
    ident = np.ones((1, 1, 1, 1))

    def k(t):
        return Kernel2D(t[None, None, :, :])

    return WaveletBank(
        low_analysis=k(ll),
        high_analysis=(k(lh), k(hl), k(hh)),
        low_synthesis=Kernel2D(ident),
        high_synthesis=(Kernel2D(ident),) * 3,
    )


def analyze(x, bank: WaveletBank) -> WaveletPyramid:
    """Split an image into its low band and M high bands, per channel."""
    x = np.asarray(x, dtype=np.float64)
    low = correlate_channelwise(x, bank.low_analysis.taps[0, 0])
    high = tuple(
        correlate_channelwise(x, kk.taps[0, 0]) for kk in bank.high_analysis
    )
    return WaveletPyramid(low=low, high=high)


def synthesize(pyramid: WaveletPyramid, bank: WaveletBank) -> np.ndarray:
    """Reconstruct an image from a pyramid.

    Computes low_synthesis applied to the low band plus the sum over bands of
    high_synthesis applied to each high band.
    """
    if len(pyramid.high) != bank.n_high:
        raise DimensionError(
            f"pyramid has {len(pyramid.high)} high bands, bank expects {bank.n_high}"
        )
    out = correlate_channelwise(pyramid.low, bank.low_synthesis.taps[0, 0])
    for band, kk in zip(pyramid.high, bank.high_synthesis):
        out = out + correlate_channelwise(band, kk.taps[0, 0])
    return out
