"""Synthetic ground-truth pairs and mixture rendering.

A mixture is I = clip(T + gain * blur(R)) with a Gaussian blur standing in
for the out-of-focus reflected layer. The procedural pairs are built so that
for the kinds ``ramp`` and ``checker`` the transmission layer is exactly
constant on the region carrying the reflection (with a margin wider than the
blur support), so the two layers have disjoint wavelet detail by
construction and co-detail baselines are exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .operators import Kernel2D, _check_image, correlate_channelwise

KINDS = ("ramp", "checker", "blobs", "text_edges")


@dataclass(frozen=True)
class MixtureSpec:
    """Rendering parameters for one synthetic mixture."""

    blur_sigma: float = 2.0
    gain: float = 0.6
    clip: bool = True

    def __post_init__(self):
        if self.blur_sigma < 0:
            raise ValueError("blur_sigma must be nonnegative")
        if not 0 <= self.gain <= 1:
            raise ValueError("gain must lie in [0, 1]")


def gaussian_kernel(sigma: float, radius=None) -> Kernel2D:
    """Normalized 2-D Gaussian taps; sigma 0 gives the identity impulse."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return Kernel2D(np.ones((1, 1, 1, 1)))
    if radius is None:
        radius = int(math.ceil(3.0 * sigma))
    if radius < 1:
        raise ValueError("radius must be >= 1 for a positive sigma")
    grid = np.arange(-radius, radius + 1)
    g = np.exp(-0.5 * (grid / sigma) ** 2)
    taps = np.outer(g, g)
    taps /= taps.sum()
    return Kernel2D(taps[None, None])


def gaussian_blur(x, sigma: float, radius=None) -> np.ndarray:
    """Blur every channel with the normalized Gaussian stencil."""
    x = _check_image(x, "input")
    kern = gaussian_kernel(sigma, radius)
    if kern.k == 1:
        return x.copy()
    return correlate_channelwise(x, kern.taps[0, 0])


def synthesize_mixture(t, r, spec: MixtureSpec) -> np.ndarray:
    """Render I = clip(T + gain * blur(R)); clipping per spec.clip."""
    t = _check_image(t, "transmission")
    r = _check_image(r, "reflection")
    if t.shape != r.shape:
        raise DimensionError(f"shape mismatch: {t.shape} vs {r.shape}")
    mix = t + spec.gain * gaussian_blur(r, spec.blur_sigma)
    if spec.clip:
        mix = np.clip(mix, 0.0, 1.0)
    return mix


def _disk(size: int, row: float, col: float, radius: float, amp: float) -> np.ndarray:
    ii, jj = np.mgrid[0:size, 0:size]
    return amp * ((ii - row) ** 2 + (jj - col) ** 2 <= radius**2)


def _gauss_bump(size: int, row: float, col: float, sigma: float, amp: float) -> np.ndarray:
    ii, jj = np.mgrid[0:size, 0:size]
    return amp * np.exp(-(((ii - row) ** 2 + (jj - col) ** 2)) / (2 * sigma**2))


def procedural_pair(kind: str, size: int, seed: int = 0):
    """Deterministic (T, R) layer pair of shape (size, size, 1).

    Kinds:
        ramp: T ramps down along x then goes flat; R is a hard disk strictly
            inside the flat region.
        checker: T ramps down along y then goes flat; R is a checkerboard
            patch strictly inside the flat region.
        blobs: T is a smooth composite of broad bumps; R is a few compact
            bumps. No disjointness guarantee.
        text_edges: T is smooth; R is a set of thin glyph-like strokes.

    T stays within [0.05, 0.9] and R within [0, 0.8].
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    if size < 16:
        raise ValueError(f"size must be >= 16, got {size}")
    rng = np.random.default_rng(seed)
    n = size
    ii, jj = np.mgrid[0:n, 0:n]

    if kind in ("ramp", "checker"):
        knee = n // 4  # flat for coordinates >= knee
        coord = jj if kind == "ramp" else ii
        t = np.where(
            coord < knee,
            0.8 - 0.5 * coord / knee,
            0.3,
        )
        # The reflection sits in the flat region. Its support, widened by the
        # largest bundled blur (radius ceil(3*sigma), sigma <= 3) plus one
        # pixel of wavelet reach, must stay at coordinates > knee, where the
        # transmission carries no detail at all. Patch amplitudes put the
        # mixtures in the mid-20s dB input range typical of reflection
        # benchmarks.
        extent = n / 4.6 if kind == "ramp" else n / 6.4
        margin = 10 + 1
        lo = knee + margin + extent + 1
        hi = n - 4 - extent
        cr = 0.5 * (lo + hi) + rng.uniform(-n / 64, n / 64)
        cc_center = 0.5 * n + rng.uniform(-n / 32, n / 32)
        amp = rng.uniform(0.65, 0.8)
        if kind == "ramp":
            # Polka-dot patch: textured rather than solid, so most of its
            # energy lives in the detail bands rather than the local mean.
            row_c, col_c = cc_center, cr
            dist2 = (ii - row_c) ** 2 + (jj - col_c) ** 2
            spacing = 7
            phase_r = (ii - int(row_c)) % spacing - spacing // 2
            phase_c = (jj - int(col_c)) % spacing - spacing // 2
            dots = (phase_r**2 + phase_c**2) <= 2.6**2
            r = amp * (dots & (dist2 <= extent**2))
        else:
            row_c, col_c = cr, cc_center
            half = int(extent)
            cell = 6
            patch = ((ii // cell + jj // cell) % 2).astype(float)
            inside = (np.abs(ii - row_c) <= half) & (np.abs(jj - col_c) <= half)
            r = amp * patch * inside
    elif kind == "blobs":
        t = np.full((n, n), 0.3)
        for _ in range(3):
            t = t + _gauss_bump(
                n,
                rng.uniform(0.2 * n, 0.8 * n),
                rng.uniform(0.2 * n, 0.8 * n),
                rng.uniform(n / 5, n / 3),
                rng.uniform(0.15, 0.3),
            )
        t = np.clip(t, 0.05, 0.9)
        r = np.zeros((n, n))
        for _ in range(4):
            r = r + _gauss_bump(
                n,
                rng.uniform(0.15 * n, 0.85 * n),
                rng.uniform(0.15 * n, 0.85 * n),
                rng.uniform(n / 24, n / 14),
                rng.uniform(0.3, 0.6),
            )
        r = np.clip(r, 0.0, 0.8)
    else:  # text_edges
        t = 0.25 + 0.35 * ((ii + jj) / (2 * n - 2)) + _gauss_bump(
            n, 0.35 * n, 0.6 * n, n / 3.5, 0.2
        )
        t = np.clip(t, 0.05, 0.9)
        r = np.zeros((n, n))
        for _ in range(6):
            amp = rng.uniform(0.5, 0.75)
            thick = int(rng.integers(1, 3))
            length = int(rng.integers(n // 6, n // 3))
            r0 = int(rng.integers(2, n - thick - 2))
            c0 = int(rng.integers(2, n - 3))
            if rng.random() < 0.5:
                r[r0 : r0 + thick, c0 : min(c0 + length, n - 2)] = amp
            else:
                r[c0 : min(c0 + length, n - 2), r0 : r0 + thick] = amp

    return t[:, :, None].astype(np.float64), r[:, :, None].astype(np.float64)


BUNDLED_SPECS = (
    MixtureSpec(blur_sigma=2.0, gain=0.6, clip=True),
    MixtureSpec(blur_sigma=1.0, gain=0.4, clip=True),
    MixtureSpec(blur_sigma=3.0, gain=0.8, clip=True),
)
BUNDLED_SIZE = 64


def bundled_mixtures():
    """The committed 12-instance suite: every kind under three mixture specs.

    Returns a list of (name, t, r, mixture, spec) tuples, fully determined
    by fixed seeds.
    """
    out = []
    for ki, kind in enumerate(KINDS):
        for si, spec in enumerate(BUNDLED_SPECS):
            seed = 100 + 10 * ki + si
            t, r = procedural_pair(kind, BUNDLED_SIZE, seed=seed)
            mix = synthesize_mixture(t, r, spec)
            out.append((f"{kind}_s{si}", t, r, mix, spec))
    return out
