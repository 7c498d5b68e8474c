"""Image-tensor primitives shared by every stage of the separation pipeline.

Images and feature maps are float64 arrays of shape (H, W, B), where B counts
color channels or coefficient bands. This module provides:

    conv_apply / conv_adjoint   same-size multi-channel convolution and its
                                exact adjoint, <conv_apply(x), y> = <x, conv_adjoint(y)>
    correlate_channelwise       one 2-D stencil applied to every band
    resize_bilinear             half/double resampling with half-pixel centers
    spatial_gradient            forward differences, replicated last row/column
    edge_correlation_map        elementwise co-edge response of two images

All functions are pure and never mutate their arguments. Boundaries use
symmetric reflection; apply and adjoint share one index map so the adjoint
identity holds to machine precision, boundaries included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError


@dataclass(frozen=True)
class Kernel2D:
    """Bank of square odd-sized convolution taps, shape (out, in, k, k).

    Immutable after construction; the tap array is copied and write-locked.
    """

    taps: np.ndarray

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.float64)
        if taps.ndim != 4:
            raise DimensionError(f"kernel taps must be 4-D, got {taps.ndim}-D")
        k1, k2 = taps.shape[2], taps.shape[3]
        if k1 != k2:
            raise DimensionError(f"kernel support must be square, got {k1}x{k2}")
        if k1 % 2 == 0:
            raise ValueError(f"kernel side must be odd, got {k1}")
        if not np.all(np.isfinite(taps)):
            raise ValueError("kernel taps must be finite")
        taps.flags.writeable = False
        object.__setattr__(self, "taps", taps)

    @property
    def out_channels(self) -> int:
        return self.taps.shape[0]

    @property
    def in_channels(self) -> int:
        return self.taps.shape[1]

    @property
    def k(self) -> int:
        return self.taps.shape[2]


def _check_image(x, name="image") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionError(f"{name} must have shape (H, W, B), got {x.shape}")
    if x.shape[0] < 1 or x.shape[1] < 1 or x.shape[2] < 1:
        raise DimensionError(f"{name} has an empty axis: {x.shape}")
    return x


def _reflect_indices(n: int, pad: int) -> np.ndarray:
    """Source indices realizing symmetric reflection padding of width ``pad``.

    Returns an int array of length n + 2*pad with values in [0, n). Both
    conv_apply and conv_adjoint index through this map, which is what makes
    them exact adjoints of one another.
    """
    idx = np.arange(-pad, n + pad)
    idx = np.mod(idx, 2 * n)
    return np.where(idx < n, idx, 2 * n - 1 - idx)


def _pad_reflect(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    ii = _reflect_indices(x.shape[0], pad)
    jj = _reflect_indices(x.shape[1], pad)
    return x[ii][:, jj]


def conv_apply(x, kernels: Kernel2D) -> np.ndarray:
    """Same-size multi-channel correlation with symmetric boundary handling.

    Args:
        x: array (H, W, in_channels).
        kernels: Kernel2D with taps (out_channels, in_channels, k, k).

    Returns:
        Array (H, W, out_channels); output band b is the sum over input
        bands c of the 2-D correlation of x[..., c] with taps[b, c].
    """
    x = _check_image(x, "input")
    if x.shape[2] != kernels.in_channels:
        raise DimensionError(
            f"input has {x.shape[2]} bands, kernel expects {kernels.in_channels}"
        )
    p = kernels.k // 2
    xp = _pad_reflect(x, p)
    win = sliding_window_view(xp, (kernels.k, kernels.k), axis=(0, 1))
    return np.einsum("hwcij,bcij->hwb", win, kernels.taps, optimize=True)


def conv_adjoint(y, kernels: Kernel2D) -> np.ndarray:
    """Exact adjoint of :func:`conv_apply` for the same kernel bank.

    Args:
        y: array (H, W, out_channels).
        kernels: the Kernel2D used in the forward direction.

    Returns:
        Array (H, W, in_channels) satisfying
        <conv_apply(x, kernels), y> = <x, conv_adjoint(y, kernels)>
        for every x, to floating-point precision.
    """
    y = _check_image(y, "input")
    if y.shape[2] != kernels.out_channels:
        raise DimensionError(
            f"input has {y.shape[2]} bands, kernel produces {kernels.out_channels}"
        )
    h, w, _ = y.shape
    k = kernels.k
    p = k // 2
    # Scatter step: adjoint of the valid-mode correlation over the padded grid.
    zp = np.zeros((h + 2 * p, w + 2 * p, kernels.in_channels))
    for di in range(k):
        for dj in range(k):
            zp[di : di + h, dj : dj + w, :] += y @ kernels.taps[:, :, di, dj]
    if p == 0:
        return zp
    # Fold step: adjoint of reflection padding sends each border cell back to
    # the interior cell it mirrored.
    ii = _reflect_indices(h, p)
    jj = _reflect_indices(w, p)
    out = np.zeros((h, w, kernels.in_channels))
    np.add.at(out, (ii[:, None], jj[None, :]), zp)
    return out


def correlate_channelwise(x, taps) -> np.ndarray:
    """Correlate every band of ``x`` with one 2-D stencil (odd square taps)."""
    x = _check_image(x, "input")
    taps = np.asarray(taps, dtype=np.float64)
    if taps.ndim != 2 or taps.shape[0] != taps.shape[1]:
        raise DimensionError(f"stencil must be square 2-D, got {taps.shape}")
    if taps.shape[0] % 2 == 0:
        raise ValueError("stencil side must be odd")
    p = taps.shape[0] // 2
    xp = _pad_reflect(x, p)
    win = sliding_window_view(xp, taps.shape, axis=(0, 1))
    return np.einsum("hwcij,ij->hwc", win, taps, optimize=True)


def resize_bilinear(x, factor) -> np.ndarray:
    """Bilinear resampling by a factor of 0.5 or 2 with half-pixel centers.

    Downsampling averages disjoint 2x2 blocks (odd sizes are first padded to
    even by edge replication). Upsampling doubles each axis; samples outside
    the grid clamp to the edge. Constant images map to the same constant
    exactly, and linear ramps are reproduced exactly away from the border.
    """
    x = _check_image(x, "input")
    if factor == 0.5:
        h, w, _ = x.shape
        if h % 2 or w % 2:
            x = np.pad(x, ((0, h % 2), (0, w % 2), (0, 0)), mode="edge")
        return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])
    if factor == 2:
        return _up2(_up2(x, axis=0), axis=1)
    raise ValueError(f"factor must be 0.5 or 2, got {factor!r}")


def _up2(x: np.ndarray, axis: int) -> np.ndarray:
    x = np.moveaxis(x, axis, 0)
    lo = np.concatenate([x[:1], x[:-1]], axis=0)
    hi = np.concatenate([x[1:], x[-1:]], axis=0)
    out = np.empty((2 * x.shape[0],) + x.shape[1:], dtype=x.dtype)
    # Written as x + correction so constants pass through bit-exactly.
    out[0::2] = x + 0.25 * (lo - x)
    out[1::2] = x + 0.25 * (hi - x)
    return np.moveaxis(out, 0, axis)


def spatial_gradient(x):
    """Forward differences along x (columns) and y (rows).

    The last column of gx and last row of gy are zero, matching replication
    of the final sample. Returns (gx, gy), each shaped like ``x``.
    """
    x = _check_image(x, "input")
    gx = np.zeros_like(x)
    gy = np.zeros_like(x)
    gx[:, :-1] = x[:, 1:] - x[:, :-1]
    gy[:-1, :] = x[1:, :] - x[:-1, :]
    return gx, gy


def _edge_magnitude(x: np.ndarray) -> np.ndarray:
    gx, gy = spatial_gradient(x)
    return np.sum(np.abs(gx) + np.abs(gy), axis=2, keepdims=True)


def edge_correlation_map(t, r, beta_t=None, beta_r=None) -> np.ndarray:
    """Elementwise co-edge response tanh(beta_t*|grad t|) * tanh(beta_r*|grad r|).

    Gradient magnitudes are summed over x/y and channels, giving one band.
    When a beta is None it defaults to the reciprocal of the mean gradient
    magnitude of that image (floored at 1e-6), which makes the map invariant
    to a global rescaling of intensities.

    Args:
        t, r: images (H, W, C) with matching shapes.
        beta_t, beta_r: positive saturation slopes, or None for the default.

    Returns:
        Single-band map (H, W, 1) with values in [0, 1).
    """
    t = _check_image(t, "first image")
    r = _check_image(r, "second image")
    if t.shape != r.shape:
        raise DimensionError(f"shape mismatch: {t.shape} vs {r.shape}")
    gt = _edge_magnitude(t)
    gr = _edge_magnitude(r)
    if beta_t is None:
        beta_t = 1.0 / max(float(gt.mean()), 1e-6)
    if beta_r is None:
        beta_r = 1.0 / max(float(gr.mean()), 1e-6)
    if beta_t <= 0 or beta_r <= 0:
        raise ValueError("beta parameters must be positive")
    return np.tanh(beta_t * gt) * np.tanh(beta_r * gr)
