"""Convolutional dictionaries: construction, coding gradients, persistence.

A dictionary is a bank of N unit-norm atoms, each a (channels, k, k) tap
block. Feature maps z with N bands decode to an image through conv_apply,
and the data-term gradients below use the exact conv adjoint, so they pass
central-difference checks to tight tolerances.

The on-disk format is little-endian: magic "DURD", a u32 version, u32 counts
(n_atoms, k, channels), then the taps as float64 in band-major order (atom,
then channel, then row-major spatial).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .operators import Kernel2D, conv_adjoint, conv_apply

MAGIC = b"DURD"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ConvDictionary:
    """Unit-norm atom bank; filters.taps has shape (channels, n_atoms, k, k)."""

    filters: Kernel2D
    atom_norms: np.ndarray

    @property
    def n_atoms(self) -> int:
        return self.filters.in_channels

    @property
    def channels(self) -> int:
        return self.filters.out_channels

    @property
    def k(self) -> int:
        return self.filters.k


def _normalize_atoms(taps: np.ndarray) -> ConvDictionary:
    # taps: (channels, n_atoms, k, k); atom i is taps[:, i, :, :].
    norms = np.sqrt(np.einsum("cikl,cikl->i", taps, taps))
    if np.any(norms <= 0):
        raise ValueError("dictionary atoms must be nonzero")
    taps = taps / norms[None, :, None, None]
    unit = np.sqrt(np.einsum("cikl,cikl->i", taps, taps))
    return ConvDictionary(filters=Kernel2D(taps), atom_norms=unit)


def _zigzag_pairs(k: int):
    """(row, col) frequency pairs of the k x k grid in zigzag scan order."""
    pairs = []
    for s in range(2 * k - 1):
        diag = [(i, s - i) for i in range(k) if 0 <= s - i < k]
        if s % 2 == 0:
            diag.reverse()
        pairs.extend(diag)
    return pairs


def dct_dictionary(n_atoms: int, k: int, channels: int = 1) -> ConvDictionary:
    """First n_atoms separable DCT-II basis patches in zigzag order.

    Atom 0 is the constant patch. Atoms are replicated across channels and
    scaled to unit Frobenius norm over the full (channels, k, k) block; as
    k x k patches they stay pairwise orthogonal.
    """
    if k < 1 or k % 2 == 0:
        raise ValueError(f"atom side must be odd and positive, got {k}")
    if n_atoms < 1:
        raise ValueError("n_atoms must be positive")
    if n_atoms > k * k:
        raise ValueError(
            f"capacity exceeded: {n_atoms} atoms requested, k*k = {k * k}"
        )
    grid = np.arange(k)
    alpha = np.full(k, np.sqrt(2.0 / k))
    alpha[0] = np.sqrt(1.0 / k)
    basis = alpha[:, None] * np.cos(
        np.pi * (2 * grid[None, :] + 1) * grid[:, None] / (2 * k)
    )  # basis[p] is the p-th 1-D DCT-II row
    taps = np.empty((channels, n_atoms, k, k))
    for i, (p, q) in enumerate(_zigzag_pairs(k)[:n_atoms]):
        taps[:, i] = np.outer(basis[p], basis[q])[None]
    return _normalize_atoms(taps)


def random_dictionary(n_atoms: int, k: int, channels: int = 1, seed: int = 0) -> ConvDictionary:
    """Seeded standard-normal atoms, unit-normalized."""
    if k < 1 or k % 2 == 0:
        raise ValueError(f"atom side must be odd and positive, got {k}")
    if n_atoms < 1:
        raise ValueError("n_atoms must be positive")
    rng = np.random.default_rng(seed)
    taps = rng.standard_normal((channels, n_atoms, k, k))
    return _normalize_atoms(taps)


def decode(d: ConvDictionary, z) -> np.ndarray:
    """Image synthesized from a feature map: sum over atoms of atom * z band."""
    return conv_apply(z, d.filters)


def encode_adjoint(d: ConvDictionary, x) -> np.ndarray:
    """Adjoint (correlation) encoding of an image into N feature bands."""
    return conv_adjoint(x, d.filters)


def grad_f(z, target, d: ConvDictionary) -> np.ndarray:
    """Gradient of 0.5 * ||target - decode(d, z)||_F^2 with respect to z."""
    z = np.asarray(z, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if target.shape[2] != d.channels:
        raise DimensionError(
            f"target has {target.shape[2]} channels, dictionary has {d.channels}"
        )
    return -conv_adjoint(target - decode(d, z), d.filters)


def grad_h(z, target, d: ConvDictionary) -> np.ndarray:
    """Same functional form as grad_f, kept separate for the two branches."""
    return grad_f(z, target, d)


def lipschitz_estimate(d: ConvDictionary, shape, iters: int = 30, seed: int = 0) -> float:
    """Largest-eigenvalue estimate of z -> adjoint(apply(z)) by power iteration.

    Args:
        d: dictionary under test.
        shape: (H, W) working grid for the estimate.
        iters: number of power steps; the estimate is non-decreasing in iters.
        seed: seed for the start vector.

    Returns:
        Estimated spectral norm of the composed operator; multiply a gradient
        step by 0.9 / estimate for a contractive update.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    h, w = shape
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((h, w, d.n_atoms))
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        av = conv_adjoint(conv_apply(v, d.filters), d.filters)
        nrm = np.linalg.norm(av)
        if nrm == 0:
            return 0.0
        est = nrm
        v = av / nrm
    return float(est)


def save_dictionary(path, d: ConvDictionary) -> None:
    """Write a dictionary in the DURD binary layout described above."""
    taps = np.transpose(d.filters.taps, (1, 0, 2, 3))  # band-major
    header = MAGIC + struct.pack("<IIII", FORMAT_VERSION, d.n_atoms, d.k, d.channels)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(taps.astype("<f8").tobytes())


def load_dictionary(path) -> ConvDictionary:
    """Read a DURD file back; validates magic, version, and payload size."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 20 or blob[:4] != MAGIC:
        raise ValueError("not a dictionary file (bad magic)")
    version, n_atoms, k, channels = struct.unpack("<IIII", blob[4:20])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported dictionary format version {version}")
    expect = n_atoms * channels * k * k * 8
    if len(blob) != 20 + expect:
        raise ValueError(
            f"corrupt dictionary file: payload {len(blob) - 20} bytes, expected {expect}"
        )
    taps = np.frombuffer(blob[20:], dtype="<f8").reshape(n_atoms, channels, k, k)
    taps = np.ascontiguousarray(np.transpose(taps, (1, 0, 2, 3)))
    norms = np.sqrt(np.einsum("cikl,cikl->i", taps, taps))
    return ConvDictionary(filters=Kernel2D(taps), atom_norms=norms)
