"""8-bit PNG reading and writing with explicit quantization rules."""

from __future__ import annotations

import numpy as np
from PIL import Image as PILImage

from .errors import DimensionError


def load_png(path) -> np.ndarray:
    """Decode an 8-bit grayscale or RGB PNG into a float64 (H, W, C) array.

    Values are scaled to [0, 1]. Palette and alpha variants are converted to
    RGB first; 16-bit files are rejected.
    """
    with PILImage.open(path) as img:
        if img.mode == "L":
            arr = np.asarray(img, dtype=np.float64)[:, :, None]
        elif img.mode in ("RGB", "RGBA", "P", "LA"):
            arr = np.asarray(img.convert("RGB"), dtype=np.float64)
        else:
            raise ValueError(f"unsupported PNG mode {img.mode!r} in {path}")
    return arr / 255.0


def quantize_u8(x) -> np.ndarray:
    """Clip to [0, 1] and map to uint8, rounding halves away from zero."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    return np.floor(x * 255.0 + 0.5).astype(np.uint8)


def save_png(path, x) -> None:
    """Encode a float (H, W, 1|3) array as an 8-bit PNG."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] not in (1, 3):
        raise DimensionError(
            f"expected (H, W, 1) or (H, W, 3) array, got shape {x.shape}"
        )
    q = quantize_u8(x)
    if q.shape[2] == 1:
        PILImage.fromarray(q[:, :, 0], mode="L").save(path, format="PNG")
    else:
        PILImage.fromarray(q, mode="RGB").save(path, format="PNG")
