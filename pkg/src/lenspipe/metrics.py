"""Classical image metrics for the cleaning pipeline.

All metrics are pure functions of a decoded pixel grid.  Grayscale uses
BT.601 luma; clarity is measured on a copy resized so the longer side is
512 px, which keeps the Laplacian variance comparable across resolutions.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from . import kernels

CLARITY_LONG_SIDE = 512


def decode_and_validate(data: bytes) -> np.ndarray | None:
    """Decode encoded image bytes to an RGB uint8 grid, or None if corrupted."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            header_size = im.size
            arr = np.asarray(im.convert("RGB"))
    except Exception:
        return None
    if arr.ndim != 3 or (arr.shape[1], arr.shape[0]) != header_size:
        return None
    return arr


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma (0.299 R + 0.587 G + 0.114 B), rounded to nearest integer."""
    rgb = np.asarray(rgb, dtype=np.float64)
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.rint(y), 0, 255).astype(np.uint8)


def scale_normalize(gray: np.ndarray, long_side: int = CLARITY_LONG_SIDE) -> np.ndarray:
    """Bilinear resize so the longer side equals ``long_side``, preserving aspect."""
    h, w = gray.shape
    if max(h, w) == long_side:
        return gray
    if w >= h:
        new_w = long_side
        new_h = max(1, round(h * long_side / w))
    else:
        new_h = long_side
        new_w = max(1, round(w * long_side / h))
    im = Image.fromarray(np.asarray(gray, dtype=np.uint8), mode="L")
    return np.asarray(im.resize((new_w, new_h), Image.BILINEAR))


def laplacian_variance(gray: np.ndarray) -> float:
    """Variance of the [[0,1,0],[1,-4,1],[0,1,0]] response over interior pixels."""
    return kernels.laplacian_variance(gray)


def shannon_entropy(gray: np.ndarray) -> float:
    """Entropy in bits of the 256-bin grayscale intensity histogram."""
    return kernels.shannon_entropy(gray)


def mean_luminance(rgb: np.ndarray) -> float:
    """Mean HSV V-channel (max of R,G,B per pixel), normalized to [0, 1]."""
    rgb = np.asarray(rgb)
    if rgb.size == 0:
        raise ValueError("grid must be nonempty")
    return float(rgb.max(axis=-1).mean()) / 255.0


def clarity_score(rgb: np.ndarray) -> float:
    """Laplacian variance on the scale-normalized grayscale image."""
    return laplacian_variance(scale_normalize(to_grayscale(rgb)))
