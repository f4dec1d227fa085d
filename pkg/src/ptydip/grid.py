"""Complex 2D/4D grids: unitary segment FFTs, padding and the PTG4 dump format.

Grids are plain numpy arrays. Objects are ``(H, W)`` and ptychographs are
``(K, L, M, N)`` in row-major ``(k, l, m, n)`` order. The 2D DFT runs over the
last two axes with unitary (``"ortho"``) normalization and no fftshift.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import scipy.fft

PTG4_MAGIC = b"PTG4"


class NonFiniteError(ValueError):
    """Raised when a grid handed to an exported operation holds NaN or Inf."""


def check_finite(x: np.ndarray, name: str = "grid") -> None:
    if not np.all(np.isfinite(x)):
        bad = np.argwhere(~np.isfinite(x))
        raise NonFiniteError(
            f"{name} has {len(bad)} non-finite value(s); first at index {tuple(bad[0].tolist())}"
        )


def fft2_segments(x: np.ndarray) -> np.ndarray:
    """Unitary 2D DFT over the last two axes of every segment."""
    check_finite(x, "fft2_segments input")
    return scipy.fft.fft2(x, axes=(-2, -1), norm="ortho")


def ifft2_segments(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2_segments`."""
    check_finite(x, "ifft2_segments input")
    return scipy.fft.ifft2(x, axes=(-2, -1), norm="ortho")


def pad_object(o: np.ndarray, pad: int) -> np.ndarray:
    """Zero-pad a 2D object by ``pad`` pixels on every side."""
    if pad < 0:
        raise ValueError(f"pad must be >= 0, got {pad}")
    o = np.asarray(o)
    out = np.zeros((o.shape[0] + 2 * pad, o.shape[1] + 2 * pad), dtype=np.result_type(o, np.complex128))
    out[pad : pad + o.shape[0], pad : pad + o.shape[1]] = o
    return out


def frobenius_norm(x: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(x) ** 2)))


def relative_error(actual: np.ndarray, expected: np.ndarray) -> float:
    """``||actual - expected||_F / ||expected||_F`` (absolute if ``expected`` is zero)."""
    den = frobenius_norm(expected)
    num = frobenius_norm(np.asarray(actual) - np.asarray(expected))
    return num / den if den > 0 else num


def save_ptg4(path: str | Path, x: np.ndarray) -> None:
    """Write a grid as PTG4: magic, 4 x u32 dims, interleaved (re, im) f64, little-endian.

    2D objects are stored with leading unit dims ``(1, 1, H, W)``.
    """
    x = np.asarray(x)
    if x.ndim > 4:
        raise ValueError(f"PTG4 holds at most 4 dims, got shape {x.shape}")
    dims = (1,) * (4 - x.ndim) + x.shape
    payload = np.empty(x.size * 2, dtype="<f8")
    flat = np.ascontiguousarray(x, dtype=np.complex128).ravel()
    payload[0::2] = flat.real
    payload[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(PTG4_MAGIC)
        fh.write(struct.pack("<4I", *dims))
        fh.write(payload.tobytes())


def load_ptg4(path: str | Path) -> np.ndarray:
    """Read a PTG4 file back as a complex128 array of shape (K, L, M, N)."""
    raw = Path(path).read_bytes()
    if raw[:4] != PTG4_MAGIC:
        raise ValueError(f"{path}: not a PTG4 file (magic {raw[:4]!r})")
    if len(raw) < 20:
        raise ValueError(f"{path}: truncated PTG4 header")
    dims = struct.unpack("<4I", raw[4:20])
    count = int(np.prod(dims, dtype=np.int64))
    body = raw[20:]
    if len(body) != count * 16:
        raise ValueError(f"{path}: expected {count * 16} payload bytes, found {len(body)}")
    pairs = np.frombuffer(body, dtype="<f8")
    return (pairs[0::2] + 1j * pairs[1::2]).reshape(dims)
