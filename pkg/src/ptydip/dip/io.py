"""DIPM model files.

Layout (little-endian)::

    b"DIPM"  u16 version  u16 in_channels  u16 hidden  u16 n_inner  u16 out_channels
    4 x u16 kernel dims
    per layer (lift, inner...): complex kernel as interleaved (re, im) f64, then gate kernel f64
    head: hidden complex values as interleaved (re, im) f64
    u32 CRC32 of everything above
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .model import IN_CHANNELS, DipParams, GatedWeights

MAGIC = b"DIPM"
VERSION = 1
_HEADER = struct.Struct("<4sHHHHH4H")


class ModelFormatError(ValueError):
    pass


def _complex_bytes(a):
    a = np.ascontiguousarray(a, dtype=np.complex128)
    return a.view("<f8").tobytes()


def save_model(params: DipParams, path: str | Path) -> None:
    kernel = params.kernel_shape
    body = bytearray(_HEADER.pack(MAGIC, VERSION, IN_CHANNELS, params.hidden, len(params.inner), 1, *kernel))
    for layer in params.layers():
        body += _complex_bytes(layer.w)
        body += np.ascontiguousarray(layer.g, dtype="<f8").tobytes()
    body += _complex_bytes(params.head)
    body += struct.pack("<I", zlib.crc32(body))
    Path(path).write_bytes(bytes(body))


def load_model(path: str | Path) -> DipParams:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + 4:
        raise ModelFormatError(f"{path}: file too short for a DIPM header")
    magic, version, n_in, hidden, n_inner, n_out, *kernel = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ModelFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ModelFormatError(f"{path}: unsupported DIPM version {version} (expected {VERSION})")
    if n_in != IN_CHANNELS or n_out != 1:
        raise ModelFormatError(f"{path}: unsupported channel layout {n_in}->{n_out}")
    sizes = []
    for n_layer_in in [n_in] + [hidden] * n_inner:
        sizes += [("c", (hidden, n_layer_in, *kernel)), ("r", (hidden, n_layer_in, *kernel))]
    sizes.append(("c", (hidden,)))
    expected = _HEADER.size + sum(int(np.prod(s)) * (16 if k == "c" else 8) for k, s in sizes) + 4
    if len(raw) != expected:
        raise ModelFormatError(f"{path}: expected {expected} bytes, found {len(raw)} (truncated or corrupt)")
    (crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if zlib.crc32(raw[:-4]) != crc:
        raise ModelFormatError(f"{path}: CRC mismatch")
    offset = _HEADER.size
    arrays = []
    for kind, shape in sizes:
        n = int(np.prod(shape)) * (2 if kind == "c" else 1)
        flat = np.frombuffer(raw, dtype="<f8", count=n, offset=offset).astype(np.float64)
        offset += n * 8
        arrays.append(flat.view(np.complex128).reshape(shape) if kind == "c" else flat.reshape(shape))
    return DipParams.from_arrays(arrays)
