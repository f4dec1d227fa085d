"""Image ingestion (IDX, PGM/PNG directories) and 8-bit PGM output."""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
IMAGE_SUFFIXES = (".pgm", ".png")


@dataclass
class ImageSet:
    images: np.ndarray  # (count, h, w) float64 in [0, 1]
    source: str
    size: tuple[int, int]

    def __len__(self):
        return len(self.images)

    def __post_init__(self):
        imgs = np.asarray(self.images, dtype=np.float64)
        if imgs.ndim != 3:
            raise ValueError(f"images must be a (count, h, w) stack, got {imgs.shape}")
        if imgs.size and (imgs.min() < 0 or imgs.max() > 1):
            raise ValueError("image values must lie in [0, 1]")
        self.images = imgs


def load_idx(path: str | Path) -> ImageSet:
    """Parse an IDX3 unsigned-byte image file (the MNIST format); pixels map to ``p / 255``."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 16:
        raise ValueError(f"{path}: truncated IDX header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise ValueError(f"{path}: IDX magic 0x{magic:08x} is not an unsigned-byte image file (0x{IDX_IMAGES_MAGIC:08x})")
    n = count * rows * cols
    if rows and cols and count > (len(raw) - 16) // (rows * cols):
        raise ValueError(f"{path}: header claims {count} images of {rows}x{cols}, payload has {len(raw) - 16} bytes")
    if len(raw) - 16 < n:
        raise ValueError(f"{path}: truncated payload ({len(raw) - 16} of {n} bytes)")
    pix = np.frombuffer(raw, dtype=np.uint8, count=n, offset=16).reshape(count, rows, cols)
    return ImageSet(pix / 255.0, str(path), (rows, cols))


def write_idx(path: str | Path, images: np.ndarray) -> None:
    """Write a uint8 ``(count, rows, cols)`` stack as an IDX3 image file."""
    images = np.asarray(images)
    if images.dtype != np.uint8 or images.ndim != 3:
        raise ValueError("write_idx expects a uint8 (count, rows, cols) array")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    """Binary (P5) PGM reader; returns values scaled to [0, 1]."""
    raw = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end : end + 1].isspace():
            end += 1
        fields.append(raw[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise ValueError(f"{path}: only binary P5 PGM is supported")
    w, h, maxval = (int(f) for f in fields[1:])
    pos += 1
    dt = np.dtype(">u2") if maxval > 255 else np.uint8
    data = np.frombuffer(raw, dtype=dt, count=w * h, offset=pos).reshape(h, w)
    return data.astype(np.float64) / maxval


def write_pgm(path: str | Path, values: np.ndarray) -> None:
    """Clamp to [0, 1], scale to 8 bits (round half up) and write a P5 PGM."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    pix = np.floor(v * 255.0 + 0.5).astype(np.uint8)
    h, w = pix.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


def _read_any(path: Path) -> np.ndarray:
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=np.float64)
            return arr / (65535.0 if arr.max() > 255 else 255.0)
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def to_gray(img: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma for RGB input; 2D input is returned as is."""
    if img.ndim == 2:
        return img
    return img[..., :3] @ np.array([0.299, 0.587, 0.114])


def center_crop_square(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    n = min(h, w)
    top = (h - n) // 2
    left = (w - n) // 2
    return img[top : top + n, left : left + n]


def resize_bilinear(img: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resampling with pixel-centre alignment and edge clamping."""
    h, w = img.shape
    if (h, w) == (size, size):
        return img.copy()

    def coords(n_in):
        c = (np.arange(size) + 0.5) * (n_in / size) - 0.5
        c = np.clip(c, 0, n_in - 1)
        i0 = np.floor(c).astype(int)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, c - i0

    r0, r1, fr = coords(h)
    c0, c1, fc = coords(w)
    top = img[r0][:, c0] * (1 - fc) + img[r0][:, c1] * fc
    bot = img[r1][:, c0] * (1 - fc) + img[r1][:, c1] * fc
    return top * (1 - fr)[:, None] + bot * fr[:, None]


def load_image_file(path: str | Path, size: int | None = None) -> np.ndarray:
    """One image as grayscale in [0, 1], optionally centre-cropped and resized to ``size``."""
    img = to_gray(_read_any(Path(path)))
    if size is not None:
        img = resize_bilinear(center_crop_square(img), size)
    return np.clip(img, 0.0, 1.0)


def load_image_dir(path: str | Path, size: int) -> ImageSet:
    """Grayscale, centre-crop to a square, bilinear resize to ``size``; values stay in [0, 1]."""
    path = Path(path)
    images = []
    for f in sorted(path.iterdir()):
        if f.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        try:
            images.append(load_image_file(f, size))
        except Exception as exc:  # unreadable files are skipped, not fatal
            log.warning("skipping %s: %s", f, exc)
    if not images:
        raise ValueError(f"{path}: no readable images")
    return ImageSet(np.stack(images), str(path), (size, size))
