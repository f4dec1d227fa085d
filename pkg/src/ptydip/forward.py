"""Far-field grid-scan ptychography: probe, scan lattice, forward transform and pseudoinverse."""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import check_finite, fft2_segments, ifft2_segments

#: Guard for the coverage normalization of :func:`pty_istft`.
WEIGHT_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class Probe:
    values: np.ndarray
    sigma: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"probe must be square, got shape {v.shape}")
        if not np.any(np.abs(v) > 0):
            raise ValueError("probe is identically zero")
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ScanGrid:
    """Regular lattice of probe placements; position (k, l) = (k * shift, l * shift)."""

    shift: int
    n_rows: int
    n_cols: int
    probe_size: int
    object_shape: tuple[int, int]
    uncovered: tuple[int, int] = (0, 0)

    @property
    def positions(self) -> list[tuple[int, int]]:
        return [(k * self.shift, l * self.shift) for k in range(self.n_rows) for l in range(self.n_cols)]

    @property
    def ptychograph_shape(self) -> tuple[int, int, int, int]:
        return (self.n_rows, self.n_cols, self.probe_size, self.probe_size)


def make_gaussian_probe(size: int, sigma: float) -> Probe:
    """Real Gaussian probe with peak 1 at the centre pixel."""
    if size < 1 or size % 2 == 0:
        raise ValueError(f"probe size must be a positive odd integer, got {size}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = np.arange(size) - (size - 1) / 2
    values = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2.0 * sigma**2))
    return Probe(values.astype(np.complex128), sigma=float(sigma))


def make_scan_grid(object_h: int, object_w: int, probe: Probe, shift: int, strict: bool = False) -> ScanGrid:
    """Fit as many probe placements as possible, anchored at the top-left corner.

    ``uncovered`` reports how many trailing rows/columns no placement reaches;
    callers extend the padding until it is ``(0, 0)``. With ``strict`` a
    coverage gap raises instead.
    """
    p = probe.size
    if shift < 1:
        raise ValueError(f"shift must be >= 1, got {shift}")
    if object_h < p or object_w < p:
        raise ValueError(f"object {object_h}x{object_w} is smaller than the {p}x{p} probe")
    n_rows = (object_h - p) // shift + 1
    n_cols = (object_w - p) // shift + 1
    uncovered = ((object_h - p) % shift, (object_w - p) % shift)
    if strict and uncovered != (0, 0):
        raise ValueError(
            f"scan leaves {uncovered[0]} trailing row(s) and {uncovered[1]} column(s) uncovered; "
            "extend the padding"
        )
    return ScanGrid(shift, n_rows, n_cols, p, (object_h, object_w), uncovered)


def grid_padding(image_shape: tuple[int, int], probe_size: int, shift: int, pad: int | None = None):
    """Padding ``(pad, extra_rows, extra_cols)`` giving full coverage of a padded image.

    ``pad`` defaults to one probe width on every side; ``extra_*`` are the
    minimal bottom/right extensions making ``(H - p)`` divisible by ``shift``.
    """
    pad = probe_size if pad is None else pad
    h = image_shape[0] + 2 * pad
    w = image_shape[1] + 2 * pad
    extra_rows = (-(h - probe_size)) % shift
    extra_cols = (-(w - probe_size)) % shift
    return pad, extra_rows, extra_cols


def embed_image(image: np.ndarray, probe_size: int, shift: int, pad: int | None = None) -> np.ndarray:
    """Zero-pad ``image`` so that a ``shift``-lattice of probes covers it completely."""
    pad, er, ec = grid_padding(image.shape, probe_size, shift, pad)
    out = np.zeros((image.shape[0] + 2 * pad + er, image.shape[1] + 2 * pad + ec), dtype=np.complex128)
    out[pad : pad + image.shape[0], pad : pad + image.shape[1]] = image
    return out


def _check_geometry(shape, probe: Probe, scan: ScanGrid):
    if probe.size != scan.probe_size:
        raise ValueError(f"probe size {probe.size} does not match scan grid ({scan.probe_size})")
    h, w = scan.object_shape
    if (scan.n_rows - 1) * scan.shift + probe.size > h or (scan.n_cols - 1) * scan.shift + probe.size > w:
        raise ValueError("scan grid places the probe outside the object")
    if shape is not None and tuple(shape) != (h, w):
        raise ValueError(f"object shape {tuple(shape)} does not match scan grid {scan.object_shape}")


def pty_stft(o: np.ndarray, probe: Probe, scan: ScanGrid) -> np.ndarray:
    """Object -> ptychograph: probe-weighted patches followed by a unitary 2D DFT."""
    o = np.asarray(o, dtype=np.complex128)
    _check_geometry(o.shape, probe, scan)
    seg = _kernels.extract_segments(o, probe.values, scan.shift, scan.n_rows, scan.n_cols)
    return fft2_segments(seg)


@functools.lru_cache(maxsize=32)
def _coverage_cached(probe_bytes: bytes, probe_size: int, scan: ScanGrid) -> np.ndarray:
    power = np.abs(np.frombuffer(probe_bytes, dtype=np.complex128).reshape(probe_size, probe_size)) ** 2
    ones = np.ones((scan.n_rows, scan.n_cols, probe_size, probe_size))
    w = _kernels._overlap_add_numpy(ones * power, np.ones((probe_size, probe_size)), scan.shift, *scan.object_shape)
    w = w.real.copy()
    w.setflags(write=False)
    return w


def coverage_weights(probe: Probe, scan: ScanGrid) -> np.ndarray:
    """Per-pixel sum of ``|probe|^2`` over every placement covering it."""
    _check_geometry(None, probe, scan)
    return _coverage_cached(probe.values.tobytes(), probe.size, scan)


def pty_istft(x: np.ndarray, probe: Probe, scan: ScanGrid, strict: bool = False) -> np.ndarray:
    """Least-squares pseudoinverse of :func:`pty_stft` (weighted overlap-add).

    Each pixel is divided by ``max(coverage, WEIGHT_EPS)``, so fully covered
    pixels are reconstructed exactly and uncovered ones come out as zero.
    """
    x = np.asarray(x)
    if x.shape != scan.ptychograph_shape:
        raise ValueError(f"ptychograph shape {x.shape} does not match scan grid {scan.ptychograph_shape}")
    weights = coverage_weights(probe, scan)
    if strict and np.any(weights == 0):
        raise ValueError(f"{int(np.sum(weights == 0))} object pixel(s) have zero probe coverage")
    seg = ifft2_segments(x)
    canvas = _kernels.overlap_add(seg, probe.values, scan.shift, *scan.object_shape)
    return canvas / np.maximum(weights, WEIGHT_EPS)


def record_amplitudes(o: np.ndarray, probe: Probe, scan: ScanGrid) -> np.ndarray:
    """Measured Fourier magnitudes ``|pty_stft(o)|``."""
    a = np.abs(pty_stft(o, probe, scan))
    check_finite(a, "amplitudes")
    return a


@dataclass(frozen=True)
class Geometry:
    """Probe and scan settings shared by simulation, training and reconstruction.

    ``pad`` defaults to one probe width; padding is then extended at the
    bottom/right until the scan lattice covers the whole object.
    """

    probe_size: int = 9
    sigma: float = 1.5
    shift: int = 2
    pad: int | None = None

    @property
    def pad_width(self) -> int:
        return self.probe_size if self.pad is None else self.pad

    def probe(self) -> Probe:
        return make_gaussian_probe(self.probe_size, self.sigma)

    def object_shape(self, image_shape) -> tuple[int, int]:
        pad, er, ec = grid_padding(image_shape, self.probe_size, self.shift, self.pad)
        return (image_shape[0] + 2 * pad + er, image_shape[1] + 2 * pad + ec)

    def scan(self, image_shape) -> ScanGrid:
        h, w = self.object_shape(image_shape)
        return make_scan_grid(h, w, self.probe(), self.shift, strict=True)

    def embed(self, image: np.ndarray) -> np.ndarray:
        return embed_image(image, self.probe_size, self.shift, self.pad)

    def roi(self, image_shape) -> tuple[int, tuple[int, int]]:
        return self.pad_width, tuple(image_shape)
