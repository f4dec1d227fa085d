"""Hot inner loops, each with a numba path and a pure-numpy path.

The numba path is used when numba imports cleanly and the environment
variable ``PTYDIP_NUMBA`` is not set to ``0``. Both paths compute the same
values (up to floating-point summation order) and are exercised side by side
in ``tests/test_kernels.py`` and ``benchmarks/bench_kernels.py``.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    _HAVE_NUMBA = False

_BACKEND = "numba" if _HAVE_NUMBA and os.environ.get("PTYDIP_NUMBA", "1") != "0" else "numpy"


def backend() -> str:
    return _BACKEND


def set_backend(name: str) -> None:
    """Switch the kernel backend at runtime (``"numba"`` or ``"numpy"``)."""
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not _HAVE_NUMBA:
        raise RuntimeError("numba is not importable in this environment")
    _BACKEND = name


def _njit(func):
    if not _HAVE_NUMBA:
        return func
    return numba.njit(cache=True, fastmath=False)(func)


# --------------------------------------------------------------------------
# segmentation / overlap-add
# --------------------------------------------------------------------------


def _extract_segments_numpy(obj, probe, shift, n_rows, n_cols):
    p = probe.shape[0]
    win = np.lib.stride_tricks.sliding_window_view(obj, (p, p))
    patches = win[: (n_rows - 1) * shift + 1 : shift, : (n_cols - 1) * shift + 1 : shift]
    return patches * probe


@_njit
def _extract_segments_loops(obj, probe, shift, n_rows, n_cols):
    p = probe.shape[0]
    out = np.empty((n_rows, n_cols, p, p), dtype=obj.dtype)
    for k in range(n_rows):
        r0 = k * shift
        for l in range(n_cols):
            c0 = l * shift
            for i in range(p):
                for j in range(p):
                    out[k, l, i, j] = probe[i, j] * obj[r0 + i, c0 + j]
    return out


def _overlap_add_numpy(segments, probe, shift, height, width):
    n_rows, n_cols, p, _ = segments.shape
    weighted = segments * probe.conj()
    canvas = np.zeros((height, width), dtype=weighted.dtype)
    # one strided slice per probe pixel; order is fixed so the sum is deterministic
    for i in range(p):
        for j in range(p):
            canvas[i : i + shift * n_rows : shift, j : j + shift * n_cols : shift] += weighted[:, :, i, j]
    return canvas


@_njit
def _overlap_add_loops(segments, probe, shift, height, width):
    n_rows, n_cols, p, _ = segments.shape
    canvas = np.zeros((height, width), dtype=segments.dtype)
    pc = np.conj(probe)
    for i in range(p):
        for j in range(p):
            w = pc[i, j]
            for k in range(n_rows):
                r = i + k * shift
                for l in range(n_cols):
                    canvas[r, j + l * shift] += w * segments[k, l, i, j]
    return canvas


def extract_segments(obj, probe, shift, n_rows, n_cols):
    """Probe-weighted patches of ``obj`` on a regular grid, shape (K, L, p, p)."""
    if _BACKEND == "numba":
        return _extract_segments_loops(obj, probe, shift, n_rows, n_cols)
    return _extract_segments_numpy(obj, probe, shift, n_rows, n_cols)


def overlap_add(segments, probe, shift, height, width):
    """Accumulate ``conj(probe) * segment`` onto an (height, width) canvas."""
    if _BACKEND == "numba":
        return _overlap_add_loops(segments, probe, shift, height, width)
    return _overlap_add_numpy(segments, probe, shift, height, width)


# --------------------------------------------------------------------------
# amplitude projection
# --------------------------------------------------------------------------


def _amplitude_numpy(x, a, delta):
    return a * x / (np.abs(x) + delta)


@_njit
def _amplitude_loops(x, a, delta):
    xf = x.ravel()
    af = a.ravel()
    out = np.empty_like(xf)
    for n in range(xf.size):
        v = xf[n]
        # real scale avoids a complex division per element
        out[n] = v * (af[n] / (np.sqrt(v.real * v.real + v.imag * v.imag) + delta))
    return out.reshape(x.shape)


def amplitude_projection(x, a, delta):
    if _BACKEND == "numba" and x.flags.c_contiguous and a.flags.c_contiguous and x.shape == a.shape:
        return _amplitude_loops(x, a, delta)
    return _amplitude_numpy(x, a, delta)


# --------------------------------------------------------------------------
# frequency-domain channel mixing for the FFT convolutions
# arrays are (B, C, F) and (O, I, F) with the flattened frequency axis last
# --------------------------------------------------------------------------


def _mix_forward_numpy(wf, xf):
    return np.einsum("oif,bif->bof", wf, xf)


def _mix_adjoint_numpy(wf, gf):
    return np.einsum("oif,bof->bif", wf.conj(), gf)


def _mix_weight_grad_numpy(gf, xf):
    return np.einsum("bof,bif->oif", gf, xf.conj())


@_njit
def _mix_forward_loops(wf, xf):
    n_out, n_in, nf = wf.shape
    nb = xf.shape[0]
    out = np.zeros((nb, n_out, nf), dtype=xf.dtype)
    for b in range(nb):
        for o in range(n_out):
            acc = out[b, o]
            for i in range(n_in):
                w = wf[o, i]
                x = xf[b, i]
                for f in range(nf):
                    acc[f] += w[f] * x[f]
    return out


@_njit
def _mix_adjoint_loops(wf, gf):
    n_out, n_in, nf = wf.shape
    nb = gf.shape[0]
    out = np.zeros((nb, n_in, nf), dtype=gf.dtype)
    for b in range(nb):
        for i in range(n_in):
            acc = out[b, i]
            for o in range(n_out):
                w = wf[o, i]
                g = gf[b, o]
                for f in range(nf):
                    acc[f] += np.conj(w[f]) * g[f]
    return out


@_njit
def _mix_weight_grad_loops(gf, xf):
    nb, n_out, nf = gf.shape
    n_in = xf.shape[1]
    out = np.zeros((n_out, n_in, nf), dtype=gf.dtype)
    for o in range(n_out):
        for i in range(n_in):
            acc = out[o, i]
            for b in range(nb):
                g = gf[b, o]
                x = xf[b, i]
                for f in range(nf):
                    acc[f] += g[f] * np.conj(x[f])
    return out


def _use_loops(*arrays):
    if _BACKEND != "numba":
        return False
    dt = arrays[0].dtype
    return all(arr.flags.c_contiguous and arr.dtype == dt for arr in arrays)


def mix_forward(wf, xf):
    """``out[b, o] = sum_i wf[o, i] * xf[b, i]`` per frequency."""
    if _use_loops(wf, xf):
        return _mix_forward_loops(wf, xf)
    return _mix_forward_numpy(wf, xf)


def mix_adjoint(wf, gf):
    """``out[b, i] = sum_o conj(wf[o, i]) * gf[b, o]`` per frequency."""
    if _use_loops(wf, gf):
        return _mix_adjoint_loops(wf, gf)
    return _mix_adjoint_numpy(wf, gf)


def mix_weight_grad(gf, xf):
    """``out[o, i] = sum_b gf[b, o] * conj(xf[b, i])`` per frequency."""
    if _use_loops(gf, xf):
        return _mix_weight_grad_loops(gf, xf)
    return _mix_weight_grad_numpy(gf, xf)
