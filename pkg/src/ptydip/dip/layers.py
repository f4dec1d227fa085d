"""4D convolutions (complex and real) via zero-padded FFTs, and the amplitude-gated layer.

Activations are batched as ``(B, C, K, L, M, N)``. A kernel ``w`` of shape
``(O, I, kk, kl, km, kn)`` (odd sizes) acts as a zero-padded "same"
cross-correlation::

    out[b, o, p] = sum_i sum_t w[o, i, t] * x[b, i, p + t - c]

with ``c`` the kernel centre. Complex kernels are not conjugated, so the real
and imaginary parts mix as in an ordinary complex product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .. import _kernels

AXES = (-4, -3, -2, -1)


@dataclass(frozen=True)
class ConvPlan:
    """FFT geometry for one activation shape and kernel shape."""

    shape: tuple[int, int, int, int]
    kernel: tuple[int, int, int, int]
    fft_shape: tuple[int, int, int, int]

    @classmethod
    def make(cls, shape, kernel):
        shape = tuple(int(s) for s in shape)
        kernel = tuple(int(k) for k in kernel)
        if any(k % 2 == 0 for k in kernel):
            raise ValueError(f"kernel dims must be odd, got {kernel}")
        fft_shape = tuple(scipy.fft.next_fast_len(n + k - 1) for n, k in zip(shape, kernel))
        return cls(shape, kernel, fft_shape)

    @property
    def crop(self):
        return tuple(slice((k - 1) // 2, (k - 1) // 2 + n) for n, k in zip(self.shape, self.kernel))

    @property
    def head(self):
        return tuple(slice(0, n) for n in self.shape)

    @property
    def taps(self):
        return tuple(slice(0, k) for k in self.kernel)


def _flip(w):
    return w[..., ::-1, ::-1, ::-1, ::-1]


def _flat(a):
    return a.reshape(a.shape[0], a.shape[1], -1)


def kernel_spectrum(w: np.ndarray, plan: ConvPlan, real: bool = False) -> np.ndarray:
    """Spectrum of the flipped kernel, flattened to ``(O, I, F)``."""
    fw = scipy.fft.rfftn if real else scipy.fft.fftn
    return np.ascontiguousarray(_flat(fw(_flip(w), s=plan.fft_shape, axes=AXES)))


def _spectrum(x, plan, real):
    fw = scipy.fft.rfftn if real else scipy.fft.fftn
    return np.ascontiguousarray(_flat(fw(x, s=plan.fft_shape, axes=AXES)))


def _inverse(yf, n_batch, n_chan, plan, real):
    half = plan.fft_shape[:3] + ((plan.fft_shape[3] // 2 + 1),) if real else plan.fft_shape
    yf = yf.reshape((n_batch, n_chan) + half)
    if real:
        return scipy.fft.irfftn(yf, s=plan.fft_shape, axes=AXES)
    return scipy.fft.ifftn(yf, axes=AXES)


def conv4d(x, w, real: bool = False, plan: ConvPlan | None = None, wf=None):
    """Batched zero-padded 4D cross-correlation (``real`` uses real FFTs)."""
    if x.ndim != 6 or w.ndim != 6 or x.shape[1] != w.shape[1]:
        raise ValueError(f"shape mismatch: input {x.shape}, kernel {w.shape}")
    plan = plan or ConvPlan.make(x.shape[2:], w.shape[2:])
    wf = kernel_spectrum(w, plan, real) if wf is None else wf
    xf = _spectrum(x, plan, real).astype(wf.dtype, copy=False)
    yf = _kernels.mix_forward(wf, xf)
    y = _inverse(yf, x.shape[0], w.shape[0], plan, real)
    return np.ascontiguousarray(y[(Ellipsis,) + plan.crop]), xf


def conv4d_backward(g, xf, w, plan: ConvPlan, real: bool = False, wf=None, need_input=True):
    """Gradients of a :func:`conv4d` for an upstream gradient ``g``.

    Gradients of complex quantities are ``dL/dRe + i dL/dIm``. Returns
    ``(grad_input, grad_kernel)``; ``grad_input`` is None when not needed.
    """
    n_batch, n_out = g.shape[:2]
    n_in = w.shape[1]
    pad = np.zeros((n_batch, n_out) + plan.fft_shape, dtype=g.dtype)
    pad[(Ellipsis,) + plan.crop] = g
    gf = _spectrum(pad, plan, real).astype(xf.dtype, copy=False)
    # correlation of g with x at lags 0..k-1 gives the flipped-kernel gradient
    dwf = _kernels.mix_weight_grad(gf, xf)
    half = plan.fft_shape[:3] + ((plan.fft_shape[3] // 2 + 1),) if real else plan.fft_shape
    dwf = dwf.reshape((n_out, n_in) + half)
    if real:
        full = scipy.fft.irfftn(dwf, s=plan.fft_shape, axes=AXES)
    else:
        full = scipy.fft.ifftn(dwf, axes=AXES)
    dw = _flip(full[(Ellipsis,) + plan.taps])
    dw = dw.real if real else dw
    gx = None
    if need_input:
        wf = kernel_spectrum(w, plan, real) if wf is None else wf
        gxf = _kernels.mix_adjoint(wf, gf)
        gx = _inverse(gxf, n_batch, n_in, plan, real)[(Ellipsis,) + plan.head]
        gx = np.ascontiguousarray(gx)
    return gx, np.ascontiguousarray(dw)


def complex_conv4d(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Complex 4D convolution of one sample ``(C, K, L, M, N)`` or a batch."""
    single = x.ndim == 5
    xb = x[None] if single else x
    y, _ = conv4d(xb.astype(np.result_type(xb, w, np.complex64)), w)
    return y[0] if single else y


def real_conv4d(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    single = x.ndim == 5
    xb = x[None] if single else x
    y, _ = conv4d(xb, g, real=True)
    return y[0] if single else y


def sigmoid(s):
    return 0.5 * (1.0 + np.tanh(0.5 * s))


@dataclass
class GatedCache:
    x: np.ndarray
    xf: np.ndarray
    mag: np.ndarray
    magf: np.ndarray
    v: np.ndarray
    gate: np.ndarray


def gated_forward(x, w, g, plan: ConvPlan, wf=None, gf=None, keep=True):
    """``sigmoid(real_conv(|x|, g)) * complex_conv(x, w)``; returns (output, cache)."""
    v, xf = conv4d(x, w, plan=plan, wf=wf)
    mag = np.abs(x)
    s, magf = conv4d(mag, g, real=True, plan=plan, wf=gf)
    gate = sigmoid(s)
    out = gate * v
    cache = GatedCache(x, xf, mag, magf, v, gate) if keep else None
    return out, cache


def gated_backward(gout, cache: GatedCache, w, g, plan: ConvPlan, wf=None, gf=None, need_input=True):
    """Returns ``(grad_x, grad_w, grad_g)`` for :func:`gated_forward`."""
    gv = cache.gate * gout
    dgate = np.real(gout * np.conj(cache.v))
    ds = (dgate * cache.gate * (1.0 - cache.gate)).astype(cache.mag.dtype, copy=False)
    gx_v, dw = conv4d_backward(gv, cache.xf, w, plan, wf=wf, need_input=need_input)
    gx_m, dg = conv4d_backward(ds, cache.magf, g, plan, real=True, wf=gf, need_input=need_input)
    gx = None
    if need_input:
        mag = cache.mag
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(mag > 0, cache.x / np.where(mag > 0, mag, 1), 0)
        gx = gx_v + gx_m * unit
    return gx, dw, dg
