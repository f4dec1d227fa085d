"""The DIP refiner: lift -> inner gated layers -> 1x1 head, estimating the AP residual."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..forward import Probe, ScanGrid
from ..projections import ProjectionConfig, proj_amplitude, proj_consistency
from .layers import ConvPlan, gated_backward, gated_forward, kernel_spectrum

IN_CHANNELS = 4


@dataclass
class GatedWeights:
    w: np.ndarray  # complex (O, I, kk, kl, km, kn)
    g: np.ndarray  # real, same shape


@dataclass
class DipParams:
    """Bias-free network weights. ``head`` is a complex (hidden,) vector."""

    lift: GatedWeights
    inner: list[GatedWeights]
    head: np.ndarray
    _spectra: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def hidden(self) -> int:
        return self.lift.w.shape[0]

    @property
    def kernel_shape(self) -> tuple[int, int, int, int]:
        return tuple(self.lift.w.shape[2:])

    def layers(self) -> list[GatedWeights]:
        return [self.lift, *self.inner]

    def arrays(self) -> list[np.ndarray]:
        """All parameter arrays in declared (serialization) order."""
        out = []
        for layer in self.layers():
            out += [layer.w, layer.g]
        out.append(self.head)
        return out

    @classmethod
    def from_arrays(cls, arrays) -> "DipParams":
        arrays = list(arrays)
        head = arrays.pop()
        layers = [GatedWeights(arrays[i], arrays[i + 1]) for i in range(0, len(arrays), 2)]
        return cls(layers[0], layers[1:], head)

    def map(self, fn) -> "DipParams":
        return DipParams.from_arrays([fn(a) for a in self.arrays()])

    def spectra(self, plan: ConvPlan, dtype) -> list[tuple[np.ndarray, np.ndarray]]:
        """Kernel spectra per layer, cached per (plan, dtype); parameters are treated as immutable."""
        key = (plan, np.dtype(dtype).str)
        if key not in self._spectra:
            cdt = np.result_type(dtype, np.complex64)
            self._spectra[key] = [
                (
                    kernel_spectrum(layer.w.astype(cdt), plan),
                    kernel_spectrum(layer.g.astype(np.real(np.zeros(1, cdt)).dtype), plan, real=True),
                )
                for layer in self.layers()
            ]
        return self._spectra[key]


def init_params(
    hidden: int = 16,
    n_inner: int = 2,
    kernel=(5, 5, 3, 3),
    seed=0,
    head_scale: float = 0.0,
) -> DipParams:
    """Random complex Glorot-style kernels; the head starts at ``head_scale`` (zero by default)."""
    rng = np.random.default_rng(seed)
    taps = int(np.prod(kernel))

    def layer(n_in):
        std = np.sqrt(1.0 / (n_in * taps))
        shape = (hidden, n_in) + tuple(kernel)
        w = std / np.sqrt(2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        g = std * rng.standard_normal(shape)
        return GatedWeights(w, g)

    lift = layer(IN_CHANNELS)
    inner = [layer(hidden) for _ in range(n_inner)]
    head = head_scale / np.sqrt(2 * hidden) * (rng.standard_normal(hidden) + 1j * rng.standard_normal(hidden))
    return DipParams(lift, inner, head.astype(np.complex128))


def stack_inputs(x, y, z, a) -> np.ndarray:
    """The four network input channels; ``a`` enters with zero imaginary part."""
    shapes = {np.shape(v) for v in (x, y, z, a)}
    if len(shapes) != 1:
        raise ValueError(f"input grids differ in shape: {shapes}")
    return np.stack([x, y, z, np.asarray(a).astype(np.complex128)], axis=-5)


def _forward(inputs, params: DipParams, dtype=np.complex128, keep=False):
    if inputs.ndim != 6 or inputs.shape[1] != IN_CHANNELS:
        raise ValueError(f"expected a (B, {IN_CHANNELS}, K, L, M, N) stack, got {inputs.shape}")
    plan = ConvPlan.make(inputs.shape[2:], params.kernel_shape)
    spectra = params.spectra(plan, dtype)
    h = inputs.astype(dtype, copy=False)
    caches = []
    for layer, (wf, gf) in zip(params.layers(), spectra):
        h, cache = gated_forward(h, layer.w, layer.g, plan, wf=wf, gf=gf, keep=keep)
        caches.append(cache)
    out = np.einsum("c,bcklmn->bklmn", params.head.astype(dtype), h)
    return out, (plan, caches, h)


def forward_batch(inputs: np.ndarray, params: DipParams, dtype=np.complex128) -> np.ndarray:
    """Estimated residuals for a ``(B, 4, K, L, M, N)`` input stack."""
    out, _ = _forward(inputs, params, dtype)
    return out


def dip_forward(x, y, z, a, params: DipParams, dtype=np.complex128) -> np.ndarray:
    """Estimated residual for one ptychograph, given X, P_A(X), P_C(P_A(X)) and A."""
    for p in params.arrays():
        if not np.all(np.isfinite(p)):
            raise ValueError("DIP parameters contain non-finite values")
    return forward_batch(stack_inputs(x, y, z, a)[None], params, dtype)[0].astype(np.complex128)


def dip_loss(predicted: np.ndarray, target_residual: np.ndarray) -> float:
    """Squared Frobenius norm of the residual error, summed over every bin."""
    if np.shape(predicted) != np.shape(target_residual):
        raise ValueError(f"shape mismatch: {np.shape(predicted)} vs {np.shape(target_residual)}")
    d = np.asarray(target_residual) - np.asarray(predicted)
    return float(np.sum(d.real**2 + d.imag**2))


def loss_and_grads(inputs, targets, params: DipParams, dtype=np.complex128):
    """Mean per-sample loss over the batch and its gradient for every parameter.

    Complex parameters get ``dL/dRe + i dL/dIm``; real gate kernels get
    ``dL/dg``. Returns ``(loss, grads)`` with ``grads`` shaped like ``params``.
    """
    n = inputs.shape[0]
    pred, (plan, caches, h) = _forward(inputs, params, dtype, keep=True)
    diff = pred - targets.astype(dtype, copy=False)
    loss = float(np.sum(diff.real.astype(np.float64) ** 2 + diff.imag.astype(np.float64) ** 2)) / n
    gpred = (2.0 / n) * diff

    head = params.head.astype(dtype)
    g_head = np.einsum("bklmn,bcklmn->c", gpred, np.conj(h)).astype(np.complex128)
    g = np.conj(head)[None, :, None, None, None, None] * gpred[:, None]

    grads = []
    spectra = params.spectra(plan, dtype)
    for idx in range(len(caches) - 1, -1, -1):
        layer = params.layers()[idx]
        wf, gf = spectra[idx]
        g, dw, dg = gated_backward(g, caches[idx], layer.w, layer.g, plan, wf=wf, gf=gf, need_input=idx > 0)
        caches[idx] = None
        grads.append(GatedWeights(dw.astype(np.complex128), dg.astype(np.float64)))
    grads.reverse()
    return loss, DipParams(grads[0], grads[1:], g_head)


def dip_backward(sample, params: DipParams, dtype=np.complex128) -> DipParams:
    """Gradients of :func:`dip_loss` for one ``(inputs, target_residual)`` sample."""
    inputs, target = sample
    _, grads = loss_and_grads(inputs[None], target[None], params, dtype)
    return grads


def dip_iterate(x, a, probe: Probe, scan: ScanGrid, params: DipParams, cfg=ProjectionConfig(), dtype=np.complex128):
    """One DIP iteration: an AP step minus the estimated residual."""
    y = proj_amplitude(x, a, cfg)
    z = proj_consistency(y, probe, scan)
    return z - dip_forward(x, y, z, a, params, dtype)
