import numpy as np
import pytest

from ptydip import _kernels
from ptydip.forward import Geometry, pty_istft, pty_stft

from .conftest import crandn

pytestmark = pytest.mark.skipif(not _kernels._HAVE_NUMBA, reason="numba not importable")


@pytest.fixture
def both_backends():
    saved = _kernels.backend()

    def run(fn):
        out = {}
        for name in ("numpy", "numba"):
            _kernels.set_backend(name)
            out[name] = fn()
        return out["numpy"], out["numba"]

    yield run
    _kernels.set_backend(saved)


def test_segment_and_overlap_agree(both_backends, rng):
    g = Geometry()
    probe, scan = g.probe(), g.scan((28, 28))
    o = crandn(rng, 47, 47)
    a, b = both_backends(lambda: pty_stft(o, probe, scan))
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)
    x = crandn(rng, *scan.ptychograph_shape)
    a, b = both_backends(lambda: pty_istft(x, probe, scan))
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)


@pytest.mark.parametrize("dtype", [np.complex64, np.complex128])
def test_amplitude_agrees(both_backends, rng, dtype):
    x = crandn(rng, 5, 5, 9, 9).astype(dtype)
    x[0, 0, 0, 0] = 0
    amp = rng.random(x.shape)
    a, b = both_backends(lambda: _kernels.amplitude_projection(x, amp, 1e-12))
    np.testing.assert_allclose(a, b, rtol=1e-6 if dtype == np.complex64 else 1e-15)


@pytest.mark.parametrize("dtype", [np.complex64, np.complex128])
def test_mixing_agrees(both_backends, rng, dtype):
    tol = 1e-4 if dtype == np.complex64 else 1e-12
    wf = crandn(rng, 3, 4, 50).astype(dtype)
    xf = crandn(rng, 2, 4, 50).astype(dtype)
    gf = crandn(rng, 2, 3, 50).astype(dtype)
    for fn in (
        lambda: _kernels.mix_forward(wf, xf),
        lambda: _kernels.mix_adjoint(wf, gf),
        lambda: _kernels.mix_weight_grad(gf, xf),
    ):
        a, b = both_backends(fn)
        assert np.linalg.norm(a - b) <= tol * np.linalg.norm(a)


def test_mixing_definitions(rng):
    wf, xf, gf = crandn(rng, 3, 4, 7), crandn(rng, 2, 4, 7), crandn(rng, 2, 3, 7)
    y = _kernels.mix_forward(wf, xf)
    assert y[1, 2, 5] == pytest.approx(sum(wf[2, i, 5] * xf[1, i, 5] for i in range(4)))
    # adjoint: <W x, g> == <x, W^H g>
    assert np.vdot(gf, y) == pytest.approx(np.vdot(_kernels.mix_adjoint(wf, gf), xf))
    dw = _kernels.mix_weight_grad(gf, xf)
    assert dw[2, 3, 4] == pytest.approx(sum(gf[b, 2, 4] * np.conj(xf[b, 3, 4]) for b in range(2)))


def test_set_backend_validates():
    with pytest.raises(ValueError):
        _kernels.set_backend("cuda")
