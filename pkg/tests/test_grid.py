import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptydip.grid import (
    NonFiniteError,
    fft2_segments,
    frobenius_norm,
    ifft2_segments,
    load_ptg4,
    pad_object,
    relative_error,
    save_ptg4,
)

from .conftest import crandn


def test_delta_segment_has_flat_spectrum():
    x = np.zeros((2, 3, 4, 4), complex)
    x[1, 2, 0, 0] = 1
    f = fft2_segments(x)
    np.testing.assert_allclose(f[1, 2], np.full((4, 4), 0.25), atol=1e-15)
    assert np.all(f[0] == 0) and np.all(f[1, :2] == 0)


def test_constant_segment_concentrates_at_dc():
    c = 0.7 - 0.2j
    f = fft2_segments(np.full((1, 1, 4, 4), c))
    expected = np.zeros((4, 4), complex)
    expected[0, 0] = 4 * c
    np.testing.assert_allclose(f[0, 0], expected, atol=1e-15)
    np.testing.assert_allclose(ifft2_segments(f), np.full((1, 1, 4, 4), c), atol=1e-15)


def test_zero_grid_maps_to_zero():
    assert np.all(ifft2_segments(np.zeros((2, 2, 3, 3), complex)) == 0)


@settings(max_examples=25, deadline=None)
@given(
    dims=st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(1, 9), st.integers(1, 9)),
    seed=st.integers(0, 2**32 - 1),
)
def test_unitarity_and_inverse(dims, seed):
    x = crandn(np.random.default_rng(seed), *dims)
    f = fft2_segments(x)
    assert abs(frobenius_norm(f) - frobenius_norm(x)) <= 1e-12 * frobenius_norm(x)
    assert relative_error(ifft2_segments(f), x) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), alpha=st.complex_numbers(max_magnitude=10), beta=st.complex_numbers(max_magnitude=10))
def test_linearity(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    x, y = crandn(rng, 2, 3, 5, 5), crandn(rng, 2, 3, 5, 5)
    lhs = fft2_segments(alpha * x + beta * y)
    rhs = alpha * fft2_segments(x) + beta * fft2_segments(y)
    scale = max(frobenius_norm(lhs), 1e-300)
    assert frobenius_norm(lhs - rhs) <= 1e-12 * max(scale, abs(alpha) * frobenius_norm(x) + abs(beta) * frobenius_norm(y))


def test_non_finite_rejected():
    x = np.zeros((1, 1, 2, 2), complex)
    x[0, 0, 1, 1] = np.nan
    with pytest.raises(NonFiniteError, match=r"\(0, 0, 1, 1\)"):
        fft2_segments(x)
    y = np.zeros((1, 1, 2, 2), complex)
    y[0, 0, 0, 1] = complex(np.inf, 0)
    with pytest.raises(NonFiniteError):
        ifft2_segments(y)


def test_pad_object_mnist_geometry(rng):
    img = rng.random((28, 28))
    out = pad_object(img, 9)
    assert out.shape == (46, 46)
    np.testing.assert_array_equal(out[9:37, 9:37], img)
    border = out.copy()
    border[9:37, 9:37] = 0
    assert np.all(border == 0)
    assert np.isclose(np.sum(np.abs(out) ** 2), np.sum(img**2), rtol=0, atol=1e-12)


def test_pad_zero_is_identity(rng):
    o = crandn(rng, 5, 7)
    np.testing.assert_array_equal(pad_object(o, 0), o)
    with pytest.raises(ValueError):
        pad_object(o, -1)


def test_ptg4_round_trip_and_layout(tmp_path, rng):
    x = crandn(rng, 2, 3, 4, 5)
    path = tmp_path / "x.ptg4"
    save_ptg4(path, x)
    raw = path.read_bytes()
    assert raw[:4] == b"PTG4"
    assert np.frombuffer(raw[4:20], "<u4").tolist() == [2, 3, 4, 5]
    # first value, real then imaginary, little-endian f64
    assert np.frombuffer(raw[20:36], "<f8").tolist() == [x[0, 0, 0, 0].real, x[0, 0, 0, 0].imag]
    np.testing.assert_array_equal(load_ptg4(path), x)


def test_ptg4_2d_and_truncation(tmp_path, rng):
    o = crandn(rng, 6, 7)
    path = tmp_path / "o.ptg4"
    save_ptg4(path, o)
    np.testing.assert_array_equal(load_ptg4(path)[0, 0], o)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError, match="payload"):
        load_ptg4(path)
