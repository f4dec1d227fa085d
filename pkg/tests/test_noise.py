import math

import numpy as np
import pytest
from scipy import special, stats

from ptydip.noise import (
    NoiseSpec,
    add_complex_gaussian,
    add_phase_noise,
    bessel_i0,
    bessel_i0e,
    sample_corruption,
    sample_von_mises,
    von_mises_pdf,
)

from . import oracles
from .conftest import crandn


def test_i0_values():
    assert bessel_i0(0.0) == 1.0
    assert bessel_i0(1.0) == pytest.approx(oracles.i0_series(1.0), rel=1e-14)
    vals = [bessel_i0(k) for k in (0, 0.5, 1, 2, 4)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        bessel_i0(-1.0)


@pytest.mark.parametrize("kappa", [0.01, 0.3, 2.0, 9.9, 14.99, 15.0, 15.01, 30.0, 120.0, 600.0])
def test_i0_relative_error(kappa):
    assert bessel_i0(kappa) == pytest.approx(float(special.i0(kappa)), rel=1e-12)
    assert bessel_i0e(kappa) == pytest.approx(float(special.i0e(kappa)), rel=1e-12)


def test_pdf_normalized():
    for kappa in (0.0, 0.5, 3.0, 50.0):
        t = np.linspace(-np.pi, np.pi, 20001)[:-1]
        assert np.sum(von_mises_pdf(t, kappa)) * (2 * np.pi / t.size) == pytest.approx(1.0, rel=1e-10)


def _resultant(theta):
    return float(np.abs(np.mean(np.exp(1j * theta))))


def test_vm_uniform_limit():
    assert _resultant(sample_von_mises(0.0, 0.0, 10**6, 1)) <= 0.005


def test_vm_concentration_limit():
    eps = sample_von_mises(1e6, 0.0, 10**6, 2)
    assert np.mean(np.abs(eps) <= 0.01) >= 0.999


@pytest.mark.parametrize("kappa", [0.5, 1.0, 3.0])
def test_vm_resultant_vs_quadrature(kappa):
    target = oracles.vm_resultant_quadrature(kappa)
    assert target == pytest.approx(special.i1(kappa) / special.i0(kappa), rel=1e-10)
    got = _resultant(sample_von_mises(kappa, 0.0, 10**6, 3))
    assert abs(got - target) <= 0.01 * target


@pytest.mark.parametrize("kappa", [0.01, 0.5, 3.0])
def test_vm_chi_square(kappa):
    eps = sample_von_mises(kappa, 0.0, 10**6, 4)
    assert eps.min() > -np.pi and eps.max() <= np.pi
    edges = np.linspace(-np.pi, np.pi, 65)
    counts, _ = np.histogram(eps, bins=edges)
    fine = np.linspace(-np.pi, np.pi, 64 * 200 + 1)
    dens = von_mises_pdf(fine, kappa)
    cell = np.array([np.trapezoid(dens[i * 200 : (i + 1) * 200 + 1], fine[i * 200 : (i + 1) * 200 + 1]) for i in range(64)])
    expected = cell / cell.sum() * eps.size
    assert stats.chisquare(counts, expected).pvalue > 0.01


def test_vm_mean_direction():
    eps = sample_von_mises(2.0, 3.0, 10**5, 5)
    m = np.angle(np.mean(np.exp(1j * eps)))
    assert abs(m - 3.0) < 0.02
    assert eps.min() > -np.pi and eps.max() <= np.pi


def test_phase_noise_preserves_amplitude(rng):
    x = crandn(rng, 4, 4, 9, 9)
    out = add_phase_noise(x, 0.7, 11)
    np.testing.assert_allclose(np.abs(out), np.abs(x), rtol=1e-15, atol=0)
    np.testing.assert_array_equal(add_phase_noise(x, 0.7, 11), out)


def test_phase_noise_large_kappa(rng):
    x = crandn(rng, 4, 4, 9, 9)
    # phase spread is 1/sqrt(kappa): ~1e-4 at 1e8, ~1e-7 at 1e14
    assert np.linalg.norm(add_phase_noise(x, 1e8, 1) - x) <= 3e-4 * np.linalg.norm(x)
    assert np.linalg.norm(add_phase_noise(x, 1e14, 1) - x) <= 1e-6 * np.linalg.norm(x)


def test_complex_gaussian_snr(rng):
    x = crandn(rng, 10**5)
    for snr in (-24.0, -10.0, 0.0, 10.0):
        noise = add_complex_gaussian(x, snr, 9) - x
        measured = 10 * math.log10(np.sum(np.abs(x) ** 2) / np.sum(np.abs(noise) ** 2))
        assert abs(measured - snr) <= 0.1


def test_complex_gaussian_vanishing_and_moments(rng):
    x = crandn(rng, 1000)
    assert np.linalg.norm(add_complex_gaussian(x, 300.0, 1) - x) <= 1e-9 * np.linalg.norm(x)
    ones = np.ones(10**6, complex)
    n = add_complex_gaussian(ones, 0.0, 2) - ones
    assert abs(n.real.mean()) < 5e-3 and abs(n.imag.mean()) < 5e-3
    assert n.real.var() / n.imag.var() == pytest.approx(1.0, abs=0.02)
    with pytest.raises(ValueError):
        add_complex_gaussian(np.zeros(4, complex), 0.0, 1)


def test_sample_corruption_ranges(rng):
    x = crandn(rng, 3, 3, 4, 4)
    vm = NoiseSpec()
    cg = NoiseSpec(kind="ComplexGaussian")
    for seed in range(200):
        _, k = sample_corruption(vm, x, seed)
        assert 0.01 <= k <= 3.0
        _, s = sample_corruption(cg, x, seed)
        assert -24.0 <= s <= 0.0
    fixed = NoiseSpec(kappa_range=(1.5, 1.5))
    assert {sample_corruption(fixed, x, s)[1] for s in range(10)} == {1.5}
    with pytest.raises(ValueError):
        NoiseSpec(kind="Uniform")
