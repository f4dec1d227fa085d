"""Training-time corruption: von-Mises phase noise and complex Gaussian noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SERIES_LIMIT = 15.0
# above this concentration the wrapped-cauchy envelope constants lose all
# precision in double arithmetic; the wrapped normal is accurate to O(1/kappa)
_NORMAL_LIMIT = 1e6


def bessel_i0(kappa: float) -> float:
    """Modified Bessel function I0 (power series below 15, asymptotic expansion above)."""
    kappa = float(kappa)
    if kappa < 0 or math.isnan(kappa):
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    if kappa < _SERIES_LIMIT:
        q = 0.25 * kappa * kappa
        term = 1.0
        total = 1.0
        k = 0
        while True:
            k += 1
            term *= q / (k * k)
            total += term
            if term < 1e-17 * total:
                return total
    return math.exp(kappa) * bessel_i0e(kappa)


def bessel_i0e(kappa: float) -> float:
    """Exponentially scaled ``exp(-kappa) * I0(kappa)``; finite for any kappa."""
    kappa = float(kappa)
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    if kappa < _SERIES_LIMIT:
        return bessel_i0(kappa) * math.exp(-kappa)
    # I0(x) ~ e^x / sqrt(2 pi x) * sum_k ((2k-1)!!)^2 / (k! (8x)^k)
    term = 1.0
    total = 1.0
    for k in range(1, 60):
        nxt = term * (2 * k - 1) ** 2 / (k * 8.0 * kappa)
        if nxt > term:  # asymptotic series started to diverge
            break
        term = nxt
        total += term
        if term < 1e-17 * total:
            break
    return total / math.sqrt(2.0 * math.pi * kappa)


def von_mises_pdf(eps, kappa: float, mu: float = 0.0):
    """``exp(kappa cos(eps - mu)) / (2 pi I0(kappa))``, evaluated in scaled form."""
    return np.exp(kappa * (np.cos(np.asarray(eps) - mu) - 1.0)) / (2.0 * np.pi * bessel_i0e(kappa))


def _wrap(theta):
    # maps onto (-pi, pi]
    return np.pi - np.mod(np.pi - theta, 2.0 * np.pi)


def sample_von_mises(kappa: float, mu: float, count: int, seed) -> np.ndarray:
    """I.i.d. von-Mises angles wrapped to (-pi, pi].

    Best-Fisher rejection from a wrapped-Cauchy envelope, vectorized in
    rounds. ``seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if count == 0:
        return np.empty(0)
    if kappa == 0:
        return _wrap(mu + rng.uniform(-np.pi, np.pi, size=count))
    if kappa > _NORMAL_LIMIT:
        return _wrap(mu + rng.standard_normal(count) / math.sqrt(kappa))

    s = math.sqrt(1.0 + 4.0 * kappa * kappa)
    tau = 1.0 + s
    # (tau - sqrt(2 tau)) / (2 kappa) without cancellation for small kappa
    rho = 2.0 * kappa * tau / ((s + 1.0) * (tau + math.sqrt(2.0 * tau)))
    r = (1.0 + rho * rho) / (2.0 * rho)

    out = np.empty(count)
    filled = 0
    while filled < count:
        need = count - filled
        n = int(need * 1.6) + 16
        u1, u2, u3 = rng.random((3, n))
        z = np.cos(np.pi * u1)
        f = (1.0 + r * z) / (r + z)
        c = kappa * (r - f)
        with np.errstate(divide="ignore"):
            accept = (c * (2.0 - c) - u2 > 0) | (np.log(c / u2) + 1.0 - c >= 0)
        theta = np.sign(u3 - 0.5) * np.arccos(np.clip(f, -1.0, 1.0))
        theta = theta[accept][:need]
        out[filled : filled + theta.size] = theta
        filled += theta.size
    return _wrap(mu + out)


def add_phase_noise(x: np.ndarray, kappa: float, seed) -> np.ndarray:
    """Multiply every bin by ``exp(i eps)`` with eps ~ von-Mises(0, kappa)."""
    eps = sample_von_mises(kappa, 0.0, x.size, seed).reshape(x.shape)
    return x * np.exp(1j * eps)


def add_complex_gaussian(x: np.ndarray, snr_db: float, seed) -> np.ndarray:
    """Add circular complex Gaussian noise at a global signal-to-noise ratio (dB)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    power = float(np.sum(np.abs(x) ** 2))
    if power == 0 and math.isfinite(snr_db):
        raise ValueError("cannot set an SNR for an all-zero signal")
    var = power / (x.size * 10.0 ** (snr_db / 10.0))
    scale = math.sqrt(var / 2.0)
    noise = scale * (rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape))
    return x + noise


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "VonMisesPhase"
    snr_db_range: tuple[float, float] = (-24.0, 0.0)
    kappa_range: tuple[float, float] = (0.01, 3.0)
    mu: float = 0.0

    def __post_init__(self):
        if self.kind not in ("VonMisesPhase", "ComplexGaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        lo, hi = self.kappa_range
        if not (0 < lo <= hi):
            raise ValueError(f"kappa range must satisfy 0 < lo <= hi, got {self.kappa_range}")
        lo, hi = self.snr_db_range
        if not lo <= hi:
            raise ValueError(f"empty SNR range {self.snr_db_range}")
        if self.mu != 0.0:
            raise ValueError("only mu = 0 phase noise is supported")


def sample_corruption(spec: NoiseSpec, x: np.ndarray, seed) -> tuple[np.ndarray, float]:
    """Draw the noise parameter uniformly from the configured range and corrupt ``x``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if spec.kind == "VonMisesPhase":
        kappa = float(rng.uniform(*spec.kappa_range))
        return add_phase_noise(x, kappa, rng), kappa
    snr = float(rng.uniform(*spec.snr_db_range))
    return add_complex_gaussian(x, snr, rng), snr
