"""Amplitude and consistency projections and the classical iterations built on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .forward import Probe, ScanGrid, pty_istft, pty_stft


@dataclass(frozen=True)
class ProjectionConfig:
    delta: float = 1e-12

    def __post_init__(self):
        if not (0 < self.delta <= 1e-6):
            raise ValueError(f"delta must lie in (0, 1e-6], got {self.delta}")


@dataclass(frozen=True)
class DmConfig:
    beta: float = 1.0

    def __post_init__(self):
        if not (0 < self.beta <= 1):
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")


def proj_amplitude(x: np.ndarray, a: np.ndarray, cfg: ProjectionConfig = ProjectionConfig()) -> np.ndarray:
    """Replace magnitudes by ``a`` while keeping phases: ``a * x / (|x| + delta)``.

    Bins where ``x == 0`` map to 0 (their phase is undefined).
    """
    if x.shape != a.shape:
        raise ValueError(f"shape mismatch: x {x.shape} vs a {a.shape}")
    if np.any(a < 0):
        raise ValueError("amplitudes must be nonnegative")
    return _kernels.amplitude_projection(x, a, cfg.delta)


def proj_consistency(x: np.ndarray, probe: Probe, scan: ScanGrid) -> np.ndarray:
    """Project onto the range of the forward transform: ``pty_stft(pty_istft(x))``."""
    return pty_stft(pty_istft(x, probe, scan), probe, scan)


def ap_step(x, a, probe: Probe, scan: ScanGrid, cfg: ProjectionConfig = ProjectionConfig()) -> np.ndarray:
    """One alternating-projections iteration."""
    return proj_consistency(proj_amplitude(x, a, cfg), probe, scan)


def dm_step(
    x,
    a,
    probe: Probe,
    scan: ScanGrid,
    cfg: ProjectionConfig = ProjectionConfig(),
    dm: DmConfig = DmConfig(),
) -> np.ndarray:
    """One difference-map iteration with relaxation ``dm.beta``."""
    beta = dm.beta
    if beta == 1.0:
        # f_A(x) = x and f_C(x) = 2 P_C(x) - x
        pc = proj_consistency(x, probe, scan)
        return x + proj_amplitude(2.0 * pc - x, a, cfg) - pc
    pa = proj_amplitude(x, a, cfg)
    pc = proj_consistency(x, probe, scan)
    f_a = pa - (pa - x) / beta
    f_c = pc + (pc - x) / beta
    return x + beta * (proj_amplitude(f_c, a, cfg) - proj_consistency(f_a, probe, scan))


def random_phase_init(a: np.ndarray, seed) -> np.ndarray:
    """``a * exp(i * theta)`` with theta i.i.d. uniform on [0, 2 pi)."""
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=np.shape(a))
    return a * np.exp(1j * theta)


def amplitude_mismatch(x: np.ndarray, a: np.ndarray) -> float:
    return float(np.linalg.norm((np.abs(x) - a).ravel()))
