"""Reconstruction quality: scale/phase-corrected E0 and amplitude PSNR."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PSNR_CAP_DB = 300.0


@dataclass(frozen=True)
class MetricReport:
    e0: float
    psnr_db: float
    scale_factor: complex
    degenerate: bool = False


def e0(true_obj: np.ndarray, est_obj: np.ndarray) -> tuple[float, complex]:
    """Normalized RMSE after fitting the best global complex scale.

    Returns ``(E0, gamma)`` where ``gamma = <est, true> / <est, est>`` minimizes
    ``||true - gamma * est||``. An all-zero estimate yields ``(1.0, 0)``; use
    :func:`e0_report` to get the flag.
    """
    report = e0_report(true_obj, est_obj)
    return report.e0, report.scale_factor


def e0_report(true_obj, est_obj) -> MetricReport:
    t = np.asarray(true_obj)
    e = np.asarray(est_obj)
    if t.shape != e.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {e.shape}")
    t_energy = float(np.vdot(t, t).real)
    if t_energy == 0:
        raise ValueError("true object is identically zero")
    e_energy = float(np.vdot(e, e).real)
    if e_energy == 0:
        return MetricReport(1.0, float("nan"), 0j, degenerate=True)
    gamma = complex(np.vdot(e, t) / e_energy)
    resid = float(np.sum(np.abs(t - gamma * e) ** 2))
    return MetricReport(float(np.sqrt(resid / t_energy)), float("nan"), gamma)


def psnr(true_amp: np.ndarray, est_amp: np.ndarray, peak: float | None = None) -> float:
    """PSNR in dB; ``peak`` defaults to ``max(true_amp)``. Exact matches return ``PSNR_CAP_DB``."""
    t = np.asarray(true_amp, dtype=float)
    e = np.asarray(est_amp, dtype=float)
    if t.shape != e.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {e.shape}")
    if peak is None:
        peak = float(t.max())
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = float(np.mean((t - e) ** 2))
    if mse == 0:
        return PSNR_CAP_DB
    return float(min(PSNR_CAP_DB, 10.0 * np.log10(peak**2 / mse)))


def crop_to_roi(obj: np.ndarray, pad: int, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Strip a ``pad``-wide border; with ``shape`` also drop any bottom/right extension."""
    obj = np.asarray(obj)
    if pad < 0 or 2 * pad >= min(obj.shape):
        raise ValueError(f"pad {pad} too large for object of shape {obj.shape}")
    if shape is None:
        shape = (obj.shape[0] - 2 * pad, obj.shape[1] - 2 * pad)
    if pad + shape[0] > obj.shape[0] or pad + shape[1] > obj.shape[1]:
        raise ValueError(f"roi {shape} at offset {pad} exceeds object {obj.shape}")
    return obj[pad : pad + shape[0], pad : pad + shape[1]]


def evaluate(true_obj, est_obj, peak: float | None = None) -> MetricReport:
    """E0 plus PSNR of the estimated amplitudes against the true amplitudes."""
    rep = e0_report(true_obj, est_obj)
    p = psnr(np.abs(true_obj), np.abs(est_obj), peak)
    return MetricReport(rep.e0, p, rep.scale_factor, rep.degenerate)
