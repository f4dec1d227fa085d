"""Reconstruction scheduler: random phase start, initial AP step, method loop, metrics."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .forward import Probe, ScanGrid, pty_istft
from .metrics import crop_to_roi, evaluate
from .projections import (
    DmConfig,
    ProjectionConfig,
    amplitude_mismatch,
    ap_step,
    dm_step,
    random_phase_init,
)

METHODS = ("AP", "DM", "DIP", "DIP_then_DM")
TRAJECTORY_COLUMNS = ("method", "image_id", "seed", "iteration", "E0", "PSNR", "amp_mismatch")


@dataclass
class IterationRecord:
    iteration: int
    e0: float
    psnr: float
    amp_mismatch: float
    elapsed: float  # seconds of reconstruction work up to and including this iteration


@dataclass
class Trajectory:
    method: str
    seed: object
    image_id: object = None
    records: list[IterationRecord] = field(default_factory=list)
    final_object: np.ndarray | None = None
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def iterations_to(self, threshold: float, metric: str = "e0") -> int | None:
        """First iteration whose metric is <= ``threshold``, or None."""
        for r in self.records:
            if getattr(r, metric) <= threshold:
                return r.iteration
        return None


def first_crossing(values: Iterable[float], threshold: float) -> int | None:
    for m, v in enumerate(values):
        if v <= threshold:
            return m
    return None


def run_reconstruction(
    a: np.ndarray,
    probe: Probe,
    scan: ScanGrid,
    method: str,
    iters: int,
    seed,
    proj_cfg: ProjectionConfig = ProjectionConfig(),
    dm_cfg: DmConfig = DmConfig(),
    dip_params=None,
    switch: int = 5,
    initial_ap: bool = True,
    true_object: np.ndarray | None = None,
    roi: tuple[int, tuple[int, int]] | None = None,
    snapshot_iters: Iterable[int] = (),
    image_id=None,
    dip_dtype: str = "complex128",
) -> Trajectory:
    """Reconstruct an object from measured amplitudes ``a``.

    Iteration 0 is the state after the random phase start and the initial AP
    step. ``DIP_then_DM`` runs ``switch`` DIP iterations, then DM. No final
    amplitude projection is applied. When ``true_object`` is given, E0 and PSNR
    are recorded each iteration on the region described by ``roi = (pad, shape)``.
    ``dip_dtype`` sets the precision of the network evaluation only.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if iters < 0:
        raise ValueError(f"iteration count must be >= 0, got {iters}")
    needs_net = method == "DIP" or (method == "DIP_then_DM" and switch > 0)
    if needs_net and dip_params is None:
        raise ValueError(f"method {method} needs trained DIP parameters")
    if needs_net:
        from .dip.model import dip_iterate

    snapshot_iters = set(snapshot_iters)
    traj = Trajectory(method=method, seed=seed, image_id=image_id)

    if true_object is not None:
        pad, shape = roi if roi is not None else (0, true_object.shape)
        true_roi = crop_to_roi(true_object, pad, shape)
        peak = float(np.abs(true_roi).max())

    elapsed = 0.0

    def record(m, x):
        obj = pty_istft(x, probe, scan)
        if true_object is not None:
            rep = evaluate(true_roi, crop_to_roi(obj, pad, shape), peak if peak > 0 else None)
            e, p = rep.e0, rep.psnr_db
        else:
            e, p = float("nan"), float("nan")
        traj.records.append(IterationRecord(m, e, p, amplitude_mismatch(x, a), elapsed))
        if m in snapshot_iters:
            traj.snapshots[m] = obj
        return obj

    t0 = time.perf_counter()
    x = random_phase_init(a, seed)
    if initial_ap:
        x = ap_step(x, a, probe, scan, proj_cfg)
    elapsed += time.perf_counter() - t0
    obj = record(0, x)

    for m in range(1, iters + 1):
        t0 = time.perf_counter()
        if method == "AP":
            x = ap_step(x, a, probe, scan, proj_cfg)
        elif method == "DM" or (method == "DIP_then_DM" and m > switch):
            x = dm_step(x, a, probe, scan, proj_cfg, dm_cfg)
        else:
            x = dip_iterate(x, a, probe, scan, dip_params, proj_cfg, np.dtype(dip_dtype))
        elapsed += time.perf_counter() - t0
        obj = record(m, x)

    traj.final_object = obj
    return traj


def write_trajectories_csv(path, trajectories: Iterable[Trajectory]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for t in trajectories:
            for r in t.records:
                w.writerow([t.method, t.image_id, t.seed, r.iteration, repr(r.e0), repr(r.psnr), repr(r.amp_mismatch)])
