"""Experiment orchestration: benchmark runs across methods and seeds, aggregation and reports."""

from __future__ import annotations

import csv
import json
import logging

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import ImageSet, load_idx, load_image_dir, write_pgm
from .forward import Geometry, record_amplitudes
from .metrics import crop_to_roi
from .projections import DmConfig, ProjectionConfig
from .reconstruct import METHODS, TRAJECTORY_COLUMNS, Trajectory, first_crossing, run_reconstruction

log = logging.getLogger(__name__)

CURVE_COLUMNS = (
    "method", "iteration", "n", "E0_mean", "E0_std", "PSNR_mean", "PSNR_std", "amp_mismatch_mean", "amp_mismatch_std",
)
SUMMARY_COLUMNS = (
    "method", "n_runs", "n_failed", "threshold", "curve_iters_to_threshold", "mean_iters_to_threshold",
    "n_reached", "final_E0_mean", "final_PSNR_mean",
)
TIMING_COLUMNS = ("method", "n_runs", "mean_seconds_per_iteration", "mean_seconds_to_threshold", "n_reached")


@dataclass
class MethodSpec:
    name: str
    method: str
    model: str | None = None
    beta: float = 1.0
    switch: int = 5
    dtype: str = "complex128"

    @classmethod
    def parse(cls, item) -> "MethodSpec":
        if isinstance(item, str):
            return cls(name=item, method=item)
        item = dict(item)
        item.setdefault("method", item.get("name"))
        spec = cls(**item)
        if spec.method not in METHODS:
            raise ValueError(f"unknown method {spec.method!r} for {spec.name!r}")
        return spec


@dataclass
class ExperimentConfig:
    dataset: dict = field(default_factory=lambda: {"kind": "idx", "path": "data/mnist5k-test-images-idx3-ubyte"})
    geometry: dict = field(default_factory=lambda: asdict(Geometry()))
    methods: list = field(default_factory=lambda: ["AP", "DM"])
    iterations: int = 100
    n_images: int = 16
    image_ids: list | None = None
    seeds: int = 5
    master_seed: int = 0
    threshold: float = 0.1
    delta: float = 1e-12
    snapshot_iterations: list = field(default_factory=lambda: [0, 10, 50, 100])
    emit_images: bool = True
    output_dir: str = "runs/bench"

    def __post_init__(self):
        if not self.methods:
            raise ValueError("at least one method is required")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        self.method_specs = [MethodSpec.parse(m) for m in self.methods]
        for spec in self.method_specs:
            if spec.method in ("DIP", "DIP_then_DM") and not (spec.method == "DIP_then_DM" and spec.switch == 0):
                if not spec.model or not Path(spec.model).exists():
                    raise ValueError(f"method {spec.name!r} needs an existing model file, got {spec.model!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def load_dataset(spec: dict) -> ImageSet:
    kind = spec.get("kind", "idx")
    if kind == "idx":
        return load_idx(spec["path"])
    if kind == "dir":
        return load_image_dir(spec["path"], int(spec.get("size", 64)))
    raise ValueError(f"unknown dataset kind {kind!r}")


def select_images(n_available: int, n: int, master_seed: int) -> list[int]:
    rng = np.random.default_rng([master_seed, 0xB47C])
    n = min(n, n_available)
    return sorted(int(i) for i in rng.choice(n_available, size=n, replace=False))


def run_seed(master_seed: int, image_id: int, seed_index: int) -> np.random.SeedSequence:
    """Independent RNG stream per (master seed, image, repetition)."""
    return np.random.SeedSequence([master_seed, image_id, seed_index])


def aggregate_curves(rows: list[dict]) -> list[dict]:
    """Mean and population std per (method, iteration) over images x seeds."""
    groups: dict[tuple[str, int], list[dict]] = {}
    order: list[str] = []
    for r in rows:
        key = (r["method"], int(r["iteration"]))
        if r["method"] not in order:
            order.append(r["method"])
        groups.setdefault(key, []).append(r)
    out = []
    for method in order:
        its = sorted(k[1] for k in groups if k[0] == method)
        for it in its:
            g = groups[(method, it)]
            entry = {"method": method, "iteration": it, "n": len(g)}
            for col, name in (("E0", "E0"), ("PSNR", "PSNR"), ("amp_mismatch", "amp_mismatch")):
                vals = np.array([float(r[col]) for r in g])
                entry[f"{name}_mean"] = float(np.mean(vals))
                entry[f"{name}_std"] = float(np.std(vals))
            out.append(entry)
    return out


def summarize(rows: list[dict], curves: list[dict], threshold: float, iterations: int, failures: dict | None = None) -> list[dict]:
    """Iterations to reach ``E0 <= threshold`` per method.

    ``curve_iters_to_threshold`` is the first crossing of the mean E0 curve
    (empty when it never crosses); ``mean_iters_to_threshold`` averages
    per-run crossings, counting runs that never cross as ``iterations + 1``.
    """
    failures = failures or {}
    out = []
    methods = list(dict.fromkeys(c["method"] for c in curves))
    for method in methods:
        curve = [c for c in curves if c["method"] == method]
        runs: dict[tuple, list] = {}
        for r in rows:
            if r["method"] == method:
                runs.setdefault((r["image_id"], r["seed"]), []).append((int(r["iteration"]), float(r["E0"])))
        hits = []
        for series in runs.values():
            series.sort()
            hits.append(first_crossing([e for _, e in series], threshold))
        censored = [h if h is not None else iterations + 1 for h in hits]
        crossing = first_crossing([c["E0_mean"] for c in curve], threshold)
        out.append(
            {
                "method": method,
                "n_runs": len(runs),
                "n_failed": failures.get(method, 0),
                "threshold": threshold,
                "curve_iters_to_threshold": "" if crossing is None else crossing,
                "mean_iters_to_threshold": float(np.mean(censored)) if censored else float("nan"),
                "n_reached": sum(h is not None for h in hits),
                "final_E0_mean": curve[-1]["E0_mean"],
                "final_PSNR_mean": curve[-1]["PSNR_mean"],
            }
        )
    return out


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def emit_images(traj: Trajectory, iterations, path, roi=None, prefix: str | None = None) -> list[Path]:
    """Write snapshot amplitudes (cropped, clamped to [0, 1]) as ``{method}_{image}_{iter}.pgm``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    written = []
    prefix = prefix or f"{traj.method}_{traj.image_id}"
    for it in iterations:
        if it not in traj.snapshots:
            continue
        obj = traj.snapshots[it]
        if roi is not None:
            obj = crop_to_roi(obj, *roi)
        f = path / f"{prefix}_{it}.pgm"
        write_pgm(f, np.abs(obj))
        written.append(f)
    return written


def trajectory_rows(traj: Trajectory, seed_index: int) -> list[dict]:
    return [
        {
            "method": traj.method,
            "image_id": traj.image_id,
            "seed": seed_index,
            "iteration": r.iteration,
            "E0": r.e0,
            "PSNR": r.psnr,
            "amp_mismatch": r.amp_mismatch,
            "elapsed": r.elapsed,
        }
        for r in traj.records
    ]


def timing_summary(rows: list[dict], threshold: float) -> list[dict]:
    out = []
    for method in dict.fromkeys(r["method"] for r in rows):
        runs: dict[tuple, list] = {}
        for r in rows:
            if r["method"] == method:
                runs.setdefault((r["image_id"], r["seed"]), []).append(r)
        per_iter, to_thr = [], []
        for series in runs.values():
            series.sort(key=lambda r: int(r["iteration"]))
            last = series[-1]
            if int(last["iteration"]) > 0:
                per_iter.append((float(last["elapsed"]) - float(series[0]["elapsed"])) / int(last["iteration"]))
            hit = next((r for r in series if float(r["E0"]) <= threshold), None)
            if hit is not None:
                to_thr.append(float(hit["elapsed"]))
        out.append(
            {
                "method": method,
                "n_runs": len(runs),
                "mean_seconds_per_iteration": float(np.mean(per_iter)) if per_iter else float("nan"),
                "mean_seconds_to_threshold": float(np.mean(to_thr)) if to_thr else float("nan"),
                "n_reached": len(to_thr),
            }
        )
    return out


def run_benchmark(cfg: ExperimentConfig) -> dict:
    """Run every (image, seed, method) reconstruction and write the report files.

    Files in ``cfg.output_dir``: ``config.json`` (resolved), ``curves_raw.csv``,
    ``curves.csv``, ``summary.csv``, ``timing.csv`` (wall clock, the only
    non-deterministic output), ``failures.csv`` and ``images/*.pgm``.
    """
    from .dip.io import load_model

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = load_dataset(cfg.dataset)
    image_ids = cfg.image_ids if cfg.image_ids is not None else select_images(len(data), cfg.n_images, cfg.master_seed)
    geometry = Geometry(**cfg.geometry)
    probe = geometry.probe()
    proj_cfg = ProjectionConfig(cfg.delta)
    models = {s.model: load_model(s.model) for s in cfg.method_specs if s.model}

    resolved = cfg.to_dict()
    resolved["image_ids"] = list(image_ids)
    (out / "config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")

    rows: list[dict] = []
    failures: list[dict] = []
    img_dir = out / "images"
    for image_id in image_ids:
        image = data.images[image_id]
        obj = geometry.embed(image)
        scan = geometry.scan(image.shape)
        roi = geometry.roi(image.shape)
        a = record_amplitudes(obj, probe, scan)
        if cfg.emit_images:
            img_dir.mkdir(parents=True, exist_ok=True)
            write_pgm(img_dir / f"true_{image_id}.pgm", image)
        for seed_index in range(cfg.seeds):
            for spec in cfg.method_specs:
                try:
                    traj = run_reconstruction(
                        a, probe, scan, spec.method, cfg.iterations,
                        seed=run_seed(cfg.master_seed, image_id, seed_index),
                        proj_cfg=proj_cfg, dm_cfg=DmConfig(spec.beta),
                        dip_params=models.get(spec.model), switch=spec.switch,
                        true_object=obj, roi=roi,
                        snapshot_iters=cfg.snapshot_iterations if (cfg.emit_images and seed_index == 0) else (),
                        image_id=image_id, dip_dtype=spec.dtype,
                    )
                except Exception as exc:  # recorded, the run continues
                    log.exception("reconstruction failed: %s image %s seed %s", spec.name, image_id, seed_index)
                    failures.append({"method": spec.name, "image_id": image_id, "seed": seed_index, "error": repr(exc)})
                    continue
                traj.method = spec.name
                rows.extend(trajectory_rows(traj, seed_index))
                if cfg.emit_images and seed_index == 0:
                    emit_images(traj, cfg.snapshot_iterations, img_dir, roi)
        log.info("image %s done", image_id)

    return write_reports(out, rows, cfg.threshold, cfg.iterations, failures)


def write_reports(out: Path, rows: list[dict], threshold: float, iterations: int, failures=()) -> dict:
    out = Path(out)
    write_csv(out / "curves_raw.csv", TRAJECTORY_COLUMNS, rows)
    write_csv(out / "failures.csv", ("method", "image_id", "seed", "error"), list(failures))
    fail_counts: dict[str, int] = {}
    for f in failures:
        fail_counts[f["method"]] = fail_counts.get(f["method"], 0) + 1
    curves = aggregate_curves(rows)
    summary = summarize(rows, curves, threshold, iterations, fail_counts)
    write_csv(out / "curves.csv", CURVE_COLUMNS, curves)
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary)
    if rows and "elapsed" in rows[0]:
        write_csv(out / "timing.csv", TIMING_COLUMNS, timing_summary(rows, threshold))
    return {"rows": rows, "curves": curves, "summary": summary}


def report(run_dir, threshold: float | None = None) -> dict:
    """Recompute ``curves.csv`` and ``summary.csv`` from ``curves_raw.csv``."""
    run_dir = Path(run_dir)
    cfg = json.loads((run_dir / "config.json").read_text()) if (run_dir / "config.json").exists() else {}
    threshold = threshold if threshold is not None else cfg.get("threshold", 0.1)
    rows = read_csv(run_dir / "curves_raw.csv")
    iterations = max((int(r["iteration"]) for r in rows), default=0)
    iterations = cfg.get("iterations", iterations)
    failures = read_csv(run_dir / "failures.csv") if (run_dir / "failures.csv").exists() else []
    curves = aggregate_curves(rows)
    fail_counts: dict[str, int] = {}
    for f in failures:
        fail_counts[f["method"]] = fail_counts.get(f["method"], 0) + 1
    summary = summarize(rows, curves, threshold, iterations, fail_counts)
    write_csv(run_dir / "curves.csv", CURVE_COLUMNS, curves)
    write_csv(run_dir / "summary.csv", SUMMARY_COLUMNS, summary)
    return {"curves": curves, "summary": summary}


