"""Command line interface: ``ptydip simulate|train|reconstruct|bench|report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .data import load_idx, load_image_dir, load_image_file
from .forward import Geometry, make_gaussian_probe, make_scan_grid, record_amplitudes
from .grid import load_ptg4, save_ptg4


def _geometry_args(p):
    p.add_argument("--probe-size", type=int, default=9)
    p.add_argument("--sigma", type=float, default=1.5)
    p.add_argument("--shift", type=int, default=2)
    p.add_argument("--pad", type=int, default=None, help="border width (default: one probe width)")


def _geometry(args) -> Geometry:
    return Geometry(args.probe_size, args.sigma, args.shift, args.pad)


def _load_image(args) -> np.ndarray:
    if args.idx:
        return load_idx(args.idx).images[args.index]
    return load_image_file(args.image, args.size)


def cmd_simulate(args):
    geom = _geometry(args)
    image = _load_image(args)
    obj = geom.embed(image)
    a = record_amplitudes(obj, geom.probe(), geom.scan(image.shape))
    save_ptg4(args.out, a)
    if args.object_out:
        save_ptg4(args.object_out, obj)
    meta = {"image_shape": list(image.shape), "object_shape": list(obj.shape), "geometry": geom.__dict__}
    Path(args.out).with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"ptychograph {a.shape} -> {args.out}")


def cmd_train(args):
    from .dip.io import save_model
    from .dip.train import TrainConfig, train
    from .noise import NoiseSpec

    cfg = TrainConfig.from_dict(json.loads(Path(args.config).read_text())) if args.config else TrainConfig()
    overrides = {k: getattr(args, k) for k in ("epochs", "learning_rate", "batch_size", "seed", "dtype", "micro_batch") if getattr(args, k) is not None}
    if args.noise or args.kappa_range or args.snr_range:
        noise = cfg.noise
        kind = {"vm": "VonMisesPhase", "cg": "ComplexGaussian", None: noise.kind}[args.noise]
        noise = NoiseSpec(
            kind=kind,
            snr_db_range=tuple(args.snr_range) if args.snr_range else noise.snr_db_range,
            kappa_range=tuple(args.kappa_range) if args.kappa_range else noise.kappa_range,
        )
        overrides["noise"] = noise
    cfg = TrainConfig(**{**cfg.__dict__, **overrides})
    data = load_idx(args.data) if not Path(args.data).is_dir() else load_image_dir(args.data, args.size)
    images = data.images[: args.n_images] if args.n_images else data.images
    params, history = train(list(images), _geometry(args), cfg, checkpoint=args.checkpoint)
    save_model(params, args.out)
    Path(args.out).with_suffix(".json").write_text(
        json.dumps({"config": cfg.to_dict(), "n_images": len(images), "data": str(args.data), "history": history}, indent=1) + "\n"
    )
    print(f"model -> {args.out} (final val loss {history[-1]['val_loss']:.5g})")


def cmd_reconstruct(args):
    from .dip.io import load_model
    from .projections import DmConfig, ProjectionConfig
    from .reconstruct import run_reconstruction, write_trajectories_csv

    a = load_ptg4(args.amplitudes).real
    n_rows, n_cols, p, _ = a.shape
    probe = make_gaussian_probe(args.probe_size, args.sigma)
    if p != probe.size:
        raise SystemExit(f"ptychograph patterns are {p}x{p} but --probe-size is {probe.size}")
    h = (n_rows - 1) * args.shift + p
    w = (n_cols - 1) * args.shift + p
    scan = make_scan_grid(h, w, probe, args.shift, strict=True)
    truth = load_ptg4(args.truth)[0, 0] if args.truth else None
    params = load_model(args.model) if args.model else None
    traj = run_reconstruction(
        a, probe, scan, args.method, args.iters, seed=args.seed,
        proj_cfg=ProjectionConfig(args.delta), dm_cfg=DmConfig(args.beta),
        dip_params=params, switch=args.switch, true_object=truth,
    )
    save_ptg4(args.out, traj.final_object)
    if args.trajectory:
        write_trajectories_csv(args.trajectory, [traj])
    last = traj.records[-1]
    print(f"{args.method}: {args.iters} iterations, E0 {last.e0:.4g}, amplitude mismatch {last.amp_mismatch:.4g} -> {args.out}")


def cmd_bench(args):
    from .harness import ExperimentConfig, run_benchmark

    d = json.loads(Path(args.config).read_text()) if args.config else {}
    for key in ("iterations", "n_images", "seeds", "master_seed", "output_dir", "threshold"):
        v = getattr(args, key)
        if v is not None:
            d[key] = v
    if args.methods:
        d["methods"] = json.loads(args.methods) if args.methods.strip().startswith("[") else args.methods.split(",")
    if args.no_images:
        d["emit_images"] = False
    result = run_benchmark(ExperimentConfig.from_dict(d))
    _print_summary(result["summary"])


def cmd_report(args):
    from .harness import report

    _print_summary(report(args.run_dir, args.threshold)["summary"])


def _print_summary(summary):
    print(f"{'method':<16}{'curve iters':>12}{'mean iters':>12}{'reached':>9}{'final E0':>10}{'final PSNR':>12}")
    for s in summary:
        print(
            f"{s['method']:<16}{str(s['curve_iters_to_threshold'] or '>max'):>12}{s['mean_iters_to_threshold']:>12.2f}"
            f"{s['n_reached']:>6}/{s['n_runs']:<3}{s['final_E0_mean']:>9.4f}{s['final_PSNR_mean']:>12.2f}"
        )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ptydip", description="Ptychographic phase retrieval: AP, DM and the DIP refiner.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="object image -> amplitude ptychograph (PTG4)")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--image", help="PGM or PNG image")
    src.add_argument("--idx", help="IDX image file")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--size", type=int, help="centre-crop and resize to this size")
    p.add_argument("--out", required=True)
    p.add_argument("--object-out", help="also write the padded true object (PTG4)")
    _geometry_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train a DIP model")
    p.add_argument("--data", required=True, help="IDX file or image directory")
    p.add_argument("--size", type=int, default=28)
    p.add_argument("--n-images", type=int)
    p.add_argument("--config", help="JSON TrainConfig")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--micro-batch", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--dtype", choices=("complex64", "complex128"))
    p.add_argument("--noise", choices=("vm", "cg"))
    p.add_argument("--kappa-range", type=float, nargs=2)
    p.add_argument("--snr-range", type=float, nargs=2)
    p.add_argument("--checkpoint", help="resumable checkpoint path")
    p.add_argument("--out", required=True)
    _geometry_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="amplitudes -> object + trajectory")
    p.add_argument("--amplitudes", required=True)
    p.add_argument("--method", choices=("AP", "DM", "DIP", "DIP_then_DM"), default="DM")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1e-12)
    p.add_argument("--switch", type=int, default=5)
    p.add_argument("--model")
    p.add_argument("--truth", help="true object (PTG4) for per-iteration metrics")
    p.add_argument("--out", required=True)
    p.add_argument("--trajectory", help="trajectory CSV")
    _geometry_args(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("bench", help="full benchmark experiment")
    p.add_argument("--config", help="JSON ExperimentConfig")
    p.add_argument("--methods", help="comma list or JSON list of method specs")
    p.add_argument("--iterations", type=int)
    p.add_argument("--n-images", type=int)
    p.add_argument("--seeds", type=int)
    p.add_argument("--master-seed", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--output-dir")
    p.add_argument("--no-images", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="re-aggregate a benchmark run directory")
    p.add_argument("run_dir")
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args.func(args)


if __name__ == "__main__":
    main(sys.argv[1:])
