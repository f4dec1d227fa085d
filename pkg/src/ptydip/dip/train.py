"""Denoising training of the DIP refiner on simulated ptychographs."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..forward import Geometry, pty_stft
from ..noise import NoiseSpec, sample_corruption
from ..projections import ProjectionConfig, proj_amplitude, proj_consistency
from .model import DipParams, init_params, loss_and_grads, stack_inputs
from .optim import AdamState, adam_update

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 300
    learning_rate: float = 4e-4
    batch_size: int = 16
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    hidden: int = 16
    n_inner: int = 2
    kernel: tuple[int, int, int, int] = (5, 5, 3, 3)
    dtype: str = "complex128"
    micro_batch: int = 8
    validation_size: int = 8

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")
        if self.dtype not in ("complex64", "complex128"):
            raise ValueError(f"dtype must be complex64 or complex128, got {self.dtype}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["noise"] = asdict(self.noise)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "noise" in d and isinstance(d["noise"], dict):
            n = dict(d["noise"])
            for key in ("snr_db_range", "kappa_range"):
                if key in n:
                    n[key] = tuple(n[key])
            d["noise"] = NoiseSpec(**n)
        if "kernel" in d:
            d["kernel"] = tuple(d["kernel"])
        return cls(**d)


@dataclass
class TrainingSample:
    inputs: np.ndarray  # (4, K, L, M, N): X, Y, Z, A
    target: np.ndarray  # Z - X*
    parameter: float  # drawn kappa or SNR


def make_sample(image, geometry: Geometry, noise: NoiseSpec, seed, proj_cfg=ProjectionConfig()) -> TrainingSample:
    """Corrupt the clean ptychograph of ``image`` and run one AP step on it."""
    probe = geometry.probe()
    scan = geometry.scan(image.shape)
    clean = pty_stft(geometry.embed(image), probe, scan)
    a = np.abs(clean)
    x, param = sample_corruption(noise, clean, seed)
    y = proj_amplitude(x, a, proj_cfg)
    z = proj_consistency(y, probe, scan)
    return TrainingSample(stack_inputs(x, y, z, a), z - clean, param)


def _batch_grads(samples, params, cfg: TrainConfig):
    n = len(samples)
    total_loss = 0.0
    total = None
    for start in range(0, n, cfg.micro_batch):
        chunk = samples[start : start + cfg.micro_batch]
        inputs = np.stack([s.inputs for s in chunk])
        targets = np.stack([s.target for s in chunk])
        loss, grads = loss_and_grads(inputs, targets, params, np.dtype(cfg.dtype))
        w = len(chunk) / n
        total_loss += w * loss
        scaled = [w * g for g in grads.arrays()]
        total = scaled if total is None else [a + b for a, b in zip(total, scaled)]
    return total_loss, DipParams.from_arrays(total)


def validation_loss(params: DipParams, samples, cfg: TrainConfig) -> float:
    if not samples:
        return float("nan")
    from .model import forward_batch

    losses = []
    for s in samples:
        pred = forward_batch(s.inputs[None], params, np.dtype(cfg.dtype))[0]
        d = s.target - pred
        losses.append(float(np.sum(np.abs(d) ** 2)))
    return float(np.mean(losses))


def train(
    images,
    geometry: Geometry,
    config: TrainConfig,
    params: DipParams | None = None,
    checkpoint: str | Path | None = None,
    validation_images=None,
) -> tuple[DipParams, list[dict]]:
    """Train the refiner; returns the parameters and a per-epoch log.

    Every (epoch, image) pair gets its own noise stream derived from
    ``config.seed``, so results do not depend on batching. With ``checkpoint``
    the model and optimizer state are written after every epoch and an
    existing checkpoint is resumed.
    """
    images = list(images)
    if not images:
        raise ValueError("training set is empty")
    params = params or init_params(config.hidden, config.n_inner, config.kernel, seed=config.seed)
    state = AdamState(lr=config.learning_rate)
    history: list[dict] = []
    start_epoch = 0
    ckpt = Path(checkpoint) if checkpoint else None
    if ckpt is not None and ckpt.with_suffix(".npz").exists():
        params, state, history = load_checkpoint(ckpt)
        start_epoch = len(history)
        log.info("resuming from %s at epoch %d", ckpt, start_epoch)

    if validation_images is None:
        validation_images = images[: config.validation_size]
    val_samples = [
        make_sample(img, geometry, config.noise, [config.seed, 2**31 - 1, i]) for i, img in enumerate(validation_images)
    ]
    if start_epoch == 0:
        history.append({"epoch": 0, "train_loss": None, "val_loss": validation_loss(params, val_samples, config), "seconds": 0.0})
        start_epoch = 1
    order_rng = np.random.default_rng([config.seed, 7])
    orders = [order_rng.permutation(len(images)) for _ in range(config.epochs)]

    for epoch in range(start_epoch, config.epochs + 1):
        t0 = time.perf_counter()
        losses = []
        order = orders[epoch - 1]
        for b in range(0, len(order), config.batch_size):
            idx = order[b : b + config.batch_size]
            samples = [make_sample(images[i], geometry, config.noise, [config.seed, epoch, int(i)]) for i in idx]
            loss, grads = _batch_grads(samples, params, config)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.arrays()):
                raise FloatingPointError(f"training diverged at epoch {epoch}, batch {b // config.batch_size}: loss {loss}")
            params, state = adam_update(params, grads, state)
            losses.append(loss)
        entry = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "val_loss": validation_loss(params, val_samples, config),
            "seconds": time.perf_counter() - t0,
        }
        history.append(entry)
        log.info("epoch %d train %.5g val %.5g (%.1fs)", epoch, entry["train_loss"], entry["val_loss"], entry["seconds"])
        if ckpt is not None:
            save_checkpoint(ckpt, params, state, history, config)
    return params, history


def save_checkpoint(path: Path, params: DipParams, state: AdamState, history, config: TrainConfig) -> None:
    from .io import save_model

    path = Path(path)
    arrays = {f"p{i}": a for i, a in enumerate(params.arrays())}
    arrays.update({f"m{i}": a for i, a in enumerate(state.m)})
    arrays.update({f"v{i}": a for i, a in enumerate(state.v)})
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, step=state.step, n=len(params.arrays()), **arrays)
    tmp.replace(path.with_suffix(".npz"))
    save_model(params, path)
    path.with_suffix(".json").write_text(json.dumps({"config": config.to_dict(), "history": history}, indent=1))


def load_checkpoint(path: Path):
    path = Path(path)
    data = np.load(path.with_suffix(".npz"))
    n = int(data["n"])
    params = DipParams.from_arrays([data[f"p{i}"] for i in range(n)])
    meta = json.loads(path.with_suffix(".json").read_text())
    cfg = meta["config"]
    state = AdamState(
        lr=cfg["learning_rate"],
        step=int(data["step"]),
        m=[data[f"m{i}"] for i in range(n)],
        v=[data[f"v{i}"] for i in range(n)],
    )
    return params, state, meta["history"]
