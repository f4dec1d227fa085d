"""Time the hot kernels under the numba and numpy backends.

    python benchmarks/bench_kernels.py [--repeat 20]

Reports the median wall time per call for the segment/overlap-add transforms,
the amplitude projection, one AP step, and one DIP forward pass and training
step at the MNIST geometry (20x20 positions of 9x9 patterns).
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from ptydip import _kernels
from ptydip.dip.model import forward_batch, init_params, loss_and_grads
from ptydip.forward import Geometry, pty_istft, pty_stft
from ptydip.projections import ap_step, proj_amplitude


def _median_time(fn, repeat):
    fn()  # warm up (numba compiles on first call)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def cases(rng):
    g = Geometry()
    probe, scan = g.probe(), g.scan((28, 28))
    o = rng.standard_normal((47, 47)) + 1j * rng.standard_normal((47, 47))
    x = pty_stft(o, probe, scan)
    a = np.abs(pty_stft(np.abs(o), probe, scan))
    params = init_params(head_scale=1.0)
    stack = np.stack([x, x, x, a + 0j])[None].astype(np.complex64)
    target = x[None].astype(np.complex64)
    return {
        "pty_stft": (lambda: pty_stft(o, probe, scan), 1.0),
        "pty_istft": (lambda: pty_istft(x, probe, scan), 1.0),
        "proj_amplitude": (lambda: proj_amplitude(x, a), 1.0),
        "ap_step": (lambda: ap_step(x, a, probe, scan), 1.0),
        "dip_forward (c64)": (lambda: forward_batch(stack, params, np.complex64), 0.1),
        "dip_train_step (c64)": (lambda: loss_and_grads(stack, target, params, np.complex64), 0.1),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    backends = ["numpy", "numba"] if _kernels._HAVE_NUMBA else ["numpy"]
    results = {}
    saved = _kernels.backend()
    try:
        for name in backends:
            _kernels.set_backend(name)
            for label, (fn, scale) in cases(rng).items():
                results[(label, name)] = _median_time(fn, max(3, int(args.repeat * scale)))
    finally:
        _kernels.set_backend(saved)
    print(f"{'kernel':<24}" + "".join(f"{b + ' (ms)':>14}" for b in backends) + ("   speedup" if len(backends) == 2 else ""))
    for label in cases(rng):
        row = f"{label:<24}" + "".join(f"{1e3 * results[(label, b)]:>14.3f}" for b in backends)
        if len(backends) == 2:
            row += f"{results[(label, 'numpy')] / results[(label, 'numba')]:>9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
