"""Build IDX files from the 5000-digit MNIST subset bundled with mlxtend.

The full MNIST download is not reachable everywhere; mlxtend ships a
500-per-class subset as CSV inside its wheel. This writes a stratified
4000/1000 train/test split in the standard IDX3 format to ``data/``.

    pip download mlxtend --no-deps -d /tmp/wheels
    python scripts/make_mnist_subset.py /tmp/wheels/mlxtend-*.whl
"""

import argparse
import gzip
import io
import zipfile
from pathlib import Path

import numpy as np

from ptydip.data import write_idx

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("wheel", help="path to an mlxtend wheel")
    ap.add_argument("--out", default=Path(__file__).resolve().parent.parent / "data", type=Path)
    args = ap.parse_args()

    with zipfile.ZipFile(args.wheel) as zf:
        table = np.loadtxt(io.BytesIO(gzip.decompress(zf.read(MEMBER))), delimiter=",")
    pixels = table[:, :784].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, 784].astype(int)

    rng = np.random.default_rng(20230101)
    train, test = [], []
    for digit in range(10):
        idx = rng.permutation(np.flatnonzero(labels == digit))
        train.extend(idx[:400])
        test.extend(idx[400:])
    train = rng.permutation(train)
    test = rng.permutation(test)

    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(args.out / "mnist5k-train-images-idx3-ubyte", pixels[train])
    write_idx(args.out / "mnist5k-test-images-idx3-ubyte", pixels[test])
    print(f"wrote {len(train)} train / {len(test)} test images to {args.out}")


if __name__ == "__main__":
    main()
