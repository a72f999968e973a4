#!/usr/bin/env python3
"""Write the MNIST subset bundled with mlxtend as gzipped IDX files.

mlxtend ships 5000 MNIST digits inside its wheel, which makes the desk-scale
experiments runnable without network access. The first 4000 become the
training file, the last 1000 the test file:

    data/mnist5k-train-images-idx3-ubyte.gz
    data/mnist5k-test-images-idx3-ubyte.gz

If you have the canonical MNIST/FMNIST/EMNIST IDX files, pass those to the
CLI directly instead.
"""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from phaseref.dataio import write_idx_images

TRAIN_NAME = "mnist5k-train-images-idx3-ubyte.gz"
TEST_NAME = "mnist5k-test-images-idx3-ubyte.gz"
N_TRAIN = 4000


def prepare(out_dir: Path) -> tuple[Path, Path]:
    from mlxtend.data import mnist_data

    X, _ = mnist_data()
    images = np.rint(X).astype(np.uint8).reshape(-1, 28, 28)
    out_dir.mkdir(parents=True, exist_ok=True)
    train, test = out_dir / TRAIN_NAME, out_dir / TEST_NAME
    write_idx_images(images[:N_TRAIN], train)
    write_idx_images(images[N_TRAIN:], test)
    return train, test


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out-dir", type=Path, default=Path(__file__).resolve().parents[1] / "data")
    args = ap.parse_args()
    for p in prepare(args.out_dir):
        print(p)


if __name__ == "__main__":
    main()
