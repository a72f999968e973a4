#!/usr/bin/env python3
"""Desk-scale MSE comparison on the bundled MNIST subset.

Trains one reference per oversampling factor, evaluates none/random/binary/simple
and both learned references at s = 1 and s = 2, and prints a markdown table:

    python scripts/desk_experiment.py --out runs/desk --n-train 100 --n-test 100
"""
from __future__ import annotations

import argparse
import csv
from pathlib import Path

from prepare_mnist import TEST_NAME, TRAIN_NAME, prepare

from phaseref.cli import main as cli

ROOT = Path(__file__).resolve().parents[1]


def run(args) -> dict[tuple[str, int], str]:
    data = ROOT / "data"
    if not (data / TRAIN_NAME).exists() or not (data / TEST_NAME).exists():
        prepare(data)
    cells = {}
    for s in (2, 1):
        ck = args.out / f"ref_s{s}"
        if cli(["train-ref", "--data", str(data / TRAIN_NAME), "--n-train", str(args.n_train),
                "--oversample", str(s), "--seed", str(args.seed), "--out", str(ck)]):
            raise SystemExit(f"training failed for s={s}")
    learned = ",".join(f"learned:{args.out / f'ref_s{s}'}/checkpoint.npz" for s in (1, 2))
    for s in (1, 2):
        ev = args.out / f"eval_s{s}"
        if cli(["evaluate", "--data", str(data / TEST_NAME), "--n-test", str(args.n_test),
                "--oversample", str(s), "--methods", f"none,random,binary,simple,{learned}",
                "--seed", str(args.seed), "--jobs", str(args.jobs), "--dataset-name", "mnist",
                "--out-dir", str(ev)]):
            raise SystemExit(f"evaluation failed for s={s}")
        with open(ev / "metrics.csv") as fh:
            for r in csv.DictReader(fh):
                label = r["method"].replace("learned:ref_", "learned ")
                cells[(label, s)] = f"{float(r['mse_mean']):.3g} ± {float(r['mse_stddev']):.2g}"
    return cells


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=ROOT / "runs" / "desk")
    ap.add_argument("--n-train", type=int, default=100)
    ap.add_argument("--n-test", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    cells = run(args)
    print("| method | s = 1 | s = 2 |\n|---|---|---|")
    for label in dict.fromkeys(k[0] for k in cells):
        print(f"| {label} | {cells.get((label, 1), '')} | {cells.get((label, 2), '')} |")


if __name__ == "__main__":
    main()
