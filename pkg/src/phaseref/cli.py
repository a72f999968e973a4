"""Command-line entry point: ``phaseref <command> [options]``.

Every command also reads its options from ``--config file.json``; keys are the
long option names (dashes or underscores), explicit flags win over the file.

Exit codes: 0 success, 1 check failure or solver failure, 2 usage/input error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import dataio
from .core import as_image, make_rng
from .evaluate import evaluate, parse_methods, write_outputs
from .gradcheck import run_gradcheck
from .measurement import measure
from .reconstruct import GdConfig, GsConfig, SolverError, gd_run, gs_run
from .references import SimpleRefParams, random_binary_reference, random_reference, simple_reference
from .reflearn import TrainConfig, save_checkpoint, train_reference
from .registration import register

log = logging.getLogger("phaseref")


class InputError(Exception):
    """Bad user input; maps to exit code 2."""


def _int_list(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")


def _load_reference_arg(value: str | None, d: int):
    if value is None or value == "none":
        return None
    u = dataio.load_reference(value)
    if u.shape != (d, d):
        raise InputError(f"reference {value} has shape {u.shape}, image side is {d}")
    return u


def _load_dataset(path: str, offset: int, count: int, what: str) -> np.ndarray:
    images = dataio.load_images(path)
    if count < 1:
        raise InputError(f"{what} must be >= 1, got {count}")
    if offset < 0 or offset + count > len(images):
        raise InputError(f"{path} holds {len(images)} images; cannot take {count} from offset {offset}")
    return images[offset:offset + count]


# --- commands -----------------------------------------------------------------

def cmd_measure(args) -> int:
    img = dataio.load_images(args.image)
    if args.index >= len(img):
        raise InputError(f"{args.image} holds {len(img)} images, index {args.index} requested")
    x = as_image(img[args.index], unit=True)
    u = _load_reference_arg(args.reference, x.shape[0])
    y = measure(x, u, args.oversample)
    dataio.write_measurement(y, args.out)
    log.info("wrote %dx%d measurement (s=%d) to %s", y.side, y.side, y.oversampling, args.out)
    return 0


def cmd_reconstruct(args) -> int:
    y = dataio.read_measurement(args.measurement)
    d = y.image_side
    u = _load_reference_arg(args.reference, d)
    truth = None
    if args.truth:
        truth = as_image(dataio.load_images(args.truth)[0], unit=True)
        if truth.shape != (d, d):
            raise InputError(f"truth image has shape {truth.shape}, expected {(d, d)}")
    if args.solver == "gs":
        x = gs_run(y, u, GsConfig(iterations=args.steps, init=args.init, seed=args.seed))
    else:
        x = gd_run(y, u, GdConfig(iterations=args.steps, step_size=args.alpha, init=args.init, seed=args.seed))
    report = {"solver": args.solver, "steps": args.steps, "oversampling": y.oversampling}
    if truth is not None:
        x, t, err = register(x, truth)
        report.update(registered_mse=err, orientation=t.orientation, shift=list(t.shift))
    dataio.write_pgm(x, args.out)
    print(json.dumps(report))
    return 0


def _simple_params(args) -> SimpleRefParams:
    base = SimpleRefParams()
    return SimpleRefParams(
        square_side=args.square_side,
        sigma=args.sigma,
        noise_weight=base.noise_weight if args.noise_weight is None else args.noise_weight,
        poisson_rate=base.poisson_rate if args.poisson_rate is None else args.poisson_rate,
        threshold=base.threshold if args.threshold is None else args.threshold,
    )


def cmd_make_ref(args) -> int:
    d = args.size
    if d < 1:
        raise InputError(f"--size must be >= 1, got {d}")
    rng = make_rng(args.seed)
    params = None
    if args.kind == "random":
        u = random_reference(d, rng)
    elif args.kind == "binary":
        u = random_binary_reference(d, rng)
    else:
        if d < 4:
            raise InputError(f"simple references need --size >= 4, got {d}")
        params = _simple_params(args).resolve(d)
        u = simple_reference(d, params, rng)
    used = {"kind": args.kind, "size": d, "seed": args.seed}
    if params is not None:
        used.update(asdict(params))
    log.info("reference parameters: %s", json.dumps(used, sort_keys=True))
    out = Path(args.out)
    if out.suffix == ".png":
        dataio.write_png(u, out)
    else:
        dataio.write_pgm(u, out, maxval=args.maxval)
    return 0


def cmd_train_ref(args) -> int:
    images = _load_dataset(args.data, args.offset, args.n_train, "--n-train")
    cfg = TrainConfig(
        unroll_steps=args.unroll, batch_size=args.batch, learning_rate=args.lr,
        max_batches=args.max_batches, oversampling=args.oversample, seed=args.seed,
        val_every=args.val_every, patience=args.patience, init=args.init,
    )
    result = train_reference(images, cfg)
    out = save_checkpoint(result, cfg, args.out, extra={"data": str(args.data), "offset": args.offset})
    last_val = next(r.val_mse for r in reversed(result.history) if r.val_mse is not None)
    log.info("stopped after %d steps (%s); final val MSE %.6g; wrote %s",
             result.history[-1].step, result.stop_reason, last_val, out)
    return 0


def cmd_evaluate(args) -> int:
    images = _load_dataset(args.data, args.offset, args.n_test, "--n-test")
    d = images.shape[-1]
    methods = parse_methods(args.methods, d, args.seed)
    over = (1, 2) if args.oversample == "both" else (int(args.oversample),)
    name = args.dataset_name or Path(args.data).name.split(".")[0]
    res = evaluate(images, methods, over, solver=args.solver, steps=args.steps, seed=args.seed,
                   alpha=args.alpha, init=args.init, jobs=args.jobs, dataset=name)
    path = write_outputs(res, args.out_dir, png=args.png)
    print(path.read_text(), end="")
    return 0


def cmd_gradcheck(args) -> int:
    if args.trials == 0:
        log.warning("--trials 0: nothing checked, passing vacuously")
        print("max_rel_error 0 (no trials) resampled 0")
        return 0
    rep = run_gradcheck(args.trials, tuple(args.sizes), tuple(args.unrolls), tuple(args.oversample),
                        seed=args.seed, corrupt=args.corrupt_vjp)
    print(f"max_rel_error {rep.max_rel_error:.3e} resampled {rep.resampled} worst {json.dumps(rep.worst)}")
    ok = rep.passed(args.tol)
    print("PASS" if ok else f"FAIL (tolerance {args.tol:g})")
    return 0 if ok else 1


# --- parser -------------------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    ap = argparse.ArgumentParser(prog="phaseref", description="Reference-based Fourier phase retrieval")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, fn, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="JSON file with option defaults")
        p.set_defaults(func=fn)
        subs[name] = p
        return p

    p = add("measure", cmd_measure, "write Fourier magnitudes of an image (+ reference)")
    p.add_argument("--image", required=True, help="PGM file, PGM directory or IDX file")
    p.add_argument("--index", type=int, default=0, help="item to use when --image holds several")
    p.add_argument("--reference", default="none", help="reference PGM/checkpoint, or 'none'")
    p.add_argument("--oversample", type=int, choices=(1, 2), default=2)
    p.add_argument("--out", required=True)

    p = add("reconstruct", cmd_reconstruct, "recover an image from a measurement file")
    p.add_argument("--measurement", required=True)
    p.add_argument("--reference", default="none")
    p.add_argument("--solver", choices=("gs", "gd"), default="gs")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--alpha", type=float, default=1.95)
    p.add_argument("--init", choices=("uniform", "zeros"), default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth", help="ground-truth image; registers and reports MSE")
    p.add_argument("--out", required=True)

    p = add("make-ref", cmd_make_ref, "construct a random, binary or simple reference")
    p.add_argument("--kind", choices=("random", "binary", "simple"), required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--square-side", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--noise-weight", type=float)
    p.add_argument("--poisson-rate", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--maxval", type=int, choices=(255, 65535), default=65535)
    p.add_argument("--out", required=True, help=".pgm or .png")

    p = add("train-ref", cmd_train_ref, "learn a reference through unrolled GS")
    p.add_argument("--data", required=True)
    p.add_argument("--offset", type=int, default=0)
    p.add_argument("--n-train", type=int, default=100)
    p.add_argument("--unroll", type=int, default=15)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--oversample", type=int, choices=(1, 2), default=2)
    p.add_argument("--max-batches", type=int, default=1000)
    p.add_argument("--val-every", type=int, default=10)
    p.add_argument("--patience", type=int)
    p.add_argument("--init", choices=("zeros", "uniform"), default="zeros")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = add("evaluate", cmd_evaluate, "registered-MSE comparison across references")
    p.add_argument("--data", required=True)
    p.add_argument("--offset", type=int, default=0)
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--methods", default="none,random,binary,simple")
    p.add_argument("--solver", choices=("gs", "gd"), default="gs")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--alpha", type=float, default=1.95)
    p.add_argument("--oversample", choices=("1", "2", "both"), default="both")
    p.add_argument("--init", choices=("uniform", "zeros"), default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--dataset-name")
    p.add_argument("--png", action="store_true")
    p.add_argument("--out-dir", required=True)

    p = add("gradcheck", cmd_gradcheck, "finite-difference check of the reference gradient")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--sizes", type=_int_list, default=[4, 6, 8])
    p.add_argument("--unrolls", type=_int_list, default=[1, 2, 3, 5])
    p.add_argument("--oversample", type=_int_list, default=[1, 2])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--corrupt-vjp", action="store_true", help=argparse.SUPPRESS)
    return ap, subs


def parse_args(argv=None) -> argparse.Namespace:
    ap, subs = build_parser()
    required = {name: [a for a in p._actions if a.required] for name, p in subs.items()}
    for acts in required.values():
        for a in acts:
            a.required = False
    # lenient first pass: find the command and its --config
    args = ap.parse_args(argv)
    p = subs[args.command]
    provided = set()
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            ap.error(f"cannot read config {args.config}: {exc}")
        if not isinstance(cfg, dict):
            ap.error(f"config {args.config} must hold a JSON object")
        known = {a.dest for a in p._actions}
        defaults = {}
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if dest not in known or dest in ("config", "help", "func"):
                ap.error(f"unknown key {key!r} in config {args.config}")
            if dest in ("sizes", "unrolls") or (dest == "oversample" and args.command == "gradcheck"):
                value = value if isinstance(value, list) else _int_list(str(value))
            defaults[dest] = value
        p.set_defaults(**defaults)
        provided = set(defaults)
    for a in required[args.command]:
        a.required = a.dest not in provided
    return ap.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "make-ref":
        logging.getLogger("phaseref").setLevel(logging.INFO)
    try:
        return args.func(args)
    except (InputError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"phaseref {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"phaseref {args.command}: solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
