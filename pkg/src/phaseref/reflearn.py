"""Learning a reference image by differentiating through unrolled GS.

The reverse pass is written out by hand. Complex quantities are treated as
pairs of real variables; the cotangent of a complex array ``z`` is stored as
``dL/dRe z + 1j * dL/dIm z``. Under that convention the vector-Jacobian
product of the unitary ``dft2`` is ``idft2`` and vice versa.

Kink conventions: the ReLU derivative at exactly 0 is 0, and where the phase
guard is active (``|z| <= eps``) the magnitude is treated as the constant eps.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Literal

import numpy as np

from .core import as_image, clip01, make_rng
from .dataio import write_history_csv, write_pgm
from .fourier import dft2, embed, extract, idft2
from .measurement import Measurement, measure
from .reconstruct import GsIntermediates, SolverError, gs_iteration

__all__ = [
    "UnrollTrace",
    "unrolled_forward",
    "backward",
    "loss_and_grad_u",
    "measured_loss_and_grad",
    "AdamState",
    "adam_step",
    "TrainConfig",
    "TrainRecord",
    "TrainResult",
    "train_reference",
    "save_checkpoint",
    "load_checkpoint",
]

log = logging.getLogger(__name__)


@dataclass
class UnrollTrace:
    x0: np.ndarray
    u: np.ndarray
    y: Measurement
    epsilon: float
    steps: list[GsIntermediates] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def output(self) -> np.ndarray:
        return self.steps[-1].out if self.steps else self.x0

    def replay(self) -> np.ndarray:
        x = self.x0
        for _ in self.steps:
            x = gs_iteration(x, self.u, self.y, self.epsilon).out
        return x


def unrolled_forward(x0, u, y: Measurement, n: int, epsilon: float = 1e-12):
    """Run ``n`` GS iterations and keep every intermediate for the reverse pass."""
    if n < 0:
        raise ValueError(f"unroll depth must be >= 0, got {n}")
    x = as_image(x0, name="x0")
    u = as_image(u, name="reference")
    if x.shape[-1] != y.image_side or u.shape[-1] != y.image_side:
        raise ValueError("x0, reference and measurement sides are incompatible")
    trace = UnrollTrace(x, u, y, epsilon)
    for _ in range(n):
        step = gs_iteration(x, u, y, epsilon)
        trace.steps.append(step)
        x = step.out
    return x, trace


def backward(trace: UnrollTrace, grad_out: np.ndarray):
    """Pull ``dL/dx_n`` back through the trace.

    Returns ``(grad_u, grad_y)``; both keep the batch axes of ``grad_out``.
    The reference enters each iteration twice (added before the transform,
    subtracted after) and again through the recursion on ``x_k``.
    """
    s = trace.y.oversampling
    d = trace.u.shape[-1]
    eps = trace.epsilon
    gx = np.asarray(grad_out, dtype=np.float64)
    gu = np.zeros(gx.shape)
    gy = np.zeros(gx.shape[:-2] + trace.y.data.shape[-2:])
    for st in reversed(trace.steps):
        gpre = np.where(st.pre_relu > 0.0, gx, 0.0)
        gu -= gpre
        gq = dft2(embed(gpre, s))
        gy += (np.conj(st.phase) * gq).real
        gp = gq * trace.y.data
        active = st.magnitude > eps
        radial = (np.conj(st.phase) * gp).real
        gz = np.where(active, (gp - st.phase * radial) / st.guarded, gp / eps)
        ga = extract(idft2(gz).real, d)
        gu += ga
        gx = ga
    return gu, gy


def _loss_and_seed(x_n: np.ndarray, x_true: np.ndarray):
    d = x_true.shape[-1]
    loss = np.mean((x_n - x_true) ** 2, axis=(-2, -1))
    return loss, 2.0 * (x_n - x_true) / d**2


def _finite(grad: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(grad)):
        raise SolverError(f"non-finite {what}; check epsilon or input scale")
    return grad


def loss_and_grad_u(x_true, x0, u, y: Measurement, n: int, epsilon: float = 1e-12):
    """MSE of ``x_n`` to ``x_true`` and its gradient in ``u`` with ``y`` held fixed."""
    x_true = as_image(x_true, name="x_true")
    x_n, trace = unrolled_forward(x0, u, y, n, epsilon)
    loss, seed = _loss_and_seed(x_n, x_true)
    gu, _ = backward(trace, seed)
    return loss, _finite(gu, "reference gradient")


def measured_loss_and_grad(x_true, x0, u, n: int, s: int, epsilon: float = 1e-12):
    """Training objective: the measurement itself is taken with ``u``.

    Same loss as :func:`loss_and_grad_u` with ``y = measure(x_true, u, s)``,
    but the gradient also flows through ``y``.
    """
    x_true = as_image(x_true, name="x_true")
    u = as_image(u, name="reference")
    d = u.shape[-1]
    zm = dft2(embed(x_true + u, s))
    ym = np.abs(zm)
    y = Measurement(ym, s)
    x_n, trace = unrolled_forward(x0, u, y, n, epsilon)
    loss, seed = _loss_and_seed(x_n, x_true)
    gu, gy = backward(trace, seed)
    gu = gu + extract(idft2(gy * zm / np.maximum(ym, epsilon)).real, d)
    return loss, _finite(gu, "reference gradient")


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, side: int, lr: float = 0.01, **kw) -> "AdamState":
        return cls(np.zeros((side, side)), np.zeros((side, side)), 0, lr, **kw)


def adam_step(state: AdamState, u, grad):
    """One bias-corrected Adam update followed by projection onto [0, 1]."""
    u = as_image(u, name="reference")
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != u.shape or state.m.shape != u.shape:
        raise ValueError(
            f"shape mismatch: u {u.shape}, grad {grad.shape}, state {state.m.shape}"
        )
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    u_new = clip01(u - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return replace(state, m=m, v=v, t=t), u_new


@dataclass(frozen=True)
class TrainConfig:
    unroll_steps: int = 15
    batch_size: int = 10
    learning_rate: float = 0.01
    max_batches: int = 1000
    oversampling: int = 2
    seed: int = 0
    val_fraction: float = 0.1
    val_every: int = 10
    patience: int | None = None
    init: Literal["zeros", "uniform"] = "zeros"
    epsilon: float = 1e-12

    def __post_init__(self):
        for name in ("unroll_steps", "batch_size", "val_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_batches < 0:
            raise ValueError("max_batches must be >= 0")
        if self.oversampling not in (1, 2):
            raise ValueError(f"oversampling must be 1 or 2, got {self.oversampling}")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be positive when set")
        if self.init not in ("zeros", "uniform"):
            raise ValueError(f"unknown init mode {self.init!r}")


@dataclass(frozen=True)
class TrainRecord:
    step: int
    train_mse: float
    val_mse: float | None


@dataclass
class TrainResult:
    reference: np.ndarray
    history: list[TrainRecord]
    state: AdamState
    stop_reason: str
    n_train: int
    n_val: int


def split_dataset(n: int, val_fraction: float) -> tuple[int, int]:
    """Sizes of the (train, validation) split; validation is the tail."""
    n_val = max(1, int(round(n * val_fraction)))
    if n - n_val < 1:
        raise ValueError(f"dataset of {n} images is too small to hold out a validation split")
    return n - n_val, n_val


def train_reference(dataset, cfg: TrainConfig = TrainConfig(), u0=None) -> TrainResult:
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    images = as_image(np.stack([np.asarray(im) for im in dataset]), name="dataset", unit=True)
    n_train, n_val = split_dataset(len(images), cfg.val_fraction)
    train, val = images[:n_train], images[n_train:]
    d = images.shape[-1]
    s, n = cfg.oversampling, cfg.unroll_steps

    u = make_rng(cfg.seed, 0).random((d, d)) if u0 is None else as_image(u0, unit=True).copy()
    shuffle_rng = make_rng(cfg.seed, 1)
    init_rng = make_rng(cfg.seed, 2)
    state = AdamState.fresh(d, cfg.learning_rate)

    def start(shape):
        return np.zeros(shape) if cfg.init == "zeros" else init_rng.random(shape)

    val_x0 = np.zeros(val.shape) if cfg.init == "zeros" else make_rng(cfg.seed, 3).random(val.shape)
    train_x0 = np.zeros(train.shape) if cfg.init == "zeros" else make_rng(cfg.seed, 4).random(train.shape)

    def unrolled_mse(u, xs, x0):
        y = measure(xs, u, s)
        x = x0
        for _ in range(n):
            x = gs_iteration(x, u, y, cfg.epsilon).out
        return float(np.mean((x - xs) ** 2))

    def val_mse(u):
        return unrolled_mse(u, val, val_x0)

    history = [TrainRecord(0, unrolled_mse(u, train, train_x0), val_mse(u))]
    best, stale = history[0].val_mse, 0
    stop_reason = "max_batches"

    step = 0
    while step < cfg.max_batches:
        order = shuffle_rng.permutation(n_train)
        for lo in range(0, n_train, cfg.batch_size):
            if step >= cfg.max_batches:
                break
            xb = train[order[lo:lo + cfg.batch_size]]
            loss, grad = measured_loss_and_grad(xb, start(xb.shape), u, n, s, cfg.epsilon)
            state, u = adam_step(state, u, grad.mean(axis=0))
            step += 1
            v = val_mse(u) if step % cfg.val_every == 0 or step == cfg.max_batches else None
            history.append(TrainRecord(step, float(np.mean(loss)), v))
            if v is not None:
                log.info("step %d train %.6g val %.6g", step, history[-1].train_mse, v)
                if v < best:
                    best, stale = v, 0
                else:
                    stale += 1
                if cfg.patience is not None and stale >= cfg.patience:
                    stop_reason = "plateau"
                    break
        if stop_reason == "plateau":
            break

    if not all(math.isfinite(r.train_mse) for r in history):
        raise SolverError("training produced a non-finite loss")
    return TrainResult(u, history, state, stop_reason, n_train, n_val)


def save_checkpoint(result: TrainResult, cfg: TrainConfig, out_dir, extra: dict | None = None):
    """Write ``reference.pgm``, ``checkpoint.npz`` (exact arrays), ``history.csv``
    and ``meta.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    st = result.state
    write_pgm(result.reference, out / "reference.pgm")
    np.savez(out / "checkpoint.npz", reference=result.reference, adam_m=st.m, adam_v=st.v)
    write_history_csv(result.history, out / "history.csv")
    meta = {
        "config": asdict(cfg),
        "adam": {"t": st.t, "lr": st.lr, "beta1": st.beta1, "beta2": st.beta2, "eps": st.eps},
        "stop_reason": result.stop_reason,
        "n_train": result.n_train,
        "n_val": result.n_val,
        "final": asdict(result.history[-1]),
        **(extra or {}),
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out


def load_checkpoint(out_dir) -> tuple[np.ndarray, AdamState, dict]:
    out = Path(out_dir)
    meta = json.loads((out / "meta.json").read_text())
    with np.load(out / "checkpoint.npz") as z:
        u, m, v = z["reference"], z["adam_m"], z["adam_v"]
    a = meta["adam"]
    state = AdamState(m, v, a["t"], a["lr"], a["beta1"], a["beta2"], a["eps"])
    return u, state, meta
