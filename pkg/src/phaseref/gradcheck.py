"""Finite-difference validation of the unrolled-GS reference gradient."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import make_rng
from .fourier import dft2, embed
from .measurement import measure
from .reflearn import loss_and_grad_u, measured_loss_and_grad, unrolled_forward

__all__ = ["GradcheckReport", "central_difference", "relative_error", "near_kink", "run_gradcheck"]

log = logging.getLogger(__name__)


def central_difference(f, u: np.ndarray, h: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(u)
    for idx in np.ndindex(u.shape):
        up, um = u.copy(), u.copy()
        up[idx] += h
        um[idx] -= h
        g[idx] = (f(up) - f(um)) / (2 * h)
    return g


def relative_error(analytic: np.ndarray, numeric: np.ndarray, atol: float = 1e-9) -> float:
    """Largest per-pixel ``|a - f| / (max(|a|, |f|) + atol)``."""
    denom = np.maximum(np.abs(analytic), np.abs(numeric)) + atol
    return float(np.max(np.abs(analytic - numeric) / denom))


def near_kink(x_true, x0, u, n: int, s: int, margin: float) -> bool:
    """True if any ReLU preactivation or any spectrum modulus is within ``margin`` of its kink."""
    y = measure(x_true, u, s)
    if np.min(np.abs(dft2(embed(x_true + u, s)))) < margin:
        return True
    _, trace = unrolled_forward(x0, u, y, n)
    return any(
        np.min(np.abs(st.pre_relu)) < margin or np.min(st.magnitude) < margin
        for st in trace.steps
    )


@dataclass
class GradcheckReport:
    trials: int
    max_rel_error: float = 0.0
    resampled: int = 0
    worst: dict = field(default_factory=dict)
    per_trial: list[dict] = field(default_factory=list)

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error <= tol


def run_gradcheck(trials: int = 50, sizes=(4, 6, 8), unrolls=(1, 2, 3, 5), oversampling=(1, 2),
                  seed: int = 0, h: float = 1e-6, kink_margin: float = 1e-6,
                  max_resample: int = 1000, corrupt: bool = False) -> GradcheckReport:
    """Check both gradients (``y`` held fixed, and ``y`` re-measured with ``u``)
    on ``trials`` random instances, cycling through every (d, n, s) combination.

    ``corrupt`` scales the analytic gradient by 1.01; it exists so the detector
    itself can be tested.
    """
    combos = list(itertools.product(sizes, unrolls, oversampling))
    report = GradcheckReport(trials)
    rng = make_rng(seed)
    for k in range(trials):
        d, n, s = combos[k % len(combos)]
        for _ in range(max_resample):
            x_true, u, x0 = rng.random((3, d, d))
            if not near_kink(x_true, x0, u, n, s, kink_margin):
                break
            report.resampled += 1
        else:
            raise RuntimeError(f"could not draw a kink-free instance for d={d} n={n} s={s}")
        y = measure(x_true, u, s)
        errs = {}
        _, g_fixed = loss_and_grad_u(x_true, x0, u, y, n)
        fd_fixed = central_difference(lambda v: float(loss_and_grad_u(x_true, x0, v, y, n)[0]), u, h)
        _, g_meas = measured_loss_and_grad(x_true, x0, u, n, s)
        fd_meas = central_difference(
            lambda v: float(loss_and_grad_u(x_true, x0, v, measure(x_true, v, s), n)[0]), u, h)
        scale = 1.01 if corrupt else 1.0
        errs["fixed_y"] = relative_error(scale * g_fixed, fd_fixed)
        errs["measured_y"] = relative_error(scale * g_meas, fd_meas)
        rec = {"trial": k, "d": d, "n": n, "s": s, **errs}
        report.per_trial.append(rec)
        worst = max(errs.values())
        if worst >= report.max_rel_error:
            report.max_rel_error = worst
            report.worst = rec
    return report
