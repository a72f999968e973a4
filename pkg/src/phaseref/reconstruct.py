"""Phase-retrieval solvers that know the reference image.

Two solvers are provided: Gerchberg-Saxton with reference subtraction
(:func:`gs_run`) and projected gradient descent on the amplitude loss
(:func:`gd_run`). All functions accept a leading batch axis on ``x`` and on
the measurement data.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np

from .core import as_image, make_rng
from .fourier import dft2, embed, extract, idft2
from .measurement import Measurement

__all__ = [
    "SolverError",
    "GsConfig",
    "GdConfig",
    "GsIntermediates",
    "gs_iteration",
    "gs_step",
    "gs_run",
    "amplitude_loss",
    "amplitude_grad",
    "gd_run",
    "initial_guess",
]

log = logging.getLogger(__name__)

InitMode = Literal["uniform", "zeros"]


class SolverError(ArithmeticError):
    """Raised when a solver produces non-finite values or diverges."""


@dataclass(frozen=True)
class GsConfig:
    iterations: int = 500
    epsilon: float = 1e-12
    init: InitMode = "uniform"
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if not 0.0 < self.epsilon <= 1e-6:
            raise ValueError(f"epsilon must lie in (0, 1e-6], got {self.epsilon}")
        if self.init not in ("uniform", "zeros"):
            raise ValueError(f"unknown init mode {self.init!r}")


@dataclass(frozen=True)
class GdConfig:
    iterations: int = 500
    step_size: float = 1.95
    epsilon: float = 1e-12
    init: InitMode = "uniform"
    seed: int = 0
    divergence_threshold: float = 1e6

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if not 0.0 < self.epsilon <= 1e-6:
            raise ValueError(f"epsilon must lie in (0, 1e-6], got {self.epsilon}")
        if self.init not in ("uniform", "zeros"):
            raise ValueError(f"unknown init mode {self.init!r}")


class GsIntermediates(NamedTuple):
    spectrum: np.ndarray  # z = F(embed(x + u))
    magnitude: np.ndarray  # |z|
    guarded: np.ndarray  # max(|z|, eps)
    phase: np.ndarray  # z / guarded
    pre_relu: np.ndarray  # Re(F^-1(phase * y)) on the support, minus u
    out: np.ndarray  # max(0, pre_relu)


def initial_guess(shape: tuple[int, ...], init: InitMode, seed: int) -> np.ndarray:
    if init == "zeros":
        return np.zeros(shape)
    return make_rng(seed).random(shape)


def _reference_array(u, d: int) -> np.ndarray:
    if u is None:
        return np.zeros((d, d))
    u = as_image(u, name="reference")
    if u.shape[-1] != d:
        raise ValueError(f"reference side {u.shape[-1]} != image side {d}")
    return u


def _check_compatible(x: np.ndarray, y: Measurement) -> None:
    if x.shape[-1] != y.image_side:
        raise ValueError(
            f"image side {x.shape[-1]} incompatible with measurement side {y.side}"
            f" (oversampling {y.oversampling})"
        )


def gs_iteration(x: np.ndarray, u: np.ndarray, y: Measurement, epsilon: float) -> GsIntermediates:
    """One reference-aware GS update, returning every intermediate.

    This is the single kernel shared by the solver and the unrolled learner,
    which is what makes their outputs bit-identical.
    """
    d = x.shape[-1]
    z = dft2(embed(x + u, y.oversampling))
    mag = np.abs(z)
    guarded = np.maximum(mag, epsilon)
    p = z / guarded
    pre = extract(idft2(p * y.data).real, d) - u
    if not np.all(np.isfinite(pre)):
        raise SolverError(f"non-finite GS iterate (epsilon={epsilon:g})")
    return GsIntermediates(z, mag, guarded, p, pre, np.maximum(pre, 0.0))


def gs_step(x, u, y: Measurement, cfg: GsConfig = GsConfig()) -> np.ndarray:
    x = as_image(x)
    _check_compatible(x, y)
    return gs_iteration(x, _reference_array(u, x.shape[-1]), y, cfg.epsilon).out


def gs_run(y: Measurement, u=None, cfg: GsConfig = GsConfig(), x0=None) -> np.ndarray:
    """Run ``cfg.iterations`` GS steps. ``x0`` overrides the configured init."""
    d = y.image_side
    if x0 is None:
        x = initial_guess(y.data.shape[:-2] + (d, d), cfg.init, cfg.seed)
    else:
        x = as_image(x0, name="x0")
        _check_compatible(x, y)
    u_arr = _reference_array(u, d)
    for _ in range(cfg.iterations):
        x = gs_iteration(x, u_arr, y, cfg.epsilon).out
    return x


def amplitude_loss(x, u, y: Measurement):
    """f(x) = 1/2 * sum (|F(embed(x+u))| - y)^2 over the measurement grid."""
    x = as_image(x)
    _check_compatible(x, y)
    z = dft2(embed(x + _reference_array(u, x.shape[-1]), y.oversampling))
    out = 0.5 * np.sum((np.abs(z) - y.data) ** 2, axis=(-2, -1))
    return float(out) if out.ndim == 0 else out


def _amplitude_grad(x, u, y: Measurement, epsilon: float):
    z = dft2(embed(x + u, y.oversampling))
    mag = np.abs(z)
    g = extract(idft2((mag - y.data) * z / np.maximum(mag, epsilon)).real, x.shape[-1])
    return g, mag


def amplitude_grad(x, u, y: Measurement, epsilon: float = 1e-12) -> np.ndarray:
    """Gradient of :func:`amplitude_loss` with respect to ``x`` on the support."""
    x = as_image(x)
    _check_compatible(x, y)
    return _amplitude_grad(x, _reference_array(u, x.shape[-1]), y, epsilon)[0]


def gd_run(y: Measurement, u=None, cfg: GdConfig = GdConfig(), x0=None) -> np.ndarray:
    """Projected gradient descent ``x <- max(0, x - alpha * grad f(x))``.

    With the unitary transform, ``alpha = 1`` reproduces the GS update exactly;
    the default ``alpha = 1.95`` is an over-relaxed variant.
    """
    d = y.image_side
    if x0 is None:
        x = initial_guess(y.data.shape[:-2] + (d, d), cfg.init, cfg.seed)
    else:
        x = as_image(x0, name="x0")
        _check_compatible(x, y)
    u_arr = _reference_array(u, d)
    D2 = y.side**2
    for k in range(cfg.iterations):
        g, mag = _amplitude_grad(x, u_arr, y, cfg.epsilon)
        res = np.max(np.sum((mag - y.data) ** 2, axis=(-2, -1)) / D2)
        if not np.isfinite(res) or res > cfg.divergence_threshold:
            raise SolverError(
                f"gradient descent diverged at iteration {k}: residual {res:g}"
                f" (step size {cfg.step_size})"
            )
        x = np.maximum(x - cfg.step_size * g, 0.0)
    return x
