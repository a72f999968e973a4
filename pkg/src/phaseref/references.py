"""Baseline and heuristic reference images."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SimpleRefParams",
    "random_reference",
    "random_binary_reference",
    "simple_reference",
    "gaussian_kernel",
    "poisson_knuth",
]


def random_reference(d: int, rng: np.random.Generator) -> np.ndarray:
    if d < 1:
        raise ValueError(f"side must be >= 1, got {d}")
    return rng.random((d, d))


def random_binary_reference(d: int, rng: np.random.Generator) -> np.ndarray:
    if d < 1:
        raise ValueError(f"side must be >= 1, got {d}")
    return (rng.random((d, d)) < 0.5).astype(np.float64)


@dataclass(frozen=True)
class SimpleRefParams:
    """Knobs of the simple reference. ``None`` means "derive from the side"."""

    square_side: int | None = None  # ceil(d / 4)
    sigma: float | None = None  # d / 10
    noise_weight: float = 0.3
    poisson_rate: float = 1.0
    threshold: float = 0.5

    def resolve(self, d: int) -> "SimpleRefParams":
        p = SimpleRefParams(
            square_side=self.square_side if self.square_side is not None else math.ceil(d / 4),
            sigma=self.sigma if self.sigma is not None else d / 10,
            noise_weight=self.noise_weight,
            poisson_rate=self.poisson_rate,
            threshold=self.threshold,
        )
        if not 1 <= p.square_side <= d:
            raise ValueError(f"square_side must lie in [1, {d}], got {p.square_side}")
        if p.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {p.sigma}")
        if p.noise_weight < 0:
            raise ValueError(f"noise_weight must be >= 0, got {p.noise_weight}")
        if p.poisson_rate <= 0:
            raise ValueError(f"poisson_rate must be positive, got {p.poisson_rate}")
        if not 0.0 < p.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {p.threshold}")
        return p


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1D Gaussian truncated at radius ceil(3 sigma), normalised to sum 1."""
    radius = math.ceil(3 * sigma)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def _blur(img: np.ndarray, sigma: float) -> np.ndarray:
    # Separable convolution; out-of-range pixels count as zero.
    k = gaussian_kernel(sigma)
    r = len(k) // 2
    padded = np.pad(img, r)
    rows = np.stack([np.convolve(row, k, mode="valid") for row in padded])
    return np.stack([np.convolve(col, k, mode="valid") for col in rows.T]).T


def poisson_knuth(lam: float, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Poisson draws via Knuth's product-of-uniforms method, row-major order.

    Exact and stream-deterministic, but linear in ``lam``; rates above 10
    fall back to numpy's sampler.
    """
    if lam > 10:
        return rng.poisson(lam, shape).astype(np.float64)
    limit = math.exp(-lam)
    out = np.empty(int(np.prod(shape)))
    for i in range(out.size):
        k, p = 0, rng.random()
        while p > limit:
            k += 1
            p *= rng.random()
        out[i] = k
    return out.reshape(shape)


def simple_reference(d: int, params: SimpleRefParams = SimpleRefParams(),
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """Binarised, noisy, blurred white square in the bottom-right corner."""
    if d < 4:
        raise ValueError(f"simple reference needs side >= 4, got {d}")
    p = params.resolve(d)
    img = np.zeros((d, d))
    img[d - p.square_side:, d - p.square_side:] = 1.0
    img = _blur(img, p.sigma)
    img /= img.max()
    if p.noise_weight > 0:
        if rng is None:
            raise ValueError("a generator is required when noise_weight > 0")
        img = img + p.noise_weight * poisson_knuth(p.poisson_rate, (d, d), rng)
    return (img >= p.threshold).astype(np.float64)
