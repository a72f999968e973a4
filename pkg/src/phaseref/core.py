"""Shared image helpers and the seeded random-number contract.

Images are plain ``float64`` numpy arrays of shape ``(..., d, d)``; leading
axes are batch axes. Row-major ``(row, col)`` indexing, origin top-left.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "make_rng",
    "as_image",
    "image_new",
    "clip01",
    "mse",
]


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox-backed generator keyed by ``seed`` and an optional stream path.

    Philox is counter-based, so a ``(seed, *stream)`` tuple always yields the
    same sequence regardless of platform or of how work is split up.
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, stream)])
    return np.random.Generator(np.random.Philox(ss))


def as_image(img, *, name: str = "image", unit: bool = False) -> np.ndarray:
    """Validate and convert ``img`` to a float64 array of square trailing axes."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2] or arr.shape[-1] == 0:
        raise ValueError(f"{name} must be a non-empty square grid, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if unit and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    return arr


def image_new(side: int, fill: float = 0.0) -> np.ndarray:
    if side < 1:
        raise ValueError(f"side must be >= 1, got {side}")
    if not 0.0 <= fill <= 1.0:
        raise ValueError(f"fill must lie in [0, 1], got {fill}")
    return np.full((side, side), float(fill))


def clip01(img) -> np.ndarray:
    arr = as_image(img)
    return np.clip(arr, 0.0, 1.0)


def mse(a, b) -> float | np.ndarray:
    """Mean squared error over the last two axes (per batch item)."""
    a = as_image(a, name="a")
    b = as_image(b, name="b")
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"side mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    out = np.mean((a - b) ** 2, axis=(-2, -1))
    return float(out) if out.ndim == 0 else out
