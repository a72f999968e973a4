"""Unitary 2D DFT and the zero-padding used for oversampled measurements.

Both directions carry a ``1/D`` factor, so the adjoint of :func:`dft2` is
:func:`idft2`. The reverse pass in :mod:`phaseref.reflearn` relies on this.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["FftPlan", "dft2", "idft2", "embed", "extract"]


@dataclass(frozen=True)
class FftPlan:
    """Transform bound to one grid side. Stateless beyond the side check;
    the heavy lifting is numpy's pocketfft, which handles any side length."""

    side: int

    def __post_init__(self):
        if self.side < 1:
            raise ValueError(f"plan side must be >= 1, got {self.side}")

    def _check(self, grid: np.ndarray) -> None:
        if grid.ndim < 2 or grid.shape[-2:] != (self.side, self.side):
            raise ValueError(
                f"plan for side {self.side} got grid of shape {grid.shape}"
            )

    def forward(self, grid) -> np.ndarray:
        grid = np.asarray(grid)
        self._check(grid)
        return np.fft.fft2(grid, norm="ortho")

    def inverse(self, spec) -> np.ndarray:
        spec = np.asarray(spec)
        self._check(spec)
        return np.fft.ifft2(spec, norm="ortho")


def _square(grid: np.ndarray) -> int:
    if grid.ndim < 2 or grid.shape[-1] != grid.shape[-2]:
        raise ValueError(f"expected square trailing axes, got shape {grid.shape}")
    return grid.shape[-1]


def dft2(grid) -> np.ndarray:
    """X[k,l] = (1/D) sum_{m,n} x[m,n] exp(-2 pi i (km + ln) / D)."""
    grid = np.asarray(grid)
    return FftPlan(_square(grid)).forward(grid)


def idft2(spec) -> np.ndarray:
    spec = np.asarray(spec)
    return FftPlan(_square(spec)).inverse(spec)


def embed(img, s: int) -> np.ndarray:
    """Place ``img`` in the top-left block of an ``(s*d, s*d)`` zero grid."""
    if s not in (1, 2):
        raise ValueError(f"oversampling must be 1 or 2, got {s}")
    img = np.asarray(img, dtype=np.float64)
    d = _square(img)
    if s == 1:
        return img.copy()
    out = np.zeros(img.shape[:-2] + (s * d, s * d))
    out[..., :d, :d] = img
    return out


def extract(grid, d: int) -> np.ndarray:
    grid = np.asarray(grid)
    D = _square(grid)
    if d < 1 or D % d:
        raise ValueError(f"grid side {D} is not a multiple of {d}")
    return grid[..., :d, :d].copy()
