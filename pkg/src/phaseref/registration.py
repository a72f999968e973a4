"""Alignment under the Fourier-magnitude ambiguities (circular shift, 180° flip)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import as_image
from .fourier import dft2, idft2

__all__ = ["Transform", "shift", "flip180", "apply_transform", "register"]


@dataclass(frozen=True)
class Transform:
    orientation: Literal["id", "flip"]
    shift: tuple[int, int]


def shift(img, r: int, c: int) -> np.ndarray:
    """Circular shift: ``out[i, j] = img[(i - r) % d, (j - c) % d]``."""
    img = as_image(img)
    return np.roll(img, (int(r), int(c)), axis=(-2, -1))


def flip180(img) -> np.ndarray:
    """``out[i, j] = img[-i % d, -j % d]``."""
    img = as_image(img)
    return np.roll(img[..., ::-1, ::-1], (1, 1), axis=(-2, -1))


def apply_transform(img, t: Transform) -> np.ndarray:
    base = flip180(img) if t.orientation == "flip" else as_image(img)
    return shift(base, *t.shift)


def register(recon, target, *, tie_tol: float = 1e-12):
    """Best (orientation, shift) of ``recon`` onto ``target`` by MSE.

    For each orientation the circular cross-correlation (via FFT) gives the
    candidate shifts; every candidate within ``tie_tol`` of the correlation
    maximum is then scored by direct MSE. Ties go to the lexicographically
    smallest ``(orientation, r, c)`` with ``id`` before ``flip``.

    Returns ``(aligned, transform, mse)``.
    """
    recon = as_image(recon, name="recon")
    target = as_image(target, name="target")
    if recon.shape != target.shape or recon.ndim != 2:
        raise ValueError(f"register needs two equal 2D images, got {recon.shape} and {target.shape}")
    d = recon.shape[-1]
    ft = dft2(target)
    scored = []
    for rank, orient in enumerate(("id", "flip")):
        cand = recon if orient == "id" else flip180(recon)
        # cc[r, c] = sum_ij target[i, j] * cand[i - r, j - c]
        cc = idft2(ft * np.conj(dft2(cand))).real * d
        top = cc.max()
        rows, cols = np.nonzero(cc >= top - tie_tol * max(1.0, abs(top)))
        for r, c in zip(rows.tolist(), cols.tolist()):
            err = float(np.mean((shift(cand, r, c) - target) ** 2))
            scored.append((err, rank, r, c))
    best_err = min(s[0] for s in scored)
    err, rank, r, c = min(
        (s for s in scored if s[0] <= best_err + tie_tol * max(1.0, best_err)),
        key=lambda s: s[1:],
    )
    t = Transform("id" if rank == 0 else "flip", (r, c))
    return apply_transform(recon, t), t, err
