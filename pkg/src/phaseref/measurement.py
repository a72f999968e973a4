"""Forward model: Fourier magnitudes of an image with a reference added."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_image
from .fourier import dft2, embed

__all__ = ["Measurement", "measure", "residual"]


@dataclass(frozen=True)
class Measurement:
    """Magnitudes on a ``D x D`` grid (``D = oversampling * d``).

    ``data`` may carry leading batch axes.
    """

    data: np.ndarray
    oversampling: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim < 2 or data.shape[-1] != data.shape[-2]:
            raise ValueError(f"measurement must be square, got shape {data.shape}")
        if self.oversampling not in (1, 2):
            raise ValueError(f"oversampling must be 1 or 2, got {self.oversampling}")
        if data.shape[-1] % self.oversampling:
            raise ValueError(
                f"side {data.shape[-1]} not divisible by oversampling {self.oversampling}"
            )
        if not np.all(np.isfinite(data)) or np.any(data < 0):
            raise ValueError("measurement entries must be finite and non-negative")
        object.__setattr__(self, "data", data)

    @property
    def side(self) -> int:
        return self.data.shape[-1]

    @property
    def image_side(self) -> int:
        return self.side // self.oversampling

    def __getitem__(self, idx) -> "Measurement":
        return Measurement(self.data[idx], self.oversampling)


def _with_reference(x: np.ndarray, u) -> np.ndarray:
    if u is None:
        return x
    u = as_image(u, name="reference")
    if u.shape[-1] != x.shape[-1]:
        raise ValueError(f"reference side {u.shape[-1]} != image side {x.shape[-1]}")
    return x + u


def measure(x, u=None, s: int = 1) -> Measurement:
    """y = |F(embed(x + u, s))|. ``u=None`` means no reference."""
    x = as_image(x)
    return Measurement(np.abs(dft2(embed(_with_reference(x, u), s))), s)


def residual(x, u, y: Measurement):
    """Mean squared magnitude mismatch over the ``D x D`` grid."""
    x = as_image(x)
    if x.shape[-1] != y.image_side:
        raise ValueError(
            f"image side {x.shape[-1]} incompatible with measurement side {y.side}"
            f" at oversampling {y.oversampling}"
        )
    mag = np.abs(dft2(embed(_with_reference(x, u), y.oversampling)))
    out = np.mean((mag - y.data) ** 2, axis=(-2, -1))
    return float(out) if out.ndim == 0 else out
