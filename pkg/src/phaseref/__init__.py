"""Fourier phase retrieval with a known reference image."""
from .core import clip01, image_new, make_rng, mse
from .fourier import dft2, embed, extract, idft2
from .measurement import Measurement, measure, residual
from .reconstruct import GdConfig, GsConfig, gd_run, gs_run, gs_step
from .references import SimpleRefParams, random_binary_reference, random_reference, simple_reference
from .reflearn import TrainConfig, adam_step, loss_and_grad_u, train_reference, unrolled_forward
from .registration import flip180, register, shift

__version__ = "0.1.0"
