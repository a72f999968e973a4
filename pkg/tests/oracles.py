"""Slow, transparent reference computations used only by the tests.

Nothing here calls numpy's FFT or the package's transform code.
"""
import cmath
import math

import numpy as np


def naive_dft2(x):
    """Unitary 2D DFT by the explicit quadruple loop."""
    x = np.asarray(x, dtype=complex)
    D = x.shape[0]
    out = np.zeros((D, D), dtype=complex)
    for k in range(D):
        for l in range(D):
            acc = 0j
            for m in range(D):
                for n in range(D):
                    acc += x[m, n] * cmath.exp(-2j * math.pi * (k * m + l * n) / D)
            out[k, l] = acc / D
    return out


def naive_idft2(X):
    X = np.asarray(X, dtype=complex)
    D = X.shape[0]
    out = np.zeros((D, D), dtype=complex)
    for m in range(D):
        for n in range(D):
            acc = 0j
            for k in range(D):
                for l in range(D):
                    acc += X[k, l] * cmath.exp(2j * math.pi * (k * m + l * n) / D)
            out[m, n] = acc / D
    return out


def pad(x, s):
    d = len(x)
    g = np.zeros((s * d, s * d))
    g[:d, :d] = x
    return g


def naive_gs_step(x, u, y, s, eps=1e-12):
    """Straight-line transcription of one reference-aware GS iteration."""
    d = len(x)
    z = naive_dft2(pad(x + u, s))
    p = np.array([[z[k, l] / max(abs(z[k, l]), eps) for l in range(len(z))] for k in range(len(z))])
    w = naive_idft2(p * y)
    out = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            out[i, j] = max(0.0, w[i, j].real - u[i, j])
    return out


def summed_mse(a, b):
    total = 0.0
    for ra, rb in zip(a, b):
        for va, vb in zip(ra, rb):
            total += (va - vb) ** 2
    return total / (len(a) * len(a[0]))


def exhaustive_register_mse(recon, target):
    """Minimum MSE over both orientations and every circular shift, O(d^4)."""
    d = len(recon)
    flipped = np.array([[recon[(-i) % d][(-j) % d] for j in range(d)] for i in range(d)])
    best = math.inf
    for cand in (np.asarray(recon), flipped):
        for r in range(d):
            for c in range(d):
                shifted = np.array([[cand[(i - r) % d][(j - c) % d] for j in range(d)] for i in range(d)])
                best = min(best, summed_mse(shifted, target))
    return best
