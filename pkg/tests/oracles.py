"""Shared brute-force oracles, kept independent of the library's FFT paths."""

import numpy as np


def direct_dft2(a: np.ndarray) -> np.ndarray:
    """O(n^2) double-sum 2-D DFT (unnormalized forward)."""
    h, w = a.shape
    out = np.zeros((h, w), dtype=np.complex128)
    for u in range(h):
        for v in range(w):
            acc = 0.0 + 0.0j
            for r in range(h):
                for c in range(w):
                    acc += a[r, c] * np.exp(-2j * np.pi * (u * r / h + v * c / w))
            out[u, v] = acc
    return out


def direct_cyclic_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """O(n^2) circular convolution with explicit index mod arithmetic."""
    h, w = a.shape
    out = np.zeros((h, w))
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for i in range(h):
                for j in range(w):
                    acc += a[i, j] * b[(r - i) % h, (c - j) % w]
            out[r, c] = acc
    return out


def materialize_operator(op, h, w) -> np.ndarray:
    """Dense complex matrix of a linear operator, built from unit impulses."""
    from phaseless_deblur.grids import RealGrid

    cols = []
    for idx in range(h * w):
        e = np.zeros(h * w)
        e[idx] = 1.0
        cols.append(op.apply(RealGrid(e.reshape(h, w))).values)
    return np.stack(cols, axis=1)


def central_difference(f, x0: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    grad = np.zeros_like(x0, dtype=np.float64)
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp.flat[i] += step
        xm.flat[i] -= step
        grad.flat[i] = (f(xp) - f(xm)) / (2 * step)
    return grad


acceptance_verdicts = []
