"""Core signal types, the FFT contract, and circular convolution.

Grids are periodic 2-D real signals stored as float64. The FFT convention is
the unnormalized forward transform with the 1/n inverse, so the convolution
theorem holds with no extra scale factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft

from .errors import DimensionMismatch, NonFiniteOutput

__all__ = [
    "RealGrid",
    "KernelGrid",
    "ComplexVector",
    "fft2",
    "ifft2",
    "circular_convolve",
    "convolve_vjp",
]


@dataclass(frozen=True)
class RealGrid:
    """An h x w real signal on a periodic domain."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatch(f"grid must be 2-D and non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteOutput("grid contains NaN or Inf")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def flat(self) -> np.ndarray:
        """Row-major flattened copy of the data."""
        return self.data.ravel().copy()


class KernelGrid(RealGrid):
    """A RealGrid holding a blur kernel: nonnegative entries summing to 1."""

    SUM_TOL = 1e-6

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.data < 0):
            raise ValueError("kernel entries must be nonnegative")
        total = float(self.data.sum())
        if abs(total - 1.0) > self.SUM_TOL:
            raise ValueError(f"kernel entries must sum to 1, got {total}")


@dataclass(frozen=True)
class ComplexVector:
    """Flattened complex frequency-domain values."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.complex128)
        if arr.ndim != 1 or arr.size < 1:
            raise DimensionMismatch(f"complex vector must be 1-D and non-empty, got shape {arr.shape}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def length(self) -> int:
        return self.values.size

    @property
    def re(self) -> np.ndarray:
        return self.values.real

    @property
    def im(self) -> np.ndarray:
        return self.values.imag


def fft2(g: RealGrid) -> ComplexVector:
    """Unnormalized 2-D DFT of a grid, flattened row-major."""
    return ComplexVector(_fft.fft2(g.data).ravel())


def ifft2(v: ComplexVector, height: int, width: int) -> RealGrid:
    """Inverse of fft2 (1/n-normalized); discards sub-tolerance imaginary residue."""
    if v.length != height * width:
        raise DimensionMismatch(f"expected {height * width} values, got {v.length}")
    out = _fft.ifft2(v.values.reshape(height, width))
    return RealGrid(out.real)


def circular_convolve(i: RealGrid, k: RealGrid) -> RealGrid:
    """2-D circular convolution via pointwise product in the DFT domain."""
    if i.shape != k.shape:
        raise DimensionMismatch(f"shape mismatch: {i.shape} vs {k.shape}")
    out = _fft.ifft2(_fft.fft2(i.data) * _fft.fft2(k.data))
    resid = float(np.max(np.abs(out.imag))) if out.size else 0.0
    scale = max(1.0, float(np.max(np.abs(out.real))))
    assert resid <= 1e-9 * scale, f"imaginary residue {resid} too large"
    return RealGrid(out.real)


def _reverse(a: np.ndarray) -> np.ndarray:
    # coordinate reversal modulo the grid: a[(-r) % h, (-c) % w]
    return np.roll(a[::-1, ::-1], (1, 1), axis=(0, 1))


def convolve_vjp(i: RealGrid, k: RealGrid, upstream: RealGrid) -> tuple[RealGrid, RealGrid]:
    """Gradients of <upstream, i (*) k> with respect to i and k.

    Each gradient is the circular correlation of the upstream grid with the
    other operand, i.e. convolution with its coordinate reversal.
    """
    if not (i.shape == k.shape == upstream.shape):
        raise DimensionMismatch(
            f"shape mismatch: {i.shape}, {k.shape}, {upstream.shape}"
        )
    up_f = _fft.fft2(upstream.data)
    grad_i = _fft.ifft2(up_f * _fft.fft2(_reverse(k.data))).real
    grad_k = _fft.ifft2(up_f * _fft.fft2(_reverse(i.data))).real
    return RealGrid(grad_i), RealGrid(grad_k)
