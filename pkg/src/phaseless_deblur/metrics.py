"""PSNR and SSIM, plus alignment over the trivial ambiguities of Fourier
magnitude measurements (circular shifts and the conjugate flip)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import DimensionMismatch, TooSmall
from .grids import RealGrid

__all__ = ["AlignmentReport", "psnr", "ssim", "align_and_score"]

PSNR_CAP = 100.0
_WINDOW_RADIUS = 5  # 11x11 Gaussian window
_WINDOW_SIGMA = 1.5
_K1 = 0.01
_K2 = 0.03
_DATA_RANGE = 1.0


@dataclass(frozen=True)
class AlignmentReport:
    best_shift: tuple[int, int]
    flipped: bool
    aligned_psnr: float
    aligned_ssim: float


def psnr(x: RealGrid, ref: RealGrid, cap: float = PSNR_CAP) -> float:
    """Peak signal-to-noise ratio in dB for [0, 1]-scaled grids."""
    if x.shape != ref.shape:
        raise DimensionMismatch(f"shape mismatch: {x.shape} vs {ref.shape}")
    mse = float(np.mean((x.data - ref.data) ** 2))
    if mse < 1e-10:
        return cap
    return min(cap, 10.0 * np.log10(_DATA_RANGE ** 2 / mse))


def _gaussian_window() -> np.ndarray:
    x = np.arange(-_WINDOW_RADIUS, _WINDOW_RADIUS + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / _WINDOW_SIGMA) ** 2)
    g /= g.sum()
    return np.outer(g, g)


def ssim(x: RealGrid, ref: RealGrid) -> float:
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5)."""
    if x.shape != ref.shape:
        raise DimensionMismatch(f"shape mismatch: {x.shape} vs {ref.shape}")
    win = 2 * _WINDOW_RADIUS + 1
    if x.height < win or x.width < win:
        raise TooSmall(f"image {x.shape} smaller than the {win}x{win} window")
    w = _gaussian_window()
    a, b = x.data, ref.data

    def local(arr):
        return fftconvolve(arr, w, mode="valid")

    mu_a = local(a)
    mu_b = local(b)
    var_a = local(a * a) - mu_a * mu_a
    var_b = local(b * b) - mu_b * mu_b
    cov = local(a * b) - mu_a * mu_b
    c1 = (_K1 * _DATA_RANGE) ** 2
    c2 = (_K2 * _DATA_RANGE) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def _flip(a: np.ndarray) -> np.ndarray:
    # coordinate reversal modulo the grid (the conjugate-flip ambiguity)
    return np.roll(a[::-1, ::-1], (1, 1), axis=(0, 1))


def align_and_score(est: RealGrid, ref: RealGrid) -> AlignmentReport:
    """Search circular shifts x {identity, flip} and report the best metrics.

    Within each flip branch the FFT cross-correlation argmax minimizes MSE
    exactly (shift preserves the estimate's norm), so the search is the
    exhaustive one at FFT cost.
    """
    if est.shape != ref.shape:
        raise DimensionMismatch(f"shape mismatch: {est.shape} vs {ref.shape}")
    ref_f = np.fft.fft2(ref.data)
    best = None
    for flipped in (False, True):
        cand = _flip(est.data) if flipped else est.data
        corr = np.fft.ifft2(ref_f * np.conj(np.fft.fft2(cand))).real
        dr, dc = np.unravel_index(np.argmax(corr), corr.shape)
        aligned = np.roll(cand, (dr, dc), axis=(0, 1))
        score = psnr(RealGrid(aligned), ref)
        if best is None or score > best[0]:
            best = (score, (int(dr), int(dc)), flipped, aligned)
    score, shift, flipped, aligned = best
    return AlignmentReport(
        best_shift=shift,
        flipped=flipped,
        aligned_psnr=score,
        aligned_ssim=ssim(RealGrid(aligned), ref),
    )
