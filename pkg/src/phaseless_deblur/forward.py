"""Measurement operators: oversampled Fourier magnitude and subsampled
Fourier ptychography (FP), plus magnitude and noise injection.

Both operators expose ``apply`` (grid -> complex vector) and ``adjoint``
(complex vector -> complex image-grid array) satisfying the real-inner-product
adjoint identity Re<A g, v> = <g, Re(A* v)> for real grids g.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as _fft

from .errors import DimensionMismatch, EmptyMeasurement
from .grids import ComplexVector, RealGrid

__all__ = [
    "OversampledFourierOp",
    "PupilMask",
    "SubsampleMask",
    "FpOperator",
    "Measurement",
    "apply_fourier",
    "apply_fp",
    "adjoint_apply",
    "magnitude",
    "add_noise",
    "subsampling_ratio",
    "build_fp_operator",
    "operator_to_json",
    "operator_from_json",
]


@dataclass(frozen=True)
class OversampledFourierOp:
    """Zero-pad an image into a larger grid at a known support, then DFT.

    With a 64x64 image in a 128x128 grid this is the 4x spectrum
    oversampling configuration.
    """

    image_height: int
    image_width: int
    padded_height: int
    padded_width: int
    support_row: int = 0
    support_col: int = 0

    def __post_init__(self):
        if self.padded_height < self.image_height or self.padded_width < self.image_width:
            raise DimensionMismatch("padded grid smaller than image")
        if not (0 <= self.support_row <= self.padded_height - self.image_height):
            raise DimensionMismatch("support row places image outside padded grid")
        if not (0 <= self.support_col <= self.padded_width - self.image_width):
            raise DimensionMismatch("support col places image outside padded grid")

    @property
    def m(self) -> int:
        return self.padded_height * self.padded_width

    def _embed(self, g: RealGrid) -> np.ndarray:
        padded = np.zeros((self.padded_height, self.padded_width))
        padded[
            self.support_row : self.support_row + self.image_height,
            self.support_col : self.support_col + self.image_width,
        ] = g.data
        return padded

    def apply(self, g: RealGrid) -> ComplexVector:
        if g.shape != (self.image_height, self.image_width):
            raise DimensionMismatch(f"image shape {g.shape} != operator {self.image_height}x{self.image_width}")
        return ComplexVector(_fft.fft2(self._embed(g)).ravel())

    def adjoint(self, v: ComplexVector) -> np.ndarray:
        if v.length != self.m:
            raise DimensionMismatch(f"vector length {v.length} != m {self.m}")
        # F^H = n F^{-1} with the unnormalized-forward convention
        full = self.m * _fft.ifft2(v.values.reshape(self.padded_height, self.padded_width))
        return full[
            self.support_row : self.support_row + self.image_height,
            self.support_col : self.support_col + self.image_width,
        ]


@dataclass(frozen=True)
class PupilMask:
    """Binary disk in the frequency plane acting as a band-pass filter."""

    height: int
    width: int
    center_u: float
    center_v: float
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("pupil radius must be positive")

    def mask(self) -> np.ndarray:
        """0/1 array on the unshifted frequency grid (DC at [0, 0])."""
        u = np.fft.fftfreq(self.height, d=1.0 / self.height)[:, None]
        v = np.fft.fftfreq(self.width, d=1.0 / self.width)[None, :]
        # periodic distance in each frequency coordinate
        du = np.abs(u - self.center_u)
        du = np.minimum(du, self.height - du)
        dv = np.abs(v - self.center_v)
        dv = np.minimum(dv, self.width - dv)
        return (du * du + dv * dv <= self.radius * self.radius).astype(np.float64)


@dataclass(frozen=True)
class SubsampleMask:
    """Which flattened samples a camera keeps, drawn without replacement."""

    total: int
    kept_indices: np.ndarray
    seed: int

    def __post_init__(self):
        idx = np.asarray(self.kept_indices, dtype=np.int64)
        if idx.ndim != 1:
            raise DimensionMismatch("kept_indices must be 1-D")
        if idx.size and (idx.min() < 0 or idx.max() >= self.total):
            raise ValueError("kept index out of range")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("kept_indices must be strictly increasing")
        idx = idx.copy()
        idx.flags.writeable = False
        object.__setattr__(self, "kept_indices", idx)

    @property
    def count(self) -> int:
        return int(self.kept_indices.size)

    @staticmethod
    def draw(total: int, count: int, seed: int) -> "SubsampleMask":
        """Exact-count sampling without replacement, deterministic per seed."""
        if not (0 <= count <= total):
            raise ValueError(f"cannot keep {count} of {total} samples")
        rng = np.random.default_rng(np.uint64(seed))
        idx = np.sort(rng.choice(total, size=count, replace=False))
        return SubsampleMask(total=total, kept_indices=idx, seed=seed)

    @staticmethod
    def draw_fraction(total: int, fraction: float, seed: int) -> "SubsampleMask":
        return SubsampleMask.draw(total, int(round(fraction * total)), seed)


@dataclass(frozen=True)
class FpOperator:
    """Coherent camera array: per camera, band-pass in Fourier then subsample."""

    height: int
    width: int
    cameras: tuple[tuple[PupilMask, SubsampleMask], ...]

    def __post_init__(self):
        n = self.height * self.width
        for pupil, sub in self.cameras:
            if (pupil.height, pupil.width) != (self.height, self.width):
                raise DimensionMismatch("pupil grid does not match image grid")
            if sub.total != n:
                raise DimensionMismatch("subsample mask total does not match grid size")
        object.__setattr__(self, "cameras", tuple(self.cameras))

    @property
    def m(self) -> int:
        return sum(sub.count for _, sub in self.cameras)

    def apply(self, g: RealGrid) -> ComplexVector:
        if g.shape != (self.height, self.width):
            raise DimensionMismatch(f"image shape {g.shape} != operator {self.height}x{self.width}")
        if self.m == 0:
            raise EmptyMeasurement("all subsample masks are empty")
        spectrum = _fft.fft2(g.data)
        parts = []
        for pupil, sub in self.cameras:
            field_ = _fft.ifft2(pupil.mask() * spectrum).ravel()
            parts.append(field_[sub.kept_indices])
        return ComplexVector(np.concatenate(parts))

    def adjoint(self, v: ComplexVector) -> np.ndarray:
        if v.length != self.m:
            raise DimensionMismatch(f"vector length {v.length} != m {self.m}")
        out = np.zeros((self.height, self.width), dtype=np.complex128)
        offset = 0
        for pupil, sub in self.cameras:
            chunk = v.values[offset : offset + sub.count]
            offset += sub.count
            scattered = np.zeros(self.height * self.width, dtype=np.complex128)
            scattered[sub.kept_indices] = chunk
            scattered = scattered.reshape(self.height, self.width)
            out += _fft.ifft2(pupil.mask() * _fft.fft2(scattered))
        return out


@dataclass(frozen=True)
class Measurement:
    """Phaseless measurement vector y, possibly noisy."""

    values: np.ndarray
    operator_id: str = ""
    noise_sigma: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


def apply_fourier(op: OversampledFourierOp, g: RealGrid) -> ComplexVector:
    return op.apply(g)


def apply_fp(op: FpOperator, g: RealGrid) -> ComplexVector:
    return op.apply(g)


def adjoint_apply(op, v: ComplexVector) -> np.ndarray:
    return op.adjoint(v)


def magnitude(v: ComplexVector) -> np.ndarray:
    """Elementwise modulus sqrt(re^2 + im^2)."""
    return np.abs(v.values)


def add_noise(values: np.ndarray, percent: float, rng_seed: int) -> np.ndarray:
    """Additive Gaussian noise with sigma = percent/100 of the dynamic range.

    For values pre-scaled to [0, 1] this matches sigma = percent/100.
    """
    if percent < 0:
        raise ValueError("noise percent must be >= 0")
    values = np.asarray(values, dtype=np.float64)
    if percent == 0:
        return values.copy()
    sigma = percent / 100.0 * float(values.max() - values.min())
    if sigma == 0:
        return values.copy()
    rng = np.random.default_rng(np.uint64(rng_seed))
    return values + rng.normal(0.0, sigma, size=values.shape)


def noise_sigma_for(values: np.ndarray, percent: float) -> float:
    values = np.asarray(values, dtype=np.float64)
    return percent / 100.0 * float(values.max() - values.min())


def subsampling_ratio(op: FpOperator) -> float:
    """Percentage of samples retained across all cameras."""
    if not op.cameras:
        raise EmptyMeasurement("operator has no cameras")
    n = op.height * op.width
    kept = sum(sub.count for _, sub in op.cameras)
    return kept * 100.0 / (n * len(op.cameras))


def build_fp_operator(
    height: int,
    width: int,
    cameras: int = 4,
    radius: float | None = None,
    subsample_percent: float = 100.0,
    seed: int = 0,
) -> FpOperator:
    """Standard FP geometry: sqrt(L) x sqrt(L) lattice of pupil centers.

    Each camera gets an independent subsample mask derived from the master
    seed; radius defaults to 0.35x the grid Nyquist frequency.
    """
    grid = int(round(cameras ** 0.5))
    if grid * grid != cameras:
        raise ValueError(f"camera count {cameras} is not a perfect square")
    if radius is None:
        radius = 0.35 * min(height, width) / 2.0
    n = height * width
    count = int(round(subsample_percent / 100.0 * n))
    pairs = []
    for a in range(grid):
        for b in range(grid):
            cu = (a + 0.5) * height / grid - height / 2.0
            cv = (b + 0.5) * width / grid - width / 2.0
            pupil = PupilMask(height=height, width=width, center_u=cu, center_v=cv, radius=radius)
            sub = SubsampleMask.draw(n, count, seed=seed * 1_000_003 + a * grid + b)
            pairs.append((pupil, sub))
    return FpOperator(height=height, width=width, cameras=tuple(pairs))


def operator_to_json(op) -> str:
    """Serialize an operator config so an experiment is reproducible."""
    if isinstance(op, OversampledFourierOp):
        doc = {
            "kind": "fourier",
            "image_height": op.image_height,
            "image_width": op.image_width,
            "padded_height": op.padded_height,
            "padded_width": op.padded_width,
            "support_row": op.support_row,
            "support_col": op.support_col,
        }
    elif isinstance(op, FpOperator):
        doc = {
            "kind": "fp",
            "height": op.height,
            "width": op.width,
            "cameras": [
                {
                    "center_u": pupil.center_u,
                    "center_v": pupil.center_v,
                    "radius": pupil.radius,
                    "seed": sub.seed,
                    "kept_count": sub.count,
                }
                for pupil, sub in op.cameras
            ],
        }
    else:
        raise TypeError(f"unknown operator type {type(op)!r}")
    return json.dumps(doc, indent=2, sort_keys=True)


def operator_from_json(text: str):
    doc = json.loads(text)
    if doc["kind"] == "fourier":
        return OversampledFourierOp(
            image_height=doc["image_height"],
            image_width=doc["image_width"],
            padded_height=doc["padded_height"],
            padded_width=doc["padded_width"],
            support_row=doc["support_row"],
            support_col=doc["support_col"],
        )
    if doc["kind"] == "fp":
        h, w = doc["height"], doc["width"]
        pairs = []
        for cam in doc["cameras"]:
            pupil = PupilMask(
                height=h, width=w,
                center_u=cam["center_u"], center_v=cam["center_v"], radius=cam["radius"],
            )
            sub = SubsampleMask.draw(h * w, cam["kept_count"], cam["seed"])
            pairs.append((pupil, sub))
        return FpOperator(height=h, width=w, cameras=tuple(pairs))
    raise ValueError(f"unknown operator kind {doc.get('kind')!r}")
