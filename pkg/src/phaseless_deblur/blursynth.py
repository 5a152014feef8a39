"""Synthetic blur kernels: Gaussian and motion, plus embedding onto the
image grid and seeded dataset generation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadLength, BadSize, KernelTooLarge
from .grids import KernelGrid, RealGrid

__all__ = [
    "BlurConfig",
    "BlurDataset",
    "gaussian_kernel",
    "motion_kernel",
    "embed_kernel",
    "generate_dataset",
]

TRAIN_FRACTION = 0.75  # 60k/20k proportion


@dataclass(frozen=True)
class BlurConfig:
    kind: str = "gaussian"
    kernel_size: int = 15
    sigma_range: tuple[float, float] = (0.5, 1.5)
    length_range: tuple[float, float] = (5.0, 28.0)
    seed: int = 0
    count: int = 1

    def __post_init__(self):
        if self.kind not in ("gaussian", "motion"):
            raise ValueError(f"unknown blur kind {self.kind!r}")
        if self.sigma_range[0] > self.sigma_range[1]:
            raise ValueError("sigma_range must be ordered")
        if self.length_range[0] > self.length_range[1]:
            raise ValueError("length_range must be ordered")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and positive")


@dataclass(frozen=True)
class BlurDataset:
    kernels: tuple[KernelGrid, ...]
    train_count: int
    test_count: int
    config: BlurConfig


def gaussian_kernel(size: int, sigma: float) -> KernelGrid:
    """Isotropic Gaussian sampled at integer offsets from center, unit sum."""
    if size < 1 or size % 2 == 0:
        raise BadSize(f"size must be odd and positive, got {size}")
    if sigma <= 0:
        raise BadSize(f"sigma must be > 0, got {sigma}")
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    k = np.outer(w, w)
    return KernelGrid(k / k.sum())


def motion_kernel(size: int, length: float, seed: int,
                  angle_std: float = 0.5, initial_angle: float | None = None) -> KernelGrid:
    """Random piecewise-linear trajectory of the given arc length, splatted
    bilinearly onto a size x size canvas and normalized.

    Heading performs a Gaussian random walk (std ``angle_std`` radians per
    unit step); ``angle_std=0`` with a fixed ``initial_angle`` gives a
    straight line. Deterministic per seed.
    """
    if size < 1 or size % 2 == 0:
        raise BadSize(f"size must be odd and positive, got {size}")
    if length <= 0 or length > size * np.sqrt(2.0):
        raise BadLength(f"length {length} not realizable on a {size}x{size} canvas")
    rng = np.random.default_rng(np.uint64(seed))
    n_steps = max(int(np.ceil(length * 4)), 2)
    angle = rng.uniform(0.0, 2.0 * np.pi) if initial_angle is None else float(initial_angle)
    step = length / n_steps
    pts = [np.zeros(2)]
    for _ in range(n_steps):
        pts.append(pts[-1] + step * np.array([np.sin(angle), np.cos(angle)]))
        angle += rng.normal(0.0, angle_std) * np.sqrt(step)
    pts = np.array(pts)

    # center the bounding box on the canvas; shrink only if the walk overflows
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    extent = float((hi - lo).max())
    if extent > size - 1:
        pts = pts * ((size - 1) / extent)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
    pts = pts - (lo + hi) / 2.0 + (size - 1) / 2.0

    canvas = np.zeros((size, size))
    for r, c in pts:
        r0, c0 = int(np.floor(r)), int(np.floor(c))
        fr, fc = r - r0, c - c0
        for dr, dc, wgt in (
            (0, 0, (1 - fr) * (1 - fc)),
            (0, 1, (1 - fr) * fc),
            (1, 0, fr * (1 - fc)),
            (1, 1, fr * fc),
        ):
            rr, cc = r0 + dr, c0 + dc
            if 0 <= rr < size and 0 <= cc < size:
                canvas[rr, cc] += wgt
    return KernelGrid(canvas / canvas.sum())


def embed_kernel(k: RealGrid, height: int, width: int) -> KernelGrid:
    """Zero-embed a small kernel on the image grid with its center at the
    origin, wrapping negative offsets periodically."""
    kh, kw = k.shape
    if kh > height or kw > width:
        raise KernelTooLarge(f"kernel {kh}x{kw} does not fit in {height}x{width}")
    big = np.zeros((height, width))
    big[:kh, :kw] = k.data
    big = np.roll(big, (-(kh // 2), -(kw // 2)), axis=(0, 1))
    return KernelGrid(big)


def generate_dataset(config: BlurConfig) -> BlurDataset:
    """Seed-deterministic kernel dataset with a 75/25 train/test split."""
    size = config.kernel_size
    if config.kind == "motion" and config.length_range[1] > 19 and size < 21:
        size = 21  # keep the longest trajectories realizable on one shared canvas
    kernels = []
    for i in range(config.count):
        sub = np.random.default_rng(np.uint64(config.seed) * np.uint64(2654435761) + np.uint64(i))
        if config.kind == "gaussian":
            sigma = sub.uniform(*config.sigma_range)
            kernels.append(gaussian_kernel(size, sigma))
        else:
            length = sub.uniform(*config.length_range)
            kernels.append(motion_kernel(size, length, seed=int(sub.integers(2 ** 62))))
    train = int(round(TRAIN_FRACTION * config.count))
    return BlurDataset(
        kernels=tuple(kernels),
        train_count=train,
        test_count=config.count - train,
        config=config,
    )
