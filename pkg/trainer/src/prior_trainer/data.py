"""Training data loaders: digit images and blur-kernel tensor datasets."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.ndimage import zoom
from sklearn.datasets import load_digits

from phaseless_deblur import tensorio


def digit_images(size: int = 28) -> np.ndarray:
    """The bundled handwritten-digit set, upsampled to size x size in [0, 1]."""
    raw = load_digits().images / 16.0
    factor = size / raw.shape[1]
    out = np.stack([zoom(img, factor, order=1) for img in raw])
    return np.clip(out, 0.0, 1.0)


def kernel_dataset(path) -> np.ndarray:
    """Kernels from a PBDT tensor file, renormalized to unit sum."""
    arr = tensorio.read_tensor_file(path)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError(f"kernel tensor must have rank 3, got {arr.ndim}")
    if arr.shape[0] == 0:
        raise ValueError("kernel dataset is empty")
    arr = np.maximum(arr, 0.0)
    sums = arr.sum(axis=(1, 2), keepdims=True)
    if np.any(sums == 0):
        raise ValueError("kernel dataset contains an all-zero kernel")
    return arr / sums


def image_folder(path) -> np.ndarray:
    """All PNG/JPEG images under a directory as [0, 1] grayscale arrays."""
    files = sorted(p for p in Path(path).iterdir()
                   if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if not files:
        raise ValueError(f"no images found in {path}")
    return np.stack([tensorio.load_image(p) for p in files])
