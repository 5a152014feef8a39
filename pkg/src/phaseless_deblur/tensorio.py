"""PBDT tensor file format and PNG image I/O.

Layout: magic "PBDT" | version u16 | rank u8 | dims u32... | payload
little-endian f32 row-major | crc32 u32 of all preceding bytes.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import BadCrc, BadMagic

__all__ = ["save_tensor", "load_tensor", "write_tensor_file", "read_tensor_file",
           "load_image", "save_image"]

_MAGIC = b"PBDT"
_VERSION = 1


def save_tensor(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr, dtype=np.float64)
    out = bytearray()
    out += _MAGIC
    out += struct.pack("<HB", _VERSION, arr.ndim)
    out += struct.pack(f"<{arr.ndim}I", *arr.shape)
    out += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    return bytes(out)


def load_tensor(data: bytes) -> np.ndarray:
    if len(data) < 8 or data[:4] != _MAGIC:
        raise BadMagic("not a PBDT tensor file")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise BadCrc("CRC32 mismatch")
    version, rank = struct.unpack("<HB", body[4:7])
    if version != _VERSION:
        raise BadMagic(f"unsupported tensor version {version}")
    dims = struct.unpack(f"<{rank}I", body[7 : 7 + 4 * rank])
    payload = body[7 + 4 * rank :]
    n = int(np.prod(dims))
    if len(payload) != 4 * n:
        raise BadCrc(f"payload length {len(payload)} != {4 * n}")
    return np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(dims)


def write_tensor_file(path, arr: np.ndarray) -> None:
    Path(path).write_bytes(save_tensor(arr))


def read_tensor_file(path) -> np.ndarray:
    return load_tensor(Path(path).read_bytes())


def load_image(path) -> np.ndarray:
    """Read a grayscale or RGB image as a [0, 1] float array (RGB averaged)."""
    with Image.open(path) as img:
        arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[..., :3].mean(axis=2)
    return arr / 255.0


def save_image(path, arr: np.ndarray) -> None:
    """Write a [0, 1] float array as an 8-bit grayscale PNG."""
    q = np.clip(np.round(np.asarray(arr) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(q, mode="L").save(path)
