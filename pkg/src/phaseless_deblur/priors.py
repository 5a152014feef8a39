"""Generative priors: differentiable decoders mapping latents to grids.

The layer set is the minimal closure needed for DCGAN-style decoders
(dense, transposed-conv, relu, tanh, sigmoid, reshape, frozen batchnorm),
each with a hand-written vector-Jacobian product. Models round-trip through
the PBDW binary bundle format, the sole contract with the trainer component.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadCrc,
    BadMagic,
    DimChainMismatch,
    DimensionMismatch,
    NonFiniteOutput,
    UnknownLayerKind,
)
from .grids import KernelGrid, RealGrid

__all__ = [
    "LatentVector",
    "LayerSpec",
    "GeneratorModel",
    "generate",
    "generate_vjp",
    "save_bundle",
    "load_bundle",
    "linear_subspace_generator",
    "unit_affine",
]

OUTPUT_ACTIVATIONS = ("identity", "tanh", "sigmoid", "normalized-nonneg")

_KIND_TAGS = {
    "dense": 1,
    "transposed-conv": 2,
    "relu": 3,
    "tanh": 4,
    "sigmoid": 5,
    "reshape": 6,
    "batchnorm-frozen": 7,
}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}


@dataclass(frozen=True)
class LatentVector:
    """Low-dimensional input z to a generator."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise DimensionMismatch("latent must be a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteOutput("latent contains NaN or Inf")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def dim(self) -> int:
        return self.data.size


@dataclass(frozen=True)
class LayerSpec:
    """One decoder layer. Parameter fields are used per kind:

    dense:            weights (out, in), bias (out,)
    transposed-conv:  weights (c_in, c_out, kh, kw), bias (c_out,), stride, padding
    reshape:          out_shape
    batchnorm-frozen: scale (channels,), shift (channels,)
    relu/tanh/sigmoid: no parameters
    """

    kind: str
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None
    stride: int = 1
    padding: int = 0
    out_shape: tuple[int, ...] | None = None
    scale: np.ndarray | None = None
    shift: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in _KIND_TAGS:
            raise UnknownLayerKind(f"unknown layer kind {self.kind!r}")
        for name in ("weights", "bias", "scale", "shift"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=np.float64).copy()
                arr.flags.writeable = False
                object.__setattr__(self, name, arr)
        if self.out_shape is not None:
            object.__setattr__(self, "out_shape", tuple(int(d) for d in self.out_shape))

    def output_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        """Shape this layer produces for the given input shape; raises
        DimChainMismatch if incompatible."""
        k = self.kind
        if k == "dense":
            out_dim, in_dim = self.weights.shape
            if in_shape != (in_dim,):
                raise DimChainMismatch(f"dense expects ({in_dim},), got {in_shape}")
            return (out_dim,)
        if k == "transposed-conv":
            c_in, c_out, kh, kw = self.weights.shape
            if len(in_shape) != 3 or in_shape[0] != c_in:
                raise DimChainMismatch(f"transposed-conv expects ({c_in}, H, W), got {in_shape}")
            _, h, w = in_shape
            s, p = self.stride, self.padding
            oh = (h - 1) * s - 2 * p + kh
            ow = (w - 1) * s - 2 * p + kw
            if oh < 1 or ow < 1:
                raise DimChainMismatch("transposed-conv output collapses to zero size")
            return (c_out, oh, ow)
        if k == "reshape":
            if int(np.prod(in_shape)) != int(np.prod(self.out_shape)):
                raise DimChainMismatch(f"cannot reshape {in_shape} to {self.out_shape}")
            return self.out_shape
        if k == "batchnorm-frozen":
            channels = self.scale.size
            if len(in_shape) == 3:
                if in_shape[0] != channels:
                    raise DimChainMismatch(f"batchnorm expects {channels} channels, got {in_shape}")
            elif in_shape != (channels,):
                raise DimChainMismatch(f"batchnorm expects ({channels},), got {in_shape}")
            return in_shape
        return in_shape  # elementwise activations

    def forward(self, x: np.ndarray) -> np.ndarray:
        k = self.kind
        if k == "dense":
            return self.weights @ x + self.bias
        if k == "transposed-conv":
            return _tconv_forward(x, self.weights, self.bias, self.stride, self.padding)
        if k == "relu":
            return np.maximum(x, 0.0)
        if k == "tanh":
            return np.tanh(x)
        if k == "sigmoid":
            return _sigmoid(x)
        if k == "reshape":
            return x.reshape(self.out_shape)
        if k == "batchnorm-frozen":
            if x.ndim == 3:
                return x * self.scale[:, None, None] + self.shift[:, None, None]
            return x * self.scale + self.shift
        raise UnknownLayerKind(k)

    def vjp(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Pull gradient g at the layer output back to the layer input."""
        k = self.kind
        if k == "dense":
            return self.weights.T @ g
        if k == "transposed-conv":
            return _tconv_vjp(x, g, self.weights, self.stride, self.padding)
        if k == "relu":
            return g * (x > 0)
        if k == "tanh":
            y = np.tanh(x)
            return g * (1.0 - y * y)
        if k == "sigmoid":
            y = _sigmoid(x)
            return g * y * (1.0 - y)
        if k == "reshape":
            return g.reshape(x.shape)
        if k == "batchnorm-frozen":
            if x.ndim == 3:
                return g * self.scale[:, None, None]
            return g * self.scale
        raise UnknownLayerKind(k)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _tconv_forward(x, w, b, stride, padding):
    c_in, c_out, kh, kw = w.shape
    _, h, win = x.shape
    fh = (h - 1) * stride + kh
    fw = (win - 1) * stride + kw
    full = np.zeros((c_out, fh, fw))
    for i in range(kh):
        for j in range(kw):
            # scatter-add the (i, j) kernel tap over the strided input lattice
            t = np.tensordot(w[:, :, i, j], x, axes=(0, 0))
            full[:, i : i + (h - 1) * stride + 1 : stride,
                 j : j + (win - 1) * stride + 1 : stride] += t
    p = padding
    out = full[:, p : fh - p, p : fw - p] if p else full
    return out + b[:, None, None]


def _tconv_vjp(x, g, w, stride, padding):
    c_in, c_out, kh, kw = w.shape
    _, h, win = x.shape
    fh = (h - 1) * stride + kh
    fw = (win - 1) * stride + kw
    g_full = np.zeros((c_out, fh, fw))
    p = padding
    g_full[:, p : fh - p, p : fw - p] = g
    grad = np.zeros_like(x)
    for i in range(kh):
        for j in range(kw):
            patch = g_full[:, i : i + (h - 1) * stride + 1 : stride,
                           j : j + (win - 1) * stride + 1 : stride]
            grad += np.tensordot(w[:, :, i, j], patch, axes=(1, 0))
    return grad


@dataclass(frozen=True)
class GeneratorModel:
    """A pre-trained decoder z -> grid with fixed weights."""

    latent_dim: int
    output_height: int
    output_width: int
    layers: tuple[LayerSpec, ...]
    output_activation: str = "identity"

    def __post_init__(self):
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")
        object.__setattr__(self, "layers", tuple(self.layers))
        self._check_chain()

    def _check_chain(self):
        shape: tuple[int, ...] = (self.latent_dim,)
        for layer in self.layers:
            shape = layer.output_shape(shape)
        if int(np.prod(shape)) != self.output_height * self.output_width:
            raise DimChainMismatch(
                f"layers produce {shape}, expected {self.output_height}x{self.output_width} values"
            )


def _head(model: GeneratorModel, x: np.ndarray) -> np.ndarray:
    act = model.output_activation
    if act == "identity":
        return x
    if act == "tanh":
        return np.tanh(x)
    if act == "sigmoid":
        return _sigmoid(x)
    # normalized-nonneg: softplus then divide by the total mass
    s = _softplus(x)
    return s / s.sum()


def _head_vjp(model: GeneratorModel, x: np.ndarray, g: np.ndarray) -> np.ndarray:
    act = model.output_activation
    if act == "identity":
        return g
    if act == "tanh":
        y = np.tanh(x)
        return g * (1.0 - y * y)
    if act == "sigmoid":
        y = _sigmoid(x)
        return g * y * (1.0 - y)
    s = _softplus(x)
    total = s.sum()
    y = s / total
    return _sigmoid(x) * (g - float((g * y).sum())) / total


def generate(model: GeneratorModel, z: LatentVector) -> RealGrid:
    """Forward pass z -> grid; kernel-head models return a valid KernelGrid."""
    if z.dim != model.latent_dim:
        raise DimensionMismatch(f"latent dim {z.dim} != model {model.latent_dim}")
    x = z.data
    for layer in model.layers:
        x = layer.forward(x)
    out = _head(model, x).reshape(model.output_height, model.output_width)
    if not np.all(np.isfinite(out)):
        raise NonFiniteOutput("generator produced NaN or Inf")
    if model.output_activation == "normalized-nonneg":
        return KernelGrid(out)
    return RealGrid(out)


def generate_vjp(model: GeneratorModel, z: LatentVector, upstream: RealGrid) -> LatentVector:
    """Gradient of <upstream, generate(model, z)> with respect to z."""
    if z.dim != model.latent_dim:
        raise DimensionMismatch(f"latent dim {z.dim} != model {model.latent_dim}")
    if upstream.shape != (model.output_height, model.output_width):
        raise DimensionMismatch(
            f"upstream shape {upstream.shape} != output {model.output_height}x{model.output_width}"
        )
    x = z.data
    inputs = []
    for layer in model.layers:
        inputs.append(x)
        x = layer.forward(x)
    g = _head_vjp(model, x, upstream.data.reshape(x.shape))
    for layer, layer_in in zip(reversed(model.layers), reversed(inputs)):
        g = layer.vjp(layer_in, g)
    return LatentVector(g)


def unit_affine(model: GeneratorModel) -> tuple[float, float]:
    """(a, b) such that a * generate(z) + b lies in [0, 1] for image models.

    tanh heads produce [-1, 1] and are remapped; other heads pass through.
    """
    if model.output_activation == "tanh":
        return 0.5, 0.5
    return 1.0, 0.0


def linear_subspace_generator(basis: list[RealGrid]) -> GeneratorModel:
    """Generator spanning a fixed linear subspace: generate(z) = sum_j z_j basis_j."""
    if not basis:
        raise DimensionMismatch("basis must be non-empty")
    h, w = basis[0].shape
    for b in basis:
        if b.shape != (h, w):
            raise DimensionMismatch("basis grids must share dimensions")
    weights = np.stack([b.data.ravel() for b in basis], axis=1)
    dense = LayerSpec(kind="dense", weights=weights, bias=np.zeros(h * w))
    reshape = LayerSpec(kind="reshape", out_shape=(h, w))
    return GeneratorModel(
        latent_dim=len(basis),
        output_height=h,
        output_width=w,
        layers=(dense, reshape),
        output_activation="identity",
    )


# --- PBDW bundle format -----------------------------------------------------
#
#   magic "PBDW" | version u16 | latent_dim u32 | out_h u32 | out_w u32
#   | output_activation u8 | layer_count u32 | layers... | crc32 u32
#
# All integers little-endian; parameters little-endian IEEE f32 row-major.

_MAGIC = b"PBDW"
_VERSION = 1
_ACT_TAGS = {"identity": 0, "tanh": 1, "sigmoid": 2, "normalized-nonneg": 3}
_TAG_ACTS = {v: k for k, v in _ACT_TAGS.items()}


def _pack_f32(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def save_bundle(model: GeneratorModel) -> bytes:
    out = bytearray()
    out += _MAGIC
    out += struct.pack("<HIII", _VERSION, model.latent_dim, model.output_height, model.output_width)
    out += struct.pack("<BI", _ACT_TAGS[model.output_activation], len(model.layers))
    for layer in model.layers:
        out += struct.pack("<B", _KIND_TAGS[layer.kind])
        k = layer.kind
        if k == "dense":
            o, i = layer.weights.shape
            out += struct.pack("<II", i, o)
            out += _pack_f32(layer.weights) + _pack_f32(layer.bias)
        elif k == "transposed-conv":
            c_in, c_out, kh, kw = layer.weights.shape
            out += struct.pack("<IIIIII", c_in, c_out, kh, kw, layer.stride, layer.padding)
            out += _pack_f32(layer.weights) + _pack_f32(layer.bias)
        elif k == "reshape":
            out += struct.pack("<B", len(layer.out_shape))
            out += struct.pack(f"<{len(layer.out_shape)}I", *layer.out_shape)
        elif k == "batchnorm-frozen":
            out += struct.pack("<I", layer.scale.size)
            out += _pack_f32(layer.scale) + _pack_f32(layer.shift)
        # relu/tanh/sigmoid carry no parameters
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise BadCrc("truncated bundle")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def f32(self, shape) -> np.ndarray:
        n = int(np.prod(shape))
        arr = np.frombuffer(self.take(4 * n), dtype="<f4").astype(np.float64)
        return arr.reshape(shape)


def load_bundle(data: bytes) -> GeneratorModel:
    if len(data) < 8 or data[:4] != _MAGIC:
        raise BadMagic("not a PBDW bundle")
    if len(data) < len(_MAGIC) + 4:
        raise BadCrc("truncated bundle")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise BadCrc("CRC32 mismatch")
    r = _Reader(body)
    r.take(4)  # magic
    version, latent_dim, out_h, out_w = r.unpack("<HIII")
    if version != _VERSION:
        raise BadMagic(f"unsupported bundle version {version}")
    act_tag, layer_count = r.unpack("<BI")
    if act_tag not in _TAG_ACTS:
        raise UnknownLayerKind(f"unknown output activation tag {act_tag}")
    layers = []
    for _ in range(layer_count):
        (tag,) = r.unpack("<B")
        kind = _TAG_KINDS.get(tag)
        if kind is None:
            raise UnknownLayerKind(f"unknown layer kind tag {tag}")
        if kind == "dense":
            i, o = r.unpack("<II")
            layers.append(LayerSpec(kind="dense", weights=r.f32((o, i)), bias=r.f32((o,))))
        elif kind == "transposed-conv":
            c_in, c_out, kh, kw, stride, padding = r.unpack("<IIIIII")
            layers.append(LayerSpec(
                kind="transposed-conv",
                weights=r.f32((c_in, c_out, kh, kw)), bias=r.f32((c_out,)),
                stride=stride, padding=padding,
            ))
        elif kind == "reshape":
            (ndim,) = r.unpack("<B")
            dims = r.unpack(f"<{ndim}I")
            layers.append(LayerSpec(kind="reshape", out_shape=dims))
        elif kind == "batchnorm-frozen":
            (channels,) = r.unpack("<I")
            layers.append(LayerSpec(
                kind="batchnorm-frozen", scale=r.f32((channels,)), shift=r.f32((channels,)),
            ))
        else:
            layers.append(LayerSpec(kind=kind))
    return GeneratorModel(
        latent_dim=latent_dim,
        output_height=out_h,
        output_width=out_w,
        layers=tuple(layers),
        output_activation=_TAG_ACTS[act_tag],
    )
