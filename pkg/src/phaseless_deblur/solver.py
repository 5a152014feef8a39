"""Recovery engine: latent-space objective, Adam, alternating descent with
random restarts.

The objective is ||y - |A(G_I(z_i) (*) G_K(z_k))|||^2 + gamma ||z_i||^2
+ lambda ||z_k||^2, minimized over both latents from several independent
standard-normal initializations; the restart with the smallest measurement
residual wins.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as _fft

from .errors import DimensionMismatch, NonFiniteLoss
from .forward import Measurement, adjoint_apply, magnitude
from .grids import RealGrid
from .priors import GeneratorModel, LatentVector, generate, generate_vjp, unit_affine

__all__ = [
    "SolverConfig",
    "AdamState",
    "RestartRecord",
    "RecoveryResult",
    "loss",
    "loss_gradients",
    "adam_step",
    "recover",
]

TRACE_EVERY = 50

UPDATE_MODES = ("alternating", "simultaneous", "gauss-seidel")


@dataclass(frozen=True)
class SolverConfig:
    learning_rate: float = 0.01
    steps_per_restart: int = 2000
    restarts: int = 20
    gamma: float = 0.0
    lam: float = 0.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    rng_seed: int = 0
    update_mode: str = "alternating"
    workers: int = 1
    stop_tolerance: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.steps_per_restart < 0 or self.restarts < 1:
            raise ValueError("steps and restarts must be >= 1 (steps may be 0)")
        if self.gamma < 0 or self.lam < 0:
            raise ValueError("penalty weights must be >= 0")
        if self.stop_tolerance < 0:
            raise ValueError("stop_tolerance must be >= 0")
        if self.update_mode not in UPDATE_MODES:
            raise ValueError(f"update_mode must be one of {UPDATE_MODES}")


class AdamState:
    """Bias-corrected Adam accumulator for one latent vector."""

    def __init__(self, dim: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.first_moment = np.zeros(dim)
        self.second_moment = np.zeros(dim)
        self.step_count = 0
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


def adam_step(state: AdamState, grad: np.ndarray, learning_rate: float) -> np.ndarray:
    """One Adam update; returns the additive delta for the parameters."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.first_moment.shape:
        raise DimensionMismatch("gradient shape does not match Adam state")
    state.step_count += 1
    t = state.step_count
    state.first_moment = state.beta1 * state.first_moment + (1 - state.beta1) * grad
    state.second_moment = state.beta2 * state.second_moment + (1 - state.beta2) * grad * grad
    m_hat = state.first_moment / (1 - state.beta1 ** t)
    v_hat = state.second_moment / (1 - state.beta2 ** t)
    return -learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass(frozen=True)
class RestartRecord:
    seed: int
    final_residual: float
    loss_trace: tuple[float, ...]
    failed: bool = False


@dataclass(frozen=True)
class RecoveryResult:
    best_z_image: LatentVector
    best_z_kernel: LatentVector
    image_estimate: RealGrid
    kernel_estimate: RealGrid
    best_residual: float
    per_restart: tuple[RestartRecord, ...]


def _support_ix(kh: int, kw: int, height: int, width: int):
    # image-grid positions of a kernel embedded with its center at the origin
    rows = (np.arange(kh) - kh // 2) % height
    cols = (np.arange(kw) - kw // 2) % width
    return np.ix_(rows, cols)


def _decode_kernel(model: GeneratorModel, z: LatentVector, height: int, width: int) -> RealGrid:
    """Decode a kernel and zero-embed it onto the image grid if smaller."""
    raw = _decode(model, z)
    if raw.shape == (height, width):
        return raw
    big = np.zeros((height, width))
    big[_support_ix(raw.height, raw.width, height, width)] = raw.data
    return type(raw)(big)


def _decode_kernel_vjp(model: GeneratorModel, z: LatentVector, upstream: RealGrid) -> np.ndarray:
    kh, kw = model.output_height, model.output_width
    if upstream.shape != (kh, kw):
        small = upstream.data[_support_ix(kh, kw, *upstream.shape)]
        upstream = RealGrid(small)
    return _decode_vjp(model, z, upstream)


def _decode(model: GeneratorModel, z: LatentVector) -> RealGrid:
    a, b = unit_affine(model)
    raw = generate(model, z)
    if a == 1.0 and b == 0.0:
        return raw
    return RealGrid(a * raw.data + b)


def _decode_vjp(model: GeneratorModel, z: LatentVector, upstream: RealGrid) -> np.ndarray:
    a, _ = unit_affine(model)
    if a != 1.0:
        upstream = RealGrid(a * upstream.data)
    return generate_vjp(model, z, upstream).data


def _forward_chain(z_i, z_k, operator, g_image, g_kernel):
    """Decode both latents and push them through the measurement chain.

    The image and kernel spectra are returned as well so the backward pass
    can reuse them: the gradient of a circular convolution with respect to
    one operand is the correlation of the upstream grid with the other,
    which in the DFT domain is a product with the conjugated spectrum.
    """
    img = _decode(g_image, z_i)
    ker = _decode_kernel(g_kernel, z_k, img.height, img.width)
    spec_i = _fft.fft2(img.data)
    spec_k = _fft.fft2(ker.data)
    conv = RealGrid(_fft.ifft2(spec_i * spec_k).real)
    au = operator.apply(conv)
    return spec_i, spec_k, au


def loss(z_i, z_k, measurement: Measurement, operator, g_image, g_kernel,
         gamma: float = 0.0, lam: float = 0.0) -> float:
    """Objective value at (z_i, z_k)."""
    _, _, au = _forward_chain(z_i, z_k, operator, g_image, g_kernel)
    y = measurement.values
    if y.size != au.length:
        raise DimensionMismatch(f"measurement length {y.size} != operator m {au.length}")
    r = magnitude(au) - y
    return float(r @ r + gamma * (z_i.data @ z_i.data) + lam * (z_k.data @ z_k.data))


def loss_gradients(z_i, z_k, measurement: Measurement, operator, g_image, g_kernel,
                   gamma: float = 0.0, lam: float = 0.0):
    """(grad z_i, grad z_k, loss value) via the amplitude-flow chain rule.

    The magnitude nonlinearity uses the subgradient phase(c) = c/|c| with
    phase(0) = 0, so gradients stay finite at dark measurements.
    """
    spec_i, spec_k, au = _forward_chain(z_i, z_k, operator, g_image, g_kernel)
    y = measurement.values
    if y.size != au.length:
        raise DimensionMismatch(f"measurement length {y.size} != operator m {au.length}")
    mag = magnitude(au)
    r = mag - y
    value = float(r @ r + gamma * (z_i.data @ z_i.data) + lam * (z_k.data @ z_k.data))

    phase = np.where(mag > 0, au.values / np.where(mag > 0, mag, 1.0), 0.0)
    upstream = type(au)(2.0 * r * phase)
    spec_up = _fft.fft2(adjoint_apply(operator, upstream).real)
    gi_grid = RealGrid(_fft.ifft2(spec_up * np.conj(spec_k)).real)
    gk_grid = RealGrid(_fft.ifft2(spec_up * np.conj(spec_i)).real)
    grad_zi = _decode_vjp(g_image, z_i, gi_grid) + 2.0 * gamma * z_i.data
    grad_zk = _decode_kernel_vjp(g_kernel, z_k, gk_grid) + 2.0 * lam * z_k.data
    return LatentVector(grad_zi), LatentVector(grad_zk), value


def _residual(z_i, z_k, measurement, operator, g_image, g_kernel) -> float:
    """Measurement misfit ||y - |A(i (*) k)||| used for restart selection."""
    _, _, au = _forward_chain(z_i, z_k, operator, g_image, g_kernel)
    r = magnitude(au) - measurement.values
    return float(np.sqrt(r @ r))


def _run_restart(index, measurement, operator, g_image, g_kernel, config: SolverConfig):
    seed = config.rng_seed + index
    rng = np.random.default_rng(np.uint64(seed) & 0xFFFFFFFFFFFFFFFF)
    z_i = LatentVector(rng.standard_normal(g_image.latent_dim))
    z_k = LatentVector(rng.standard_normal(g_kernel.latent_dim))
    adam_i = AdamState(g_image.latent_dim, config.adam_beta1, config.adam_beta2, config.adam_eps)
    adam_k = AdamState(g_kernel.latent_dim, config.adam_beta1, config.adam_beta2, config.adam_eps)
    trace = []
    args = (measurement, operator, g_image, g_kernel, config.gamma, config.lam)
    try:
        for t in range(config.steps_per_restart):
            if config.update_mode == "gauss-seidel":
                gi, _, value = loss_gradients(z_i, z_k, *args)
                z_i = LatentVector(z_i.data + adam_step(adam_i, gi.data, config.learning_rate))
                _, gk, _ = loss_gradients(z_i, z_k, *args)
                z_k = LatentVector(z_k.data + adam_step(adam_k, gk.data, config.learning_rate))
            else:
                # "alternating" (the two-line update with both gradients taken
                # at iterate t) and "simultaneous" coincide numerically, so
                # they share one gradient evaluation per step
                gi, gk, value = loss_gradients(z_i, z_k, *args)
                z_i = LatentVector(z_i.data + adam_step(adam_i, gi.data, config.learning_rate))
                z_k = LatentVector(z_k.data + adam_step(adam_k, gk.data, config.learning_rate))
            if not np.isfinite(value):
                raise NonFiniteLoss(f"loss became non-finite at step {t}")
            if t % TRACE_EVERY == 0:
                trace.append(value)
            if config.stop_tolerance > 0 and value < config.stop_tolerance:
                # a converged restart may stop early; off by default so the
                # step count stays exact unless explicitly requested
                break
        final = _residual(z_i, z_k, measurement, operator, g_image, g_kernel)
        if not np.isfinite(final):
            raise NonFiniteLoss("final residual non-finite")
    except NonFiniteLoss:
        record = RestartRecord(seed=seed, final_residual=float("inf"),
                               loss_trace=tuple(trace), failed=True)
        return record, None, None
    record = RestartRecord(seed=seed, final_residual=final, loss_trace=tuple(trace))
    return record, z_i, z_k


def recover(measurement: Measurement, operator, g_image: GeneratorModel,
            g_kernel: GeneratorModel, config: SolverConfig) -> RecoveryResult:
    """Run seeded random restarts and keep the lowest-residual reconstruction."""
    if measurement.values.size != operator.m:
        raise DimensionMismatch(
            f"measurement length {measurement.values.size} != operator m {operator.m}"
        )
    indices = range(config.restarts)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(
                lambda i: _run_restart(i, measurement, operator, g_image, g_kernel, config),
                indices,
            ))
    else:
        outcomes = [_run_restart(i, measurement, operator, g_image, g_kernel, config)
                    for i in indices]
    records = tuple(rec for rec, _, _ in outcomes)
    viable = [(rec.final_residual, i) for i, (rec, zi, zk) in enumerate(outcomes) if zi is not None]
    if not viable:
        raise NonFiniteLoss("every restart diverged")
    _, best = min(viable)
    best_rec, z_i, z_k = outcomes[best]
    return RecoveryResult(
        best_z_image=z_i,
        best_z_kernel=z_k,
        image_estimate=_decode(g_image, z_i),
        kernel_estimate=_decode_kernel(
            g_kernel, z_k, g_image.output_height, g_image.output_width),
        best_residual=best_rec.final_residual,
        per_restart=records,
    )
