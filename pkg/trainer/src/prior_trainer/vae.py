"""Small VAEs whose decoders export to the primary component's layer set."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from phaseless_deblur import priors


@dataclass(frozen=True)
class TrainSpec:
    latent_dim: int = 100
    output_height: int = 28
    output_width: int = 28
    hidden_dims: tuple[int, ...] = (256,)
    output_activation: str = "tanh"  # "normalized-nonneg" for kernel priors
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 2e-4
    adam_beta1: float = 0.5
    kl_weight: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.latent_dim < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("latent_dim, epochs and batch_size must be >= 1")
        if self.output_activation not in ("tanh", "sigmoid", "normalized-nonneg"):
            raise ValueError(f"unsupported output activation {self.output_activation!r}")
        # the exported plan must pass the primary's dim-chain check up front
        zero_decoder_model(self)


def _plan(spec: TrainSpec) -> list[tuple[int, int]]:
    dims = [spec.latent_dim, *spec.hidden_dims, spec.output_height * spec.output_width]
    return list(zip(dims[:-1], dims[1:]))


def zero_decoder_model(spec: TrainSpec) -> priors.GeneratorModel:
    """The exported layer plan with zero weights; validates the dim chain."""
    layers = []
    pairs = _plan(spec)
    for i, (d_in, d_out) in enumerate(pairs):
        layers.append(priors.LayerSpec(kind="dense", weights=np.zeros((d_out, d_in)),
                                       bias=np.zeros(d_out)))
        if i < len(pairs) - 1:
            layers.append(priors.LayerSpec(kind="relu"))
    layers.append(priors.LayerSpec(kind="reshape",
                                   out_shape=(spec.output_height, spec.output_width)))
    return priors.GeneratorModel(
        latent_dim=spec.latent_dim,
        output_height=spec.output_height,
        output_width=spec.output_width,
        layers=tuple(layers),
        output_activation=spec.output_activation,
    )


class Decoder(nn.Module):
    def __init__(self, spec: TrainSpec):
        super().__init__()
        self.spec = spec
        self.linears = nn.ModuleList(nn.Linear(d_in, d_out) for d_in, d_out in _plan(spec))

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        x = z
        for i, lin in enumerate(self.linears):
            x = lin(x)
            if i < len(self.linears) - 1:
                x = F.relu(x)
        act = self.spec.output_activation
        if act == "tanh":
            x = torch.tanh(x)
        elif act == "sigmoid":
            x = torch.sigmoid(x)
        else:
            s = F.softplus(x)
            x = s / s.sum(dim=-1, keepdim=True)
        return x.view(-1, self.spec.output_height, self.spec.output_width)


class Encoder(nn.Module):
    def __init__(self, spec: TrainSpec):
        super().__init__()
        n = spec.output_height * spec.output_width
        hidden = spec.hidden_dims[-1] if spec.hidden_dims else 256
        self.body = nn.Sequential(nn.Linear(n, hidden), nn.ReLU())
        self.mu = nn.Linear(hidden, spec.latent_dim)
        self.logvar = nn.Linear(hidden, spec.latent_dim)

    def forward(self, x: torch.Tensor):
        h = self.body(x.flatten(1))
        return self.mu(h), self.logvar(h)


class Vae(nn.Module):
    def __init__(self, spec: TrainSpec):
        super().__init__()
        self.spec = spec
        self.encoder = Encoder(spec)
        self.decoder = Decoder(spec)

    def forward(self, x: torch.Tensor):
        mu, logvar = self.encoder(x)
        z = mu + torch.randn_like(mu) * torch.exp(0.5 * logvar)
        return self.decoder(z), mu, logvar


def train_vae(spec: TrainSpec, samples: np.ndarray, verbose: bool = False) -> Vae:
    """Train on (N, h, w) samples in the decoder's output range convention.

    tanh decoders are trained against samples remapped to [-1, 1];
    normalized-nonneg decoders against the raw (unit-sum) samples, with the
    reconstruction error scaled by the pixel count so it dominates the KL
    term at kernel magnitudes.
    """
    if samples.ndim != 3 or samples.shape[0] == 0:
        raise ValueError("samples must be a non-empty (N, h, w) array")
    if samples.shape[1:] != (spec.output_height, spec.output_width):
        raise ValueError(
            f"samples are {samples.shape[1:]}, spec wants "
            f"{(spec.output_height, spec.output_width)}"
        )
    torch.manual_seed(spec.seed)
    model = Vae(spec)
    data = torch.as_tensor(samples, dtype=torch.float32)
    target = 2.0 * data - 1.0 if spec.output_activation == "tanh" else data
    recon_scale = float(spec.output_height * spec.output_width) \
        if spec.output_activation == "normalized-nonneg" else 1.0
    opt = torch.optim.Adam(model.parameters(), lr=spec.learning_rate,
                           betas=(spec.adam_beta1, 0.999))
    n = data.shape[0]
    gen = torch.Generator().manual_seed(spec.seed)
    for epoch in range(spec.epochs):
        perm = torch.randperm(n, generator=gen)
        total = 0.0
        for start in range(0, n, spec.batch_size):
            idx = perm[start : start + spec.batch_size]
            batch, batch_target = data[idx], target[idx]
            recon, mu, logvar = model(batch)
            rec = recon_scale * F.mse_loss(recon, batch_target)
            kl = -0.5 * torch.mean(1 + logvar - mu.pow(2) - logvar.exp())
            loss = rec + spec.kl_weight * kl
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
        if verbose:
            print(f"epoch {epoch + 1}/{spec.epochs}: loss {total / n:.6f}")
    model.eval()
    return model
