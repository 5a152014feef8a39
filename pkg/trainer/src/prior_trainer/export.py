"""Export trained decoders to PBDW weight bundles."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from phaseless_deblur import priors

from .vae import Decoder, TrainSpec, Vae


class ExportError(Exception):
    pass


def decoder_to_model(decoder: Decoder) -> priors.GeneratorModel:
    spec = decoder.spec
    layers = []
    for i, lin in enumerate(decoder.linears):
        layers.append(priors.LayerSpec(
            kind="dense",
            weights=lin.weight.detach().numpy().astype(np.float64),
            bias=lin.bias.detach().numpy().astype(np.float64),
        ))
        if i < len(decoder.linears) - 1:
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


def export_bundle(model_or_vae, spec: TrainSpec, path) -> Path:
    """Write the decoder as a PBDW bundle (atomic: temp file then rename)."""
    decoder = model_or_vae.decoder if isinstance(model_or_vae, Vae) else model_or_vae
    if decoder.spec.latent_dim != spec.latent_dim:
        raise ExportError(
            f"decoder latent_dim {decoder.spec.latent_dim} does not match "
            f"spec latent_dim {spec.latent_dim}"
        )
    bundle = priors.save_bundle(decoder_to_model(decoder))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".pbdw.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(bundle)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
