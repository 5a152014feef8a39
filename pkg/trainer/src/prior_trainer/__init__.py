"""Desk-scale VAE training for generative deblurring priors."""

from .export import ExportError, decoder_to_model, export_bundle
from .vae import Decoder, TrainSpec, Vae, train_vae, zero_decoder_model

__version__ = "0.1.0"
