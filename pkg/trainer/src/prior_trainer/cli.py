"""Command-line entry points for training and exporting priors."""

from __future__ import annotations

import argparse
import sys

from . import data
from .export import ExportError, export_bundle
from .vae import TrainSpec, train_vae


def cmd_train_image_prior(args) -> int:
    spec = TrainSpec(
        latent_dim=args.latent_dim,
        output_height=args.size,
        output_width=args.size,
        hidden_dims=tuple(args.hidden),
        output_activation="tanh",
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
    )
    if args.dataset:
        samples = data.image_folder(args.dataset)
    else:
        samples = data.digit_images(args.size)
    model = train_vae(spec, samples, verbose=True)
    export_bundle(model, spec, args.out)
    print(f"exported image prior to {args.out}")
    return 0


def cmd_train_kernel_prior(args) -> int:
    kernels = data.kernel_dataset(args.dataset)
    size = kernels.shape[1]
    spec = TrainSpec(
        latent_dim=args.latent_dim,
        output_height=size,
        output_width=kernels.shape[2],
        hidden_dims=tuple(args.hidden),
        output_activation="normalized-nonneg",
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
    )
    model = train_vae(spec, kernels, verbose=True)
    export_bundle(model, spec, args.out)
    print(f"exported kernel prior to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pbd-train",
                                     description="Train desk-scale generative priors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("image-prior", help="train a digit-image VAE prior")
    p.add_argument("--dataset", default=None,
                   help="image folder (default: bundled digit set)")
    p.add_argument("--size", type=int, default=28)
    p.add_argument("--latent-dim", type=int, default=100)
    p.add_argument("--hidden", type=int, nargs="+", default=[256])
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=2e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_image_prior)

    p = sub.add_parser("kernel-prior", help="train a blur-kernel VAE prior")
    p.add_argument("--dataset", required=True, help="PBDT kernel tensor file")
    p.add_argument("--latent-dim", type=int, default=50)
    p.add_argument("--hidden", type=int, nargs="+", default=[128])
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=2e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_kernel_prior)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ExportError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
