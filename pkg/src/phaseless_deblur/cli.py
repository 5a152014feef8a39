"""Experiment harness: blur datasets, measurement synthesis, recovery runs,
and CSV/JSON reports.

Subcommands: gen-blurs, simulate, recover, eval, bundle-info. Every run
writes a frozen copy of its resolved config; rerunning from that copy
reproduces outputs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import blursynth, forward, metrics, priors, solver, tensorio
from .errors import ConfigError, PhaselessDeblurError
from .grids import KernelGrid, RealGrid, circular_convolve

__all__ = ["main"]


def _resolve_threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("PBD_THREADS")
    return int(env) if env else 1


def _blur_config(doc: dict) -> blursynth.BlurConfig:
    try:
        return blursynth.BlurConfig(
            kind=doc.get("kind", "gaussian"),
            kernel_size=doc.get("kernel_size", 15),
            sigma_range=tuple(doc.get("sigma_range", (0.5, 1.5))),
            length_range=tuple(doc.get("length_range", (5.0, 28.0))),
            seed=doc.get("seed", 0),
            count=doc.get("count", 1),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_gen_blurs(args) -> int:
    doc = {
        "kind": args.kind,
        "kernel_size": args.kernel_size,
        "sigma_range": (args.sigma_min, args.sigma_max),
        "length_range": (args.length_min, args.length_max),
        "seed": args.seed,
        "count": args.count,
    }
    config = _blur_config(doc)
    dataset = blursynth.generate_dataset(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stack = np.stack([k.data for k in dataset.kernels])
    tensorio.write_tensor_file(out / "kernels.pbdt", stack)
    manifest = {
        "config": {**doc, "sigma_range": list(doc["sigma_range"]),
                   "length_range": list(doc["length_range"])},
        "kernel_size": int(stack.shape[1]),
        "train_count": dataset.train_count,
        "test_count": dataset.test_count,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"wrote {config.count} kernels to {out}")
    return 0


def _load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _load_images(spec, base: Path) -> np.ndarray:
    path = base / spec if not Path(spec).is_absolute() else Path(spec)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
        if not files:
            raise ConfigError(f"no images found in {path}")
        return np.stack([tensorio.load_image(p) for p in files])
    if not path.exists():
        raise ConfigError(f"image source {path} does not exist")
    arr = tensorio.read_tensor_file(path)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ConfigError(f"image tensor must have rank 2 or 3, got {arr.ndim}")
    return arr


def _load_kernels(spec, base: Path) -> list[KernelGrid]:
    if isinstance(spec, dict):
        dataset = blursynth.generate_dataset(_blur_config(spec))
        return list(dataset.kernels[dataset.train_count:]) or list(dataset.kernels)
    path = base / spec if not Path(spec).is_absolute() else Path(spec)
    if not path.exists():
        raise ConfigError(f"kernel source {path} does not exist")
    arr = tensorio.read_tensor_file(path)
    if arr.ndim == 2:
        arr = arr[None]
    out = []
    for k in arr:
        k = np.maximum(k, 0.0)
        out.append(KernelGrid(k / k.sum()))
    return out


def _build_operator(doc: dict, height: int, width: int):
    kind = doc.get("kind")
    if kind == "fourier":
        ph = doc.get("padded_height", 2 * height)
        pw = doc.get("padded_width", 2 * width)
        sr = doc.get("support_row", (ph - height) // 2)
        sc = doc.get("support_col", (pw - width) // 2)
        return forward.OversampledFourierOp(height, width, ph, pw, sr, sc)
    if kind == "fp":
        return forward.build_fp_operator(
            height, width,
            cameras=doc.get("cameras", 4),
            radius=doc.get("radius"),
            subsample_percent=doc.get("subsample_percent", 100.0),
            seed=doc.get("seed", 0),
        )
    raise ConfigError(f"unknown operator kind {kind!r}")


def _load_prior(spec, base: Path) -> priors.GeneratorModel:
    if isinstance(spec, dict) and "subspace" in spec:
        path = base / spec["subspace"] if not Path(spec["subspace"]).is_absolute() else Path(spec["subspace"])
        if not path.exists():
            raise ConfigError(f"subspace basis {path} does not exist")
        arr = tensorio.read_tensor_file(path)
        if arr.ndim != 3:
            raise ConfigError("subspace basis tensor must have rank 3")
        return priors.linear_subspace_generator([RealGrid(b) for b in arr])
    if isinstance(spec, dict):
        spec = spec.get("bundle")
    path = base / spec if not Path(spec).is_absolute() else Path(spec)
    if not path.exists():
        raise ConfigError(f"prior bundle {path} does not exist")
    return priors.load_bundle(path.read_bytes())


def _solver_config(doc: dict, threads: int, seed_override=None) -> solver.SolverConfig:
    doc = dict(doc or {})
    try:
        return solver.SolverConfig(
            learning_rate=doc.get("learning_rate", 0.01),
            steps_per_restart=doc.get("steps_per_restart", 2000),
            restarts=doc.get("restarts", 20),
            gamma=doc.get("gamma", 0.0),
            lam=doc.get("lambda", 0.0),
            adam_beta1=doc.get("adam_beta1", 0.9),
            adam_beta2=doc.get("adam_beta2", 0.999),
            adam_eps=doc.get("adam_eps", 1e-8),
            rng_seed=seed_override if seed_override is not None else doc.get("seed", 0),
            update_mode=doc.get("update_mode", "alternating"),
            workers=doc.get("workers", threads),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    base = Path(args.config).parent
    if args.seed is not None:
        config["seed"] = args.seed
    out = Path(config.get("output_dir", "out"))
    out = out if out.is_absolute() else base / out
    out.mkdir(parents=True, exist_ok=True)

    images = _load_images(config["images"], base)
    kernels = _load_kernels(config["kernels"], base)
    n_img, h, w = images.shape
    op = _build_operator(config.get("operator", {}), h, w)
    op_json = forward.operator_to_json(op)
    noise_percent = float(config.get("noise_percent", 0.0))
    seed = int(config.get("seed", 0))
    count = int(config.get("count", n_img))

    instance_ids = []
    for i in range(count):
        img = RealGrid(images[i % n_img])
        small = kernels[i % len(kernels)]
        kernel = blursynth.embed_kernel(small, h, w)
        conv = circular_convolve(img, kernel)
        clean = forward.magnitude(op.apply(conv))
        sigma = forward.noise_sigma_for(clean, noise_percent)
        y = forward.add_noise(clean, noise_percent, rng_seed=seed + i)
        inst = out / f"instance_{i:03d}"
        inst.mkdir(exist_ok=True)
        tensorio.write_tensor_file(inst / "y.pbdt", y)
        tensorio.write_tensor_file(inst / "gt_image.pbdt", img.data)
        tensorio.write_tensor_file(inst / "gt_kernel.pbdt", kernel.data)
        (inst / "operator.json").write_text(op_json)
        info = {
            "instance_id": inst.name,
            "operator": json.loads(op_json)["kind"],
            "noise_percent": noise_percent,
            "noise_sigma": sigma,
            "seed": seed + i,
        }
        if isinstance(op, forward.FpOperator):
            info["subsampling_ratio"] = forward.subsampling_ratio(op)
        (inst / "instance.json").write_text(json.dumps(info, indent=2, sort_keys=True))
        instance_ids.append(inst.name)

    (out / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True))
    manifest = {
        "instances": instance_ids,
        "operator": json.loads(op_json),
        "noise_percent": noise_percent,
        "seed": seed,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"simulated {count} instances in {out}")
    return 0


def cmd_recover(args) -> int:
    config = _load_config(args.config)
    base = Path(args.config).parent
    out = Path(config.get("output_dir", "out"))
    out = out if out.is_absolute() else base / out
    if not (out / "manifest.json").exists():
        raise ConfigError(f"no simulation manifest in {out}; run simulate first")
    manifest = json.loads((out / "manifest.json").read_text())
    g_image = _load_prior(config["image_prior"], base)
    g_kernel = _load_prior(config["kernel_prior"], base)
    threads = _resolve_threads(args)
    sconf = _solver_config(config.get("solver"), threads, args.seed)

    for name in manifest["instances"]:
        inst = out / name
        op = forward.operator_from_json((inst / "operator.json").read_text())
        y = tensorio.read_tensor_file(inst / "y.pbdt")
        info = json.loads((inst / "instance.json").read_text())
        meas = forward.Measurement(values=y, operator_id=info["operator"],
                                   noise_sigma=info["noise_sigma"])
        result = solver.recover(meas, op, g_image, g_kernel, sconf)
        tensorio.write_tensor_file(inst / "estimate_image.pbdt", result.image_estimate.data)
        tensorio.write_tensor_file(inst / "estimate_kernel.pbdt", result.kernel_estimate.data)
        tensorio.save_image(inst / "estimate_image.png", result.image_estimate.data)
        kmax = result.kernel_estimate.data.max()
        tensorio.save_image(inst / "estimate_kernel.png",
                            result.kernel_estimate.data / kmax if kmax > 0 else result.kernel_estimate.data)
        with open(inst / "restarts.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["restart", "seed", "final_residual", "failed", "loss_trace"])
            for idx, rec in enumerate(result.per_restart):
                writer.writerow([idx, rec.seed, repr(rec.final_residual), int(rec.failed),
                                 ";".join(repr(v) for v in rec.loss_trace)])
        (inst / "result.json").write_text(json.dumps(
            {"best_residual": result.best_residual}, indent=2, sort_keys=True))
        print(f"{name}: residual {result.best_residual:.6g}")
    (out / "recover_config.json").write_text(json.dumps(
        {"solver": config.get("solver", {}), "image_prior": config["image_prior"],
         "kernel_prior": config["kernel_prior"]}, indent=2, sort_keys=True))
    return 0


def _metrics_policy_aligned(op_doc: dict) -> bool:
    # alignment only for Fourier with full-grid support; a support constraint
    # (or FP's pupils) breaks the shift ambiguity
    if op_doc.get("kind") != "fourier":
        return False
    return (op_doc["padded_height"] == op_doc["image_height"]
            and op_doc["padded_width"] == op_doc["image_width"])


def cmd_eval(args) -> int:
    out = Path(args.estimates)
    manifest_path = Path(args.manifest) if args.manifest else out / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"manifest {manifest_path} does not exist")
    manifest = json.loads(manifest_path.read_text())
    aligned = _metrics_policy_aligned(manifest["operator"])
    rows = []
    for name in manifest["instances"]:
        inst = out / name
        est = RealGrid(tensorio.read_tensor_file(inst / "estimate_image.pbdt"))
        ref = RealGrid(tensorio.read_tensor_file(inst / "gt_image.pbdt"))
        info = json.loads((inst / "instance.json").read_text())
        result = json.loads((inst / "result.json").read_text())
        if aligned:
            rep = metrics.align_and_score(est, ref)
            p, s = rep.aligned_psnr, rep.aligned_ssim
            flipped, (dr, dc) = rep.flipped, rep.best_shift
        else:
            p, s = metrics.psnr(est, ref), metrics.ssim(est, ref)
            flipped, dr, dc = False, 0, 0
        rows.append({
            "instance_id": name,
            "operator": info["operator"],
            "subsample_percent": info.get("subsampling_ratio", ""),
            "noise_percent": info["noise_percent"],
            "psnr": p,
            "ssim": s,
            "flipped": int(flipped),
            "shift_r": dr,
            "shift_c": dc,
            "residual": result["best_residual"],
        })
    fields = ["instance_id", "operator", "subsample_percent", "noise_percent",
              "psnr", "ssim", "flipped", "shift_r", "shift_c", "residual"]
    mean_psnr = float(np.mean([r["psnr"] for r in rows]))
    mean_ssim = float(np.mean([r["ssim"] for r in rows]))
    with open(out / "report.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for r in rows:
            writer.writerow({**r, "psnr": repr(r["psnr"]), "ssim": repr(r["ssim"]),
                             "residual": repr(r["residual"])})
        writer.writerow({"instance_id": "mean", "operator": "", "subsample_percent": "",
                         "noise_percent": "", "psnr": repr(mean_psnr), "ssim": repr(mean_ssim),
                         "flipped": "", "shift_r": "", "shift_c": "", "residual": ""})
    report = {"instances": rows, "mean_psnr": mean_psnr, "mean_ssim": mean_ssim}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    print(f"mean PSNR {mean_psnr:.2f} dB, mean SSIM {mean_ssim:.4f}")
    return 0


def cmd_bundle_info(args) -> int:
    path = Path(args.bundle)
    if not path.exists():
        raise ConfigError(f"bundle {path} does not exist")
    model = priors.load_bundle(path.read_bytes())
    print(f"latent_dim: {model.latent_dim}")
    print(f"output: {model.output_height}x{model.output_width}")
    print(f"output_activation: {model.output_activation}")
    print(f"layers ({len(model.layers)}):")
    for layer in model.layers:
        params = 0
        for arr in (layer.weights, layer.bias, layer.scale, layer.shift):
            if arr is not None:
                params += arr.size
        print(f"  {layer.kind}: {params} parameters")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pbd", description="Phaseless blind deblurring under generative priors",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the configured seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker count (default: PBD_THREADS or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-blurs", help="generate a synthetic blur-kernel dataset")
    p.add_argument("--kind", choices=["gaussian", "motion"], default="gaussian")
    p.add_argument("--kernel-size", type=int, default=15)
    p.add_argument("--sigma-min", type=float, default=0.5)
    p.add_argument("--sigma-max", type=float, default=1.5)
    p.add_argument("--length-min", type=float, default=5.0)
    p.add_argument("--length-max", type=float, default=28.0)
    p.add_argument("--seed", type=int, default=0, dest="seed")
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_blurs)

    p = sub.add_parser("simulate", help="synthesize phaseless measurements")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("recover", help="run the recovery algorithm")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("eval", help="score estimates against ground truth")
    p.add_argument("--estimates", required=True)
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bundle-info", help="describe a weight bundle")
    p.add_argument("bundle")
    p.set_defaults(func=cmd_bundle_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PhaselessDeblurError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
