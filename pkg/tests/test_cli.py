import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from phaseless_deblur import blursynth, priors, tensorio
from phaseless_deblur.cli import main
from phaseless_deblur.grids import RealGrid


def run(args):
    return main([str(a) for a in args])


def dir_hash(path: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(path.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(path).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


@pytest.fixture
def experiment(tmp_path, rng):
    """A tiny subspace-prior experiment: inputs plus config file."""
    h = w = 16
    # smooth-ish image basis and two gaussian kernels as the kernel basis
    img_basis = rng.random((2, h, w))
    images = np.clip(np.tensordot(rng.random((2, 2)), img_basis, axes=1), 0, None)
    images /= images.max()
    tensorio.write_tensor_file(tmp_path / "images.pbdt", images)
    tensorio.write_tensor_file(tmp_path / "img_basis.pbdt", img_basis)

    ker_basis = np.stack([
        blursynth.embed_kernel(blursynth.gaussian_kernel(3, 0.6), h, w).data,
        blursynth.embed_kernel(blursynth.gaussian_kernel(3, 1.2), h, w).data,
    ])
    tensorio.write_tensor_file(tmp_path / "ker_basis.pbdt", ker_basis)
    # small (pre-embedding) kernel lying in the span of the embedded basis
    small = 0.5 * blursynth.gaussian_kernel(3, 0.6).data + 0.5 * blursynth.gaussian_kernel(3, 1.2).data
    tensorio.write_tensor_file(tmp_path / "kernels.pbdt", np.stack([small]))

    config = {
        "operator": {"kind": "fourier"},
        "images": "images.pbdt",
        "kernels": "kernels.pbdt",
        "image_prior": {"subspace": "img_basis.pbdt"},
        "kernel_prior": {"subspace": "ker_basis.pbdt"},
        "solver": {"learning_rate": 0.05, "steps_per_restart": 800, "restarts": 4, "seed": 4},
        "noise_percent": 0.0,
        "seed": 4,
        "count": 2,
        "output_dir": "out",
    }
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(config))
    return tmp_path, cfg


class TestGenBlurs:
    def test_writes_dataset_and_manifest(self, tmp_path):
        out = tmp_path / "blurs"
        assert run(["gen-blurs", "--kind", "gaussian", "--count", "8", "--seed", "7",
                    "--out", out]) == 0
        kernels = tensorio.read_tensor_file(out / "kernels.pbdt")
        assert kernels.shape[0] == 8
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["train_count"] == 6 and manifest["test_count"] == 2

    def test_invalid_range_exits_2(self, tmp_path, capsys):
        code = run(["gen-blurs", "--sigma-min", "1.5", "--sigma-max", "0.5",
                    "--out", tmp_path / "x"])
        assert code == 2
        assert "sigma" in capsys.readouterr().err.lower()

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(["gen-blurs", "--kind", "motion", "--count", "4", "--seed", "3",
                        "--out", out]) == 0
        assert dir_hash(a) == dir_hash(b)


class TestSimulate:
    def test_writes_instances(self, experiment):
        tmp_path, cfg = experiment
        assert run(["simulate", "--config", cfg]) == 0
        out = tmp_path / "out"
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["instances"]) == 2
        inst = out / manifest["instances"][0]
        y = tensorio.read_tensor_file(inst / "y.pbdt")
        assert y.shape == (32 * 32,)
        assert np.all(y >= 0)  # noiseless magnitudes

    def test_noise_sigma_recorded(self, experiment):
        tmp_path, cfg = experiment
        config = json.loads(cfg.read_text())
        config["noise_percent"] = 1.0
        cfg.write_text(json.dumps(config))
        assert run(["simulate", "--config", cfg]) == 0
        info = json.loads((tmp_path / "out/instance_000/instance.json").read_text())
        y_clean_range = info["noise_sigma"] / 0.01
        assert info["noise_percent"] == 1.0
        assert y_clean_range > 0

    def test_fp_ratio_in_manifest(self, experiment):
        tmp_path, cfg = experiment
        config = json.loads(cfg.read_text())
        config["operator"] = {"kind": "fp", "cameras": 4, "subsample_percent": 10.0, "seed": 2}
        cfg.write_text(json.dumps(config))
        assert run(["simulate", "--config", cfg]) == 0
        info = json.loads((tmp_path / "out/instance_000/instance.json").read_text())
        assert info["subsampling_ratio"] == pytest.approx(10.0, abs=0.2)


class TestRecoverAndEval:
    def test_end_to_end(self, experiment):
        tmp_path, cfg = experiment
        assert run(["simulate", "--config", cfg]) == 0
        assert run(["recover", "--config", cfg]) == 0
        out = tmp_path / "out"
        result = json.loads((out / "instance_000/result.json").read_text())
        y = tensorio.read_tensor_file(out / "instance_000/y.pbdt")
        assert result["best_residual"] < 1e-2 * np.linalg.norm(y)
        assert (out / "instance_000/estimate_image.png").exists()
        assert (out / "instance_000/restarts.csv").exists()

        assert run(["eval", "--estimates", out]) == 0
        report = json.loads((out / "report.json").read_text())
        assert len(report["instances"]) == 2
        rows = (out / "report.csv").read_text().strip().splitlines()
        assert len(rows) == 1 + 2 + 1  # header + instances + mean row

    def test_eval_mean_consistent_with_rows(self, experiment):
        tmp_path, cfg = experiment
        run(["simulate", "--config", cfg])
        run(["recover", "--config", cfg])
        run(["eval", "--estimates", tmp_path / "out"])
        report = json.loads((tmp_path / "out/report.json").read_text())
        want = np.mean([r["psnr"] for r in report["instances"]])
        assert report["mean_psnr"] == pytest.approx(want, abs=1e-9)

    def test_missing_bundle_exits_2(self, experiment, capsys):
        tmp_path, cfg = experiment
        run(["simulate", "--config", cfg])
        config = json.loads(cfg.read_text())
        config["image_prior"] = {"bundle": "missing.pbdw"}
        cfg.write_text(json.dumps(config))
        assert run(["recover", "--config", cfg]) == 2
        assert "missing.pbdw" in capsys.readouterr().err

    def test_recover_rerun_identical_csv(self, experiment):
        tmp_path, cfg = experiment
        run(["simulate", "--config", cfg])
        run(["recover", "--config", cfg])
        first = (tmp_path / "out/instance_000/restarts.csv").read_bytes()
        run(["recover", "--config", cfg])
        assert (tmp_path / "out/instance_000/restarts.csv").read_bytes() == first


class TestBundleInfo:
    def test_prints_summary(self, tmp_path, rng, capsys):
        layer = priors.LayerSpec(kind="dense", weights=rng.standard_normal((16, 4)),
                                 bias=np.zeros(16))
        model = priors.GeneratorModel(
            latent_dim=4, output_height=4, output_width=4,
            layers=(layer, priors.LayerSpec(kind="reshape", out_shape=(4, 4))),
            output_activation="tanh",
        )
        path = tmp_path / "m.pbdw"
        path.write_bytes(priors.save_bundle(model))
        assert run(["bundle-info", path]) == 0
        out = capsys.readouterr().out
        assert "latent_dim: 4" in out and "tanh" in out


class TestPngRoundTrip:
    def test_within_one_255th(self, tmp_path, rng):
        arr = rng.random((16, 16))
        tensorio.save_image(tmp_path / "x.png", arr)
        back = tensorio.load_image(tmp_path / "x.png")
        assert np.max(np.abs(back - arr)) <= 1.0 / 255.0

    def test_rgb_accepted(self, tmp_path, rng):
        from PIL import Image

        rgb = (rng.random((8, 8, 3)) * 255).astype(np.uint8)
        Image.fromarray(rgb, mode="RGB").save(tmp_path / "c.png")
        arr = tensorio.load_image(tmp_path / "c.png")
        assert arr.shape == (8, 8)
        assert arr.min() >= 0 and arr.max() <= 1
