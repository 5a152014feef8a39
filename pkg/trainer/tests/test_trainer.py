import numpy as np
import pytest
import torch

from phaseless_deblur import KernelGrid, LatentVector, blursynth, priors, tensorio
from prior_trainer import (
    ExportError,
    TrainSpec,
    decoder_to_model,
    export_bundle,
    train_vae,
    zero_decoder_model,
)
from prior_trainer.data import digit_images, kernel_dataset


@pytest.fixture(scope="module")
def tiny_image_vae():
    spec = TrainSpec(latent_dim=6, output_height=8, output_width=8,
                     hidden_dims=(16,), output_activation="tanh",
                     epochs=2, batch_size=16, seed=3)
    rng = np.random.default_rng(0)
    samples = rng.random((64, 8, 8))
    return spec, train_vae(spec, samples)


@pytest.fixture(scope="module")
def tiny_kernel_vae():
    spec = TrainSpec(latent_dim=4, output_height=5, output_width=5,
                     hidden_dims=(16,), output_activation="normalized-nonneg",
                     epochs=5, batch_size=16, seed=3)
    kernels = np.stack([
        blursynth.gaussian_kernel(5, s).data
        for s in np.linspace(0.5, 1.5, 48)
    ])
    return spec, train_vae(spec, kernels)


class TestTrainSpec:
    def test_rejects_unknown_activation(self):
        with pytest.raises(ValueError):
            TrainSpec(output_activation="softmax")

    def test_rejects_degenerate_sizes(self):
        with pytest.raises(ValueError):
            TrainSpec(latent_dim=0)

    def test_zero_decoder_model_has_expected_chain(self):
        spec = TrainSpec(latent_dim=5, output_height=6, output_width=7,
                         hidden_dims=(8, 9))
        model = zero_decoder_model(spec)
        assert model.latent_dim == 5
        assert (model.output_height, model.output_width) == (6, 7)
        kinds = [layer.kind for layer in model.layers]
        assert kinds == ["dense", "relu", "dense", "relu", "dense", "reshape"]


class TestData:
    def test_digit_images_shape_and_range(self):
        images = digit_images(28)
        assert images.shape == (1797, 28, 28)
        assert images.min() >= 0.0 and images.max() <= 1.0

    def test_kernel_dataset_renormalizes(self, tmp_path):
        raw = np.stack([blursynth.gaussian_kernel(5, 0.8).data * 2.0 for _ in range(3)])
        path = tmp_path / "k.pbdt"
        tensorio.write_tensor_file(path, raw)
        kernels = kernel_dataset(path)
        assert np.allclose(kernels.sum(axis=(1, 2)), 1.0, atol=1e-6)

    def test_kernel_dataset_rejects_wrong_rank(self, tmp_path):
        path = tmp_path / "k.pbdt"
        tensorio.write_tensor_file(path, np.ones((2, 3, 5, 5)))
        with pytest.raises(ValueError):
            kernel_dataset(path)

    def test_kernel_dataset_promotes_single_kernel(self, tmp_path):
        path = tmp_path / "k.pbdt"
        tensorio.write_tensor_file(path, blursynth.gaussian_kernel(5, 0.9).data)
        assert kernel_dataset(path).shape == (1, 5, 5)


class TestTraining:
    def test_same_seed_reproduces_weights(self):
        spec = TrainSpec(latent_dim=3, output_height=6, output_width=6,
                         hidden_dims=(8,), epochs=1, batch_size=8, seed=11)
        samples = np.random.default_rng(1).random((24, 6, 6))
        a = train_vae(spec, samples)
        b = train_vae(spec, samples)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)

    def test_rejects_empty_or_mismatched_samples(self):
        spec = TrainSpec(latent_dim=3, output_height=6, output_width=6,
                         hidden_dims=(8,), epochs=1)
        with pytest.raises(ValueError):
            train_vae(spec, np.zeros((0, 6, 6)))
        with pytest.raises(ValueError):
            train_vae(spec, np.zeros((4, 5, 5)))


class TestExportParity:
    def test_forward_agreement_on_random_latents(self, tiny_image_vae):
        spec, vae = tiny_image_vae
        model = decoder_to_model(vae.decoder)
        rng = np.random.default_rng(7)
        for _ in range(10):
            z = rng.standard_normal(spec.latent_dim)
            with torch.no_grad():
                want = vae.decoder(torch.as_tensor(z, dtype=torch.float32)[None]).numpy()[0]
            got = priors.generate(model, LatentVector(z)).data
            assert np.max(np.abs(got - want)) <= 1e-4

    def test_bundle_round_trip_agreement(self, tiny_image_vae, tmp_path):
        spec, vae = tiny_image_vae
        path = export_bundle(vae, spec, tmp_path / "m.pbdw")
        loaded = priors.load_bundle(path.read_bytes())
        direct = decoder_to_model(vae.decoder)
        rng = np.random.default_rng(8)
        for _ in range(10):
            z = LatentVector(rng.standard_normal(spec.latent_dim))
            got = priors.generate(loaded, z).data
            want = priors.generate(direct, z).data
            assert np.max(np.abs(got - want)) <= 1e-4

    def test_kernel_prior_decodes_valid_kernels(self, tiny_kernel_vae):
        spec, vae = tiny_kernel_vae
        model = decoder_to_model(vae.decoder)
        rng = np.random.default_rng(9)
        for _ in range(100):
            k = priors.generate(model, LatentVector(rng.standard_normal(spec.latent_dim)))
            assert isinstance(k, KernelGrid)
            assert np.all(k.data >= 0)
            assert abs(float(k.data.sum()) - 1.0) <= 1e-6

    def test_latent_mismatch_refused(self, tiny_image_vae):
        spec, vae = tiny_image_vae
        other = TrainSpec(latent_dim=spec.latent_dim + 1,
                          output_height=spec.output_height,
                          output_width=spec.output_width,
                          hidden_dims=spec.hidden_dims, epochs=1)
        with pytest.raises(ExportError):
            export_bundle(vae, other, "/tmp/never-written.pbdw")

    def test_tanh_output_stays_in_range(self, tiny_image_vae):
        spec, vae = tiny_image_vae
        model = decoder_to_model(vae.decoder)
        z = LatentVector(np.random.default_rng(10).standard_normal(spec.latent_dim) * 3)
        out = priors.generate(model, z).data
        assert out.min() >= -1.0 and out.max() <= 1.0
