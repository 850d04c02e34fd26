"""Principal-subspace codec: fit, round trip, energy normalization."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from diffrx.codec import LinearCodec, load_codec, save_codec
from diffrx.errors import FitError, InvalidInputError


def planted_subspace_samples(n=32, d=6, count=500, seed=70):
    """Data lying exactly in a d-dimensional affine subspace."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, d)))
    coeffs = rng.standard_normal((count, d)) * np.linspace(3.0, 1.0, d)
    mean = rng.standard_normal(n)
    return coeffs @ q.T + mean, q.T, mean


class TestFit:
    def test_in_subspace_data_round_trips_exactly(self):
        samples, _, _ = planted_subspace_samples()
        codec = LinearCodec.fit(samples, 6)
        recon = codec.decode(codec.encode(samples))
        assert float(np.max(np.abs(recon - samples))) <= 1e-8

    def test_isotropic_residual_matches_dimension_count(self):
        """Keeping d of n isotropic directions drops (n - d)/n of the energy.

        Scored on held-out draws: for isotropic data any rank-16
        projector out of 64 dimensions leaves 0.75 per pixel in
        expectation.  (The training residual sits visibly lower because
        the top empirical directions overfit the sample.)
        """
        rng = np.random.default_rng(71)
        codec = LinearCodec.fit(rng.standard_normal((4096, 64)), 16)
        held_out = rng.standard_normal((4096, 64))
        recon = codec.decode(codec.encode(held_out))
        residual = float(np.mean((held_out - recon) ** 2))
        assert_allclose(residual, 0.75, rtol=5e-2)

    def test_training_latents_have_unit_energy(self):
        rng = np.random.default_rng(72)
        samples = rng.standard_normal((2048, 32)) * np.linspace(0.2, 5.0, 32)
        codec = LinearCodec.fit(samples, 8)
        latents = codec.encode(samples)
        assert_allclose(float(np.mean(latents**2)), 1.0, rtol=1e-2)
        assert 0.99 <= codec.gamma_bar <= 1.01

    def test_mean_is_removed(self):
        samples, _, mean = planted_subspace_samples()
        codec = LinearCodec.fit(samples, 6)
        assert_allclose(codec.data_mean, samples.mean(axis=0), atol=1e-12)
        # the corpus mean encodes to the latent origin
        assert_allclose(codec.encode(samples.mean(axis=0)), 0.0, atol=1e-10)

    def test_basis_rows_orthonormal(self):
        rng = np.random.default_rng(73)
        codec = LinearCodec.fit(rng.standard_normal((512, 24)), 5)
        gram = codec.basis @ codec.basis.T
        assert float(np.max(np.abs(gram - np.eye(5)))) <= 1e-10

    def test_repeated_sample_is_rank_deficient(self):
        samples = np.tile(np.arange(8.0), (50, 1))
        with pytest.raises(FitError):
            LinearCodec.fit(samples, 2)

    def test_too_few_samples(self):
        rng = np.random.default_rng(74)
        with pytest.raises(FitError):
            LinearCodec.fit(rng.standard_normal((3, 16)), 8)

    def test_latent_dim_must_be_proper(self):
        rng = np.random.default_rng(75)
        samples = rng.standard_normal((64, 8))
        with pytest.raises(FitError):
            LinearCodec.fit(samples, 8)
        with pytest.raises(FitError):
            LinearCodec.fit(samples, 0)

    def test_fit_is_deterministic(self):
        rng = np.random.default_rng(76)
        samples = rng.standard_normal((256, 12))
        a = LinearCodec.fit(samples, 4)
        b = LinearCodec.fit(samples, 4)
        np.testing.assert_array_equal(a.basis, b.basis)


class TestCodecGeometry:
    def test_decode_is_an_isometry_up_to_scale(self):
        """Distances pass through decode as the unscaled latent distance."""
        rng = np.random.default_rng(77)
        codec = LinearCodec.fit(rng.standard_normal((512, 20)), 6)
        z1 = rng.standard_normal((40, 6))
        z2 = rng.standard_normal((40, 6))
        lhs = np.linalg.norm(codec.decode(z1) - codec.decode(z2), axis=1)
        rhs = np.linalg.norm((z1 - z2) / codec.latent_scale, axis=1)
        assert_allclose(lhs, rhs, atol=1e-10)

    def test_encode_decode_shapes(self):
        rng = np.random.default_rng(78)
        codec = LinearCodec.fit(rng.standard_normal((256, 10)), 3)
        assert codec.encode(np.zeros(10)).shape == (3,)
        assert codec.encode(np.zeros((5, 10))).shape == (5, 3)
        assert codec.decode(np.zeros(3)).shape == (10,)
        assert codec.latent_dim == 3
        assert codec.data_dim == 10

    def test_construction_validation(self):
        eye = np.eye(3, 8)
        with pytest.raises(InvalidInputError):
            LinearCodec(basis=eye * 1.01, data_mean=np.zeros(8),
                        latent_scale=np.ones(3), gamma_bar=1.0)
        with pytest.raises(InvalidInputError):
            LinearCodec(basis=eye, data_mean=np.zeros(8),
                        latent_scale=np.array([1.0, -1.0, 1.0]), gamma_bar=1.0)
        with pytest.raises(InvalidInputError):
            LinearCodec(basis=eye, data_mean=np.zeros(8),
                        latent_scale=np.ones(3), gamma_bar=1.5)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(79)
        codec = LinearCodec.fit(rng.standard_normal((512, 16)), 4)
        path = tmp_path / "codec.ltns"
        save_codec(path, codec)
        loaded = load_codec(path)
        assert loaded.latent_dim == 4
        assert loaded.data_dim == 16
        x = rng.standard_normal((8, 16))
        assert_allclose(loaded.encode(x), codec.encode(x), atol=1e-4)
        assert_allclose(loaded.decode(codec.encode(x)),
                        codec.decode(codec.encode(x)), atol=1e-4)

    def test_second_save_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(80)
        codec = LinearCodec.fit(rng.standard_normal((256, 12)), 3)
        p1 = tmp_path / "a.ltns"
        p2 = tmp_path / "b.ltns"
        save_codec(p1, codec)
        save_codec(p2, load_codec(p1))
        assert p1.read_bytes() == p2.read_bytes()
