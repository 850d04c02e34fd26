"""Noise-predictor MLP: exact gradients, training behavior, checkpoints."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from diffrx.errors import InvalidInputError, TrainingDivergedError
from diffrx.mlp import (
    TIME_FEATURES,
    EpsBatch,
    MlpPredictor,
    TrainConfig,
    draw_batch,
    gradient_check,
    load_checkpoint,
    mlp_gradient,
    mlp_loss,
    mlp_train,
    save_checkpoint,
    time_features,
)


def tiny_batch(d=2, n=16, seed=40):
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal((n, d))
    t = rng.uniform(0.05, 0.95, size=n)
    eps = rng.standard_normal((n, d))
    x_t = (1.0 - t)[:, None] * x0 + np.sqrt(t)[:, None] * eps
    return EpsBatch(x_t=x_t, t=t, eps=eps)


class TestTimeFeatures:
    def test_scalar(self):
        assert_allclose(time_features(0.25), [0.25, 0.5, 0.75])

    def test_vector(self):
        t = np.array([0.0, 1.0])
        feats = time_features(t)
        assert feats.shape == (2, TIME_FEATURES)
        assert_allclose(feats, [[0.0, 0.0, 1.0], [1.0, 1.0, 0.0]])


class TestModel:
    def test_init_shapes_and_zero_output(self):
        model = MlpPredictor.init(4, (8, 6), np.random.default_rng(41))
        assert model.input_dim == 4  # latent width; time features ride alongside
        assert model.output_dim == 4
        assert [w.shape for w in model.weights] == [(8, 7), (6, 8), (4, 6)]
        assert_array_equal(model.weights[-1], np.zeros((4, 6)))
        assert_array_equal(model.biases[-1], np.zeros(4))

    def test_fresh_model_predicts_zero(self):
        model = MlpPredictor.init(3, (5,), np.random.default_rng(42))
        x = np.random.default_rng(0).standard_normal((7, 3))
        assert_array_equal(model.predict(x, 0.3), np.zeros((7, 3)))

    def test_initial_loss_equals_noise_energy(self):
        """Zero predictions make the loss exactly the mean noise energy,
        which concentrates near d for unit Gaussian targets."""
        batch = tiny_batch(d=6, n=4096)
        model = MlpPredictor.init(6, (8,), np.random.default_rng(43))
        loss = mlp_loss(model, batch)
        assert_allclose(loss, float(np.mean(np.sum(batch.eps**2, axis=1))),
                        rtol=1e-12)
        assert_allclose(loss, 6.0, rtol=0.1)

    def test_single_vector_prediction_matches_batch(self):
        model = MlpPredictor.init(3, (5,), np.random.default_rng(44))
        model.weights[-1] += np.random.default_rng(1).standard_normal((3, 5))
        x = np.random.default_rng(2).standard_normal(3)
        single = model.predict(x, 0.4)
        stacked = model.predict(x[None, :], 0.4)
        assert single.shape == (3,)
        assert_allclose(single, stacked[0], atol=0)

    def test_copy_is_independent(self):
        model = MlpPredictor.init(2, (4,), np.random.default_rng(45))
        clone = model.copy()
        clone.weights[0][0, 0] += 1.0
        assert model.weights[0][0, 0] != clone.weights[0][0, 0]

    def test_parameter_count(self):
        model = MlpPredictor.init(2, (4,), np.random.default_rng(46))
        assert model.num_params == (2 + TIME_FEATURES) * 4 + 4 + 4 * 2 + 2

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            MlpPredictor(weights=[np.zeros((2, 2))], biases=[np.zeros(3)])
        with pytest.raises(InvalidInputError):
            TrainConfig(hidden=())
        with pytest.raises(InvalidInputError):
            TrainConfig(t_min=0.0)
        with pytest.raises(InvalidInputError):
            EpsBatch(x_t=np.zeros((2, 3)), t=np.zeros(5), eps=np.zeros((2, 3)))


class TestGradients:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_finite_difference_agreement(self, seed):
        """Analytic backprop vs central differences on every parameter."""
        rng = np.random.default_rng(seed)
        model = MlpPredictor.init(2, (4,), rng)
        # give the zero-initialized output layer some structure
        model.weights[-1] += 0.5 * rng.standard_normal(model.weights[-1].shape)
        model.biases[-1] += 0.1 * rng.standard_normal(model.biases[-1].shape)
        worst = gradient_check(model, tiny_batch(d=2, n=12, seed=seed))
        assert worst <= 1e-4

    def test_check_leaves_parameters_untouched(self):
        model = MlpPredictor.init(2, (3,), np.random.default_rng(47))
        before = [w.copy() for w in model.weights]
        gradient_check(model, tiny_batch(d=2, n=8))
        for w, saved in zip(model.weights, before):
            assert_array_equal(w, saved)

    def test_duplicating_the_batch_changes_nothing(self):
        """Per-sample mean loss: gradients are invariant to replication."""
        model = MlpPredictor.init(2, (4,), np.random.default_rng(48))
        model.weights[-1] += 0.3
        batch = tiny_batch(d=2, n=10)
        doubled = EpsBatch(
            x_t=np.vstack([batch.x_t, batch.x_t]),
            t=np.concatenate([batch.t, batch.t]),
            eps=np.vstack([batch.eps, batch.eps]),
        )
        for (gw1, gb1), (gw2, gb2) in zip(mlp_gradient(model, batch),
                                          mlp_gradient(model, doubled)):
            assert_allclose(gw1, gw2, atol=1e-12)
            assert_allclose(gb1, gb2, atol=1e-12)


class TestTraining:
    def test_loss_decreases(self):
        rng = np.random.default_rng(49)
        x0 = rng.standard_normal((2048, 4))
        config = TrainConfig(hidden=(24, 24), steps=1200, batch_size=128)
        model, trace = mlp_train(x0, config, np.random.default_rng(50))
        assert trace.shape == (1200,)
        start = float(np.mean(trace[:50]))
        end = float(np.mean(trace[-100:]))
        assert_allclose(start, 4.0, rtol=0.2)  # zero output layer at step 0
        assert end < 0.75 * 4.0

    def test_zero_steps_returns_fresh_model(self):
        rng = np.random.default_rng(51)
        x0 = rng.standard_normal((64, 3))
        model, trace = mlp_train(x0, TrainConfig(steps=0), np.random.default_rng(52))
        assert trace.shape == (0,)
        assert_array_equal(model.weights[-1], 0.0)

    def test_divergence_raises(self):
        rng = np.random.default_rng(53)
        x0 = rng.standard_normal((64, 4))
        config = TrainConfig(hidden=(8,), steps=5, batch_size=16,
                             learning_rate=1e200)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(TrainingDivergedError):
                mlp_train(x0, config, np.random.default_rng(54))

    def test_training_is_deterministic(self):
        rng = np.random.default_rng(55)
        x0 = rng.standard_normal((256, 3))
        config = TrainConfig(hidden=(8,), steps=50)
        m1, t1 = mlp_train(x0, config, np.random.default_rng(56))
        m2, t2 = mlp_train(x0, config, np.random.default_rng(56))
        assert_array_equal(t1, t2)
        for w1, w2 in zip(m1.weights, m2.weights):
            assert_array_equal(w1, w2)

    def test_rejects_bad_training_data(self):
        with pytest.raises(InvalidInputError):
            mlp_train(np.zeros((0, 3)), TrainConfig(steps=1), np.random.default_rng(0))


class TestDrawBatch:
    def test_shapes_and_time_range(self):
        rng = np.random.default_rng(57)
        x0 = rng.standard_normal((128, 5))
        config = TrainConfig(batch_size=64, t_min=0.2)
        batch = draw_batch(x0, config, np.random.default_rng(58))
        assert batch.x_t.shape == (64, 5)
        assert np.all(batch.t > 0.2)
        assert np.all(batch.t <= 1.0)

    def test_corruption_identity_on_zero_data(self):
        # with x0 = 0 the drawn x_t must be exactly sqrt(t) * eps
        config = TrainConfig(batch_size=32)
        batch = draw_batch(np.zeros((16, 3)), config, np.random.default_rng(59))
        assert_array_equal(batch.x_t, np.sqrt(batch.t)[:, None] * batch.eps)


class TestCheckpoints:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(60)
        x0 = rng.standard_normal((256, 3))
        config = TrainConfig(hidden=(6, 5), steps=40, batch_size=32,
                             learning_rate=2e-3, t_min=0.01)
        model, _ = mlp_train(x0, config, np.random.default_rng(61))
        path = tmp_path / "model.ltns"
        save_checkpoint(path, model, config)
        loaded, loaded_config = load_checkpoint(path)

        # storage is float32: the loaded model equals the cast original
        assert len(loaded.weights) == len(model.weights)
        for lw, w in zip(loaded.weights, model.weights):
            assert_array_equal(lw, w.astype(np.float32).astype(np.float64))
        assert loaded_config.hidden == (6, 5)
        assert loaded_config.steps == 40
        assert loaded_config.batch_size == 32
        assert loaded_config.learning_rate == float(np.float32(2e-3))
        assert loaded_config.t_min == float(np.float32(0.01))

        x = rng.standard_normal((4, 3))
        assert_allclose(loaded.predict(x, 0.5), model.predict(x, 0.5), atol=1e-5)

    def test_round_trip_is_stable(self, tmp_path):
        """A second save of the loaded model reproduces the file bytes."""
        model = MlpPredictor.init(2, (4,), np.random.default_rng(62))
        config = TrainConfig(hidden=(4,), steps=10)
        p1 = tmp_path / "a.ltns"
        p2 = tmp_path / "b.ltns"
        save_checkpoint(p1, model, config)
        loaded, loaded_config = load_checkpoint(p1)
        save_checkpoint(p2, loaded, loaded_config)
        assert p1.read_bytes() == p2.read_bytes()
