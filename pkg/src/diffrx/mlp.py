"""A small fully connected noise predictor with hand-rolled training.

The network maps [x_t ++ (t, sqrt(t), 1 - t)] through tanh hidden layers
to a linear estimate of the noise component of x_t.  Everything is plain
NumPy: the forward pass, exact backpropagation, and an adaptive-moment
SGD loop, so the analytic gradients can be validated against central
finite differences without any framework in the way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, TrainingDivergedError
from .fileio import load_tensor, save_tensor

TIME_FEATURES = 3
"""Width of the time embedding appended to the network input."""


def time_features(t: np.ndarray | float) -> np.ndarray:
    """Embed timesteps as the raw feature triple (t, sqrt(t), 1 - t).

    Accepts a scalar or a 1-D array of timesteps in [0, 1]; returns an
    array with a trailing axis of width ``TIME_FEATURES``.
    """
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise InvalidInputError(f"timesteps must lie in [0, 1], got {t!r}")
    return np.stack([t, np.sqrt(t), 1.0 - t], axis=-1)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for :func:`mlp_train`.

    The defaults are the usual adaptive-moment settings; ``t_min`` keeps
    training away from t = 0 where the eps target conversion divides by
    sqrt(t).
    """

    hidden: tuple[int, ...] = (48, 48)
    steps: int = 20_000
    batch_size: int = 128
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_stable: float = 1e-8
    t_min: float = 1e-3

    def __post_init__(self) -> None:
        if not self.hidden or any(int(w) < 1 for w in self.hidden):
            raise InvalidInputError(f"hidden widths must be >= 1, got {self.hidden}")
        if self.steps < 0 or self.batch_size < 1:
            raise InvalidInputError("steps must be >= 0 and batch_size >= 1")
        if not (0.0 < self.t_min < 1.0):
            raise InvalidInputError(f"t_min must lie in (0, 1), got {self.t_min}")
        if self.learning_rate <= 0.0 or self.eps_stable <= 0.0:
            raise InvalidInputError("learning_rate and eps_stable must be > 0")


@dataclass
class EpsBatch:
    """One training batch: corrupted samples, their timesteps, the targets."""

    x_t: np.ndarray  # [N, d]
    t: np.ndarray  # [N]
    eps: np.ndarray  # [N, d]

    def __post_init__(self) -> None:
        self.x_t = np.asarray(self.x_t, dtype=np.float64)
        self.t = np.asarray(self.t, dtype=np.float64)
        self.eps = np.asarray(self.eps, dtype=np.float64)
        if self.x_t.ndim != 2 or self.x_t.shape != self.eps.shape:
            raise InvalidInputError("x_t and eps must be matching [N, d] arrays")
        if self.t.shape != (self.x_t.shape[0],):
            raise InvalidInputError("t must be a length-N vector of timesteps")


@dataclass
class MlpPredictor:
    """Tanh MLP mapping a corrupted latent and its timestep to eps_hat.

    ``weights[i]`` has shape [fan_out, fan_in]; hidden layers apply tanh,
    the final layer is linear.  Prediction is deterministic and the model
    is safe for concurrent read-only use; only training mutates it.
    """

    weights: list[np.ndarray] = field(repr=False)
    biases: list[np.ndarray] = field(repr=False)

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise InvalidInputError("weights and biases must be non-empty and paired")
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise InvalidInputError("each bias must match its weight's fan-out")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InvalidInputError("model parameters must be finite")

    @classmethod
    def init(
        cls,
        d: int,
        hidden: Sequence[int],
        rng: np.random.Generator,
        zero_output: bool = True,
    ) -> "MlpPredictor":
        """Build a fresh model for d-dimensional latents.

        Hidden weights are Gaussian with 1/sqrt(fan_in) scale.  With
        ``zero_output`` (the default) the final layer starts at zero, so
        the untrained model predicts eps_hat = 0 and the initial loss on
        unit-variance targets is d in expectation.
        """
        sizes = [int(d) + TIME_FEATURES, *[int(w) for w in hidden], int(d)]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(rng.standard_normal((fan_out, fan_in)) / math.sqrt(fan_in))
            biases.append(np.zeros(fan_out))
        if zero_output:
            weights[-1][:] = 0.0
        return cls(weights=weights, biases=biases)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1] - TIME_FEATURES

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MlpPredictor":
        return MlpPredictor(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def _forward(self, features: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Run the network on [N, d + TIME_FEATURES] features.

        Returns the output and the list of layer activations (the input
        followed by each hidden tanh output), which backprop consumes.
        """
        acts = [features]
        a = features
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.tanh(a @ w.T + b)
            acts.append(a)
        out = a @ self.weights[-1].T + self.biases[-1]
        return out, acts

    def predict(self, x_t: np.ndarray, t: float) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=np.float64)
        single = x_t.ndim == 1
        xb = x_t[None, :] if single else x_t
        if xb.ndim != 2 or xb.shape[1] != self.input_dim:
            raise InvalidInputError(
                f"expected latents of dimension {self.input_dim}, got shape {x_t.shape}"
            )
        feats = np.concatenate(
            [xb, np.broadcast_to(time_features(float(t)), (xb.shape[0], TIME_FEATURES))],
            axis=1,
        )
        out, _ = self._forward(feats)
        return out[0] if single else out


def _batch_features(model: MlpPredictor, batch: EpsBatch) -> np.ndarray:
    if batch.x_t.shape[1] != model.input_dim:
        raise InvalidInputError(
            f"batch dimension {batch.x_t.shape[1]} does not match model "
            f"dimension {model.input_dim}"
        )
    return np.concatenate([batch.x_t, time_features(batch.t)], axis=1)


def mlp_loss(model: MlpPredictor, batch: EpsBatch) -> float:
    """Training loss: batch mean of the squared eps prediction error norm."""
    out, _ = model._forward(_batch_features(model, batch))
    diff = out - batch.eps
    return float(np.mean(np.sum(diff * diff, axis=1)))


def mlp_gradient(
    model: MlpPredictor, batch: EpsBatch
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Exact analytic gradient of :func:`mlp_loss` for every parameter.

    Returns one (dL/dW, dL/db) pair per layer, in layer order.  Because
    the loss is a batch mean, duplicating the batch leaves the gradient
    unchanged.
    """
    out, acts = model._forward(_batch_features(model, batch))
    n = batch.x_t.shape[0]
    delta = (2.0 / n) * (out - batch.eps)  # dL/d(pre-activation) of the top layer
    grads: list[tuple[np.ndarray, np.ndarray]] = []
    for layer in range(len(model.weights) - 1, -1, -1):
        a_prev = acts[layer]
        grads.append((delta.T @ a_prev, delta.sum(axis=0)))
        if layer > 0:
            # acts[layer] is tanh of the previous pre-activation.
            delta = (delta @ model.weights[layer]) * (1.0 - acts[layer] ** 2)
    grads.reverse()
    return grads


def draw_batch(
    x0: np.ndarray, config: TrainConfig, rng: np.random.Generator
) -> EpsBatch:
    """Sample a training batch from clean latents.

    Rows of ``x0`` are drawn with replacement; each gets an independent
    timestep t ~ Uniform(t_min, 1] and noise eps ~ N(0, I), combined as
    x_t = (1 - t) x0 + sqrt(t) eps.
    """
    idx = rng.integers(0, x0.shape[0], size=config.batch_size)
    # 1 - U[0, 1 - t_min) lands in (t_min, 1], closed at the top.
    t = 1.0 - rng.uniform(0.0, 1.0 - config.t_min, size=config.batch_size)
    eps = rng.standard_normal((config.batch_size, x0.shape[1]))
    x_t = (1.0 - t)[:, None] * x0[idx] + np.sqrt(t)[:, None] * eps
    return EpsBatch(x_t=x_t, t=t, eps=eps)


def mlp_train(
    x0: np.ndarray, config: TrainConfig, rng: np.random.Generator
) -> tuple[MlpPredictor, np.ndarray]:
    """Fit a noise predictor to clean latents by adaptive-moment SGD.

    Args:
        x0: [N, d] array of clean latents, energy-normalized by the codec.
        config: hyperparameters; ``config.steps`` may be 0, in which case
            the freshly initialized model is returned untouched.
        rng: source of initialization, batch, and noise randomness.

    Returns:
        The trained model and the per-step loss trace.

    Raises:
        TrainingDivergedError: if the loss stops being finite.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.ndim != 2 or x0.shape[0] == 0:
        raise InvalidInputError("training data must be a non-empty [N, d] array")
    model = MlpPredictor.init(x0.shape[1], config.hidden, rng)
    m_w = [np.zeros_like(w) for w in model.weights]
    v_w = [np.zeros_like(w) for w in model.weights]
    m_b = [np.zeros_like(b) for b in model.biases]
    v_b = [np.zeros_like(b) for b in model.biases]
    trace = np.empty(config.steps)
    for step in range(config.steps):
        batch = draw_batch(x0, config, rng)
        out, acts = model._forward(_batch_features(model, batch))
        diff = out - batch.eps
        loss = float(np.mean(np.sum(diff * diff, axis=1)))
        if not math.isfinite(loss):
            raise TrainingDivergedError(
                f"loss became non-finite ({loss}) at step {step} of {config.steps}"
            )
        trace[step] = loss
        delta = (2.0 / config.batch_size) * diff
        b1c = 1.0 - config.beta1 ** (step + 1)
        b2c = 1.0 - config.beta2 ** (step + 1)
        for layer in range(len(model.weights) - 1, -1, -1):
            gw = delta.T @ acts[layer]
            gb = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ model.weights[layer]) * (1.0 - acts[layer] ** 2)
            for g, m_s, v_s, p in (
                (gw, m_w[layer], v_w[layer], model.weights[layer]),
                (gb, m_b[layer], v_b[layer], model.biases[layer]),
            ):
                m_s += (1.0 - config.beta1) * (g - m_s)
                v_s += (1.0 - config.beta2) * (g * g - v_s)
                p -= config.learning_rate * (m_s / b1c) / (np.sqrt(v_s / b2c) + config.eps_stable)
    return model, trace


def gradient_check(
    model: MlpPredictor, batch: EpsBatch, h: float = 1e-5
) -> float:
    """Compare analytic gradients against central finite differences.

    Every parameter is perturbed by +/- h in turn and the loss difference
    quotient is compared with :func:`mlp_gradient`.  Returns the largest
    relative error, with the denominator floored at 1e-8 so that exact
    zeros on both sides count as agreement.
    """
    analytic = mlp_gradient(model, batch)
    worst = 0.0
    for layer, (gw, gb) in enumerate(analytic):
        for param, grad in (
            (model.weights[layer], gw),
            (model.biases[layer], gb),
        ):
            it = np.nditer(param, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = param[idx]
                param[idx] = orig + h
                up = mlp_loss(model, batch)
                param[idx] = orig - h
                down = mlp_loss(model, batch)
                param[idx] = orig
                fd = (up - down) / (2.0 * h)
                ga = float(grad[idx])
                rel = abs(fd - ga) / max(abs(fd), abs(ga), 1e-8)
                worst = max(worst, rel)
                it.iternext()
    return worst


def save_checkpoint(path: str, model: MlpPredictor, config: TrainConfig) -> None:
    """Write the model (and a float32 echo of the config) to a tensor file.

    Layer shapes travel with the per-layer sections; the config section
    holds (learning_rate, beta1, beta2, eps_stable, batch_size, steps,
    t_min).  Hidden widths are recovered from the weight shapes.
    """
    sections: dict[str, np.ndarray] = {}
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        sections[f"layer{i}/w"] = w
        sections[f"layer{i}/b"] = b
    sections["train_config"] = np.array(
        [
            config.learning_rate,
            config.beta1,
            config.beta2,
            config.eps_stable,
            float(config.batch_size),
            float(config.steps),
            config.t_min,
        ]
    )
    save_tensor(path, sections)


def load_checkpoint(path: str) -> tuple[MlpPredictor, TrainConfig]:
    """Read a model written by :func:`save_checkpoint`.

    Parameters come back as float64 copies of the stored float32 values,
    so a save/load round trip reproduces predictions of the stored model
    bit-for-bit (both run the same float32-rounded parameters).
    """
    sections = load_tensor(path)
    weights, biases = [], []
    for i in range(len(sections)):
        wname, bname = f"layer{i}/w", f"layer{i}/b"
        if wname not in sections:
            break
        if bname not in sections:
            raise InvalidInputError(f"checkpoint is missing section {bname!r}")
        weights.append(np.asarray(sections[wname], dtype=np.float64))
        biases.append(np.asarray(sections[bname], dtype=np.float64))
    if not weights:
        raise InvalidInputError("checkpoint holds no layer sections")
    raw = sections.get("train_config")
    if raw is None or raw.shape != (7,):
        raise InvalidInputError("checkpoint is missing the train_config section")
    hidden = tuple(w.shape[0] for w in weights[:-1])
    config = TrainConfig(
        hidden=hidden if hidden else (1,),
        steps=int(round(float(raw[5]))),
        batch_size=int(round(float(raw[4]))),
        learning_rate=float(raw[0]),
        beta1=float(raw[1]),
        beta2=float(raw[2]),
        eps_stable=float(raw[3]),
        t_min=float(raw[6]),
    )
    return MlpPredictor(weights=weights, biases=biases), config
