"""Noise predictors and the end-to-end receiver denoising entry point.

A noise predictor estimates the unit-variance noise component of a
corrupted sample x_t = (1 - t) x0 + sqrt(t) eps.  Two exact oracles are
provided for analytic priors (diagonal Gaussian and diagonal-covariance
Gaussian mixture); both return the conditional-expectation estimate

    eps_hat = (x_t - (1 - t) E[x0 | x_t]) / sqrt(t),

which is the MMSE noise estimate under the prior.  A trainable predictor
with the same interface lives in :mod:`diffrx.mlp`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .adapt import ChannelSpec, ReceiverParams, receiver_params
from .channel import ChannelObservation
from .errors import NumericalError
from .schedule import reverse_chain


@runtime_checkable
class NoisePredictor(Protocol):
    """Deterministic map (x_t, t) -> eps_hat with matching dimensions."""

    def predict(self, x_t: np.ndarray, t: float) -> np.ndarray: ...


def _check_t(t: float) -> None:
    if not (0.0 < t < 1.0):
        raise ValueError(f"t must lie strictly inside (0, 1), got {t}")


@dataclass(frozen=True)
class GaussianPrior:
    """Diagonal Gaussian prior N(mean, diag(var)); scalars broadcast."""

    mean: np.ndarray | float = 0.0
    var: np.ndarray | float = 1.0

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.var) <= 0.0):
            raise ValueError("all prior variances must be > 0")

    def posterior_mean(self, x_t: np.ndarray, t: float) -> np.ndarray:
        """Exact E[x0 | x_t] per component under the forward model."""
        _check_t(t)
        x_t = np.asarray(x_t, dtype=np.float64)
        mu, s2 = np.asarray(self.mean, dtype=np.float64), np.asarray(self.var, dtype=np.float64)
        gain = (1.0 - t) * s2 / ((1.0 - t) ** 2 * s2 + t)
        return mu + gain * (x_t - (1.0 - t) * mu)

    def predict(self, x_t: np.ndarray, t: float) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=np.float64)
        x0_hat = self.posterior_mean(x_t, t)
        return (x_t - (1.0 - t) * x0_hat) / math.sqrt(t)


@dataclass(frozen=True)
class GmmPrior:
    """Mixture of diagonal Gaussians: (weight, mean, var) per component.

    Means and variances may be scalars (shared across dimensions) or
    d-vectors.  Weights must be non-negative and sum to 1.
    """

    weights: np.ndarray
    means: np.ndarray
    vars: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-D array")
        if np.any(w < 0.0) or abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must be non-negative and sum to 1")
        if np.any(np.asarray(self.vars) <= 0.0):
            raise ValueError("all component variances must be > 0")

    @classmethod
    def from_components(
        cls, components: Sequence[tuple[float, float, float]]
    ) -> "GmmPrior":
        """Build from (weight, mean, var) triples with scalar parameters."""
        w, m, v = (np.asarray(col, dtype=np.float64) for col in zip(*components))
        return cls(weights=w, means=m, vars=v)

    def _component_stats(self) -> tuple[np.ndarray, np.ndarray]:
        # [K] scalar-per-component parameters broadcast as [K, 1] over dims.
        m = np.asarray(self.means, dtype=np.float64)
        s2 = np.asarray(self.vars, dtype=np.float64)
        if m.ndim == 1:
            m = m[:, None]
        if s2.ndim == 1:
            s2 = s2[:, None]
        return m, s2

    def posterior_mean(self, x_t: np.ndarray, t: float) -> np.ndarray:
        """E[x0 | x_t]: responsibility-weighted per-component posteriors.

        Responsibilities are softmax over components of
        log w_k + log N(x_t; (1-t) mu_k, (1-t)^2 s_k^2 + t), summed across
        dimensions, stabilised by subtracting the per-sample maximum.
        """
        _check_t(t)
        x = np.asarray(x_t, dtype=np.float64)
        single = x.ndim == 1
        xb = x[None, :] if single else x  # [N, d]
        w = np.asarray(self.weights, dtype=np.float64)
        m, s2 = self._component_stats()  # [K, d-or-1]
        a = 1.0 - t
        marg_var = a * a * s2 + t  # [K, d-or-1]
        diff = xb[:, None, :] - a * m[None, :, :]  # [N, K, d]
        log_lik = -0.5 * np.sum(
            diff * diff / marg_var[None, :, :] + np.log(2.0 * math.pi * marg_var)[None, :, :],
            axis=2,
        )
        log_resp = np.log(w)[None, :] + log_lik  # [N, K]
        peak = np.max(log_resp, axis=1, keepdims=True)
        if not np.all(np.isfinite(peak)):
            raise NumericalError("all mixture responsibilities underflowed")
        resp = np.exp(log_resp - peak)
        resp /= np.sum(resp, axis=1, keepdims=True)
        comp_post = a * s2 / marg_var  # [K, d-or-1] gain
        x0_k = m[None, :, :] + comp_post[None, :, :] * diff  # [N, K, d]
        x0_hat = np.sum(resp[:, :, None] * x0_k, axis=1)
        return x0_hat[0] if single else x0_hat

    def predict(self, x_t: np.ndarray, t: float) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=np.float64)
        x0_hat = self.posterior_mean(x_t, t)
        return (x_t - (1.0 - t) * x0_hat) / math.sqrt(t)


def denoise_with_params(
    y: np.ndarray,
    params: ReceiverParams,
    predictor: NoisePredictor,
    num_steps: int = 1,
    stochastic: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Scale the observation by alpha and run the reverse chain from t*."""
    x_start = params.alpha * np.asarray(y, dtype=np.float64)
    return reverse_chain(x_start, params.t_star, num_steps, predictor, stochastic, rng)


def receive_and_denoise(
    obs: ChannelObservation,
    gamma: float,
    predictor: NoisePredictor,
    num_steps: int = 1,
    stochastic: bool = False,
    rng: np.random.Generator | None = None,
    y_energy: float | None = None,
    clamp_negative_phi: bool = False,
) -> np.ndarray:
    """Full receiver: adapt (t*, alpha) to the channel, scale, denoise.

    ``gamma`` is the training-corpus source energy.  By default the
    received energy is taken as the self-consistent gamma + sigma2 (the
    deployment assumption); pass ``y_energy`` (e.g. a batch measurement or
    ``obs.spec.y_energy``) to adapt to measured statistics instead, in
    which case a measurement below the noise floor raises unless clamping
    is enabled.  With num_steps=1 this is the low-latency single-shot path.
    """
    if y_energy is None:
        y_energy = gamma + obs.spec.sigma2
    spec = ChannelSpec(sigma2=obs.spec.sigma2, gamma=gamma, y_energy=y_energy)
    params = receiver_params(spec, clamp_negative=clamp_negative_phi)
    return denoise_with_params(obs.y, params, predictor, num_steps, stochastic, rng)
