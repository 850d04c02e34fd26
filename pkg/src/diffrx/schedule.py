"""Continuous-time diffusion parameterization on t in [0, 1].

Forward corruption interpolates data toward unit Gaussian noise,

    x_t = (1 - t) x0 + sqrt(t) eps,       eps ~ N(0, I),

so t = 0 is clean data and t = 1 pure noise.  The reverse step over an
interval dt is

    x_{t-dt} = x_t + dt * x0_hat - (dt / sqrt(t)) eps_hat
               + sqrt(dt (t - dt) / t) eps_tilde,

with x0_hat = (x_t - sqrt(t) eps_hat) / (1 - t) reconstructed from the
unit-variance noise estimate.  The deterministic coefficients satisfy
(sqrt(t) - dt/sqrt(t))^2 + dt (t - dt)/t = t - dt, so the forward marginal
variance telescopes step by step.  Taking dt = t collapses the whole
reverse pass into the single-step reconstruction x0_hat.

The variance-matching noise eps_tilde is drawn only when it is actually
injected (stochastic step with t - dt > 0); deterministic calls consume
nothing from the generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import DegenerateTimestepError, InvalidInputError, InvalidPlanError

if TYPE_CHECKING:
    from .denoise import NoisePredictor

# Largest timestep at which the 1/(1 - t) reconstruction is allowed.
T_MAX = 1.0 - 1e-9


@dataclass(frozen=True)
class ForwardSample:
    """Corrupted latent with the noise realization that produced it."""

    x_t: np.ndarray
    t: float
    eps: np.ndarray


@dataclass(frozen=True)
class ReverseStepPlan:
    """One reverse interval: start time, step size, noise injection flag."""

    t_from: float
    dt: float
    stochastic: bool = True

    def __post_init__(self) -> None:
        if not (0.0 <= self.t_from <= 1.0):
            raise InvalidPlanError(f"t_from must lie in [0, 1], got {self.t_from}")
        if not (0.0 < self.dt <= self.t_from):
            raise InvalidPlanError(
                f"dt must satisfy 0 < dt <= t_from, got dt={self.dt}, t_from={self.t_from}"
            )


def _check_finite(x: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} contains non-finite components")
    return x


def forward_corrupt(x0: np.ndarray, t: float, rng: np.random.Generator) -> ForwardSample:
    """Draw x_t = (1 - t) x0 + sqrt(t) eps with fresh unit-variance eps.

    The realization eps is returned alongside so tests can invert the step
    exactly.  ``x0`` may be a batch with the latent dimension last.
    """
    x0 = _check_finite(x0, "x0")
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"t must lie in [0, 1], got {t}")
    eps = rng.standard_normal(x0.shape)
    x_t = (1.0 - t) * x0 + math.sqrt(t) * eps
    return ForwardSample(x_t=x_t, t=t, eps=eps)


def single_step_denoise(x_t: np.ndarray, t: float, eps_hat: np.ndarray) -> np.ndarray:
    """Reconstruct the clean sample in one shot: (x_t - sqrt(t) eps_hat) / (1 - t).

    Equivalent to a reverse step with dt = t and no injected noise.
    """
    x_t = _check_finite(x_t, "x_t")
    eps_hat = _check_finite(eps_hat, "eps_hat")
    if not 0.0 < t <= 1.0:
        raise ValueError(f"t must lie in (0, 1), got {t}")
    if t > T_MAX:
        raise DegenerateTimestepError(
            f"t={t} too close to 1: the 1/(1 - t) reconstruction is degenerate"
        )
    return (x_t - math.sqrt(t) * eps_hat) / (1.0 - t)


def reverse_step(
    x_t: np.ndarray,
    plan: ReverseStepPlan,
    eps_hat: np.ndarray,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Advance one reverse interval from plan.t_from to t_from - dt.

    ``eps_hat`` is the predictor's unit-variance noise estimate at
    (x_t, t_from).  When the plan is stochastic and the target time is
    positive, fresh variance-matching noise is injected; the full jump
    dt = t_from routes through :func:`single_step_denoise` so a one-step
    chain is bit-identical to it.
    """
    t = plan.t_from
    dt = plan.dt
    if dt == t:
        return single_step_denoise(x_t, t, eps_hat)
    x_t = _check_finite(x_t, "x_t")
    eps_hat = _check_finite(eps_hat, "eps_hat")
    if t > T_MAX:
        raise DegenerateTimestepError(
            f"t_from={t} too close to 1: the 1/(1 - t) reconstruction is degenerate"
        )
    sqrt_t = math.sqrt(t)
    x0_hat = (x_t - sqrt_t * eps_hat) / (1.0 - t)
    out = x_t + dt * x0_hat - (dt / sqrt_t) * eps_hat
    if plan.stochastic:
        if rng is None:
            raise ValueError("stochastic reverse step requires an rng")
        out = out + math.sqrt(dt * (t - dt) / t) * rng.standard_normal(x_t.shape)
    return out


def reverse_chain(
    x_start: np.ndarray,
    t_start: float,
    num_steps: int,
    predictor: "NoisePredictor",
    stochastic: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Run the reverse process from t_start down to 0 on a uniform grid.

    [0, t_start] is split into num_steps equal intervals; the predictor is
    queried at each intermediate (x, t).  The grid is built as
    t_k = t_start * (num_steps - k) / num_steps so the final step lands on 0
    exactly and its injected-noise coefficient vanishes.
    """
    if num_steps < 1:
        raise ValueError(f"num_steps must be >= 1, got {num_steps}")
    if not (0.0 <= t_start <= 1.0):
        raise ValueError(f"t_start must lie in [0, 1], got {t_start}")
    x = np.asarray(x_start, dtype=np.float64)
    if t_start == 0.0:
        return x.copy()
    grid = [t_start * (num_steps - k) / num_steps for k in range(num_steps + 1)]
    for k in range(num_steps):
        t_from, t_to = grid[k], grid[k + 1]
        eps_hat = predictor.predict(x, t_from)
        plan = ReverseStepPlan(t_from=t_from, dt=t_from - t_to, stochastic=stochastic)
        x = reverse_step(x, plan, eps_hat, rng)
    return x
