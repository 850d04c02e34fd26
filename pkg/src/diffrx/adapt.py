"""Closed-form receiver adaptation: timestep matching and linear scaling.

Given the per-dimension channel statistics (noise variance ``sigma2``,
source energy ``gamma``, measured received energy ``y_energy``) the receiver
picks the diffusion timestep ``t*`` whose internal signal-to-noise ratio
equals the observed one, then a scalar ``alpha`` that aligns the second
moment of the scaled observation with the denoiser's training inputs.

All energies are per-dimension second moments (total squared norm divided
by the dimension), which keeps ``phi`` independent of the latent dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NegativeEnergyError


@dataclass(frozen=True)
class ChannelSpec:
    """Second-order channel statistics driving the receiver adaptation.

    Attributes:
        sigma2: per-dimension channel noise variance (linear scale, > 0).
        gamma: per-dimension source energy E[||x0||^2]/d (> 0).
        y_energy: per-dimension received energy E[||y||^2]/d (>= 0).
            For a self-consistent spec this equals gamma + sigma2 because
            signal and noise are uncorrelated.
    """

    sigma2: float
    gamma: float
    y_energy: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0.0):
            raise ValueError(f"sigma2 must be finite and > 0, got {self.sigma2}")
        if not (math.isfinite(self.gamma) and self.gamma > 0.0):
            raise ValueError(f"gamma must be finite and > 0, got {self.gamma}")
        if not (math.isfinite(self.y_energy) and self.y_energy >= 0.0):
            raise ValueError(f"y_energy must be finite and >= 0, got {self.y_energy}")

    @classmethod
    def consistent(cls, sigma2: float, gamma: float) -> "ChannelSpec":
        """Spec with the analytic received energy gamma + sigma2."""
        return cls(sigma2=sigma2, gamma=gamma, y_energy=gamma + sigma2)


@dataclass(frozen=True)
class ReceiverParams:
    """Matched timestep and scaling factor for one channel condition."""

    t_star: float
    alpha: float
    phi: float


def compute_phi(spec: ChannelSpec, clamp_negative: bool = False) -> float:
    """Observed signal-to-noise ratio normalised by the source energy.

    phi = (y_energy - sigma2) / (gamma * sigma2).

    Raises:
        NegativeEnergyError: measured energy below the noise floor, i.e.
            y_energy < sigma2.  Pass ``clamp_negative=True`` to clamp the
            result to 0 instead (zero-signal reading).
    """
    excess = spec.y_energy - spec.sigma2
    if excess < 0.0:
        if clamp_negative:
            return 0.0
        raise NegativeEnergyError(
            f"measured y_energy {spec.y_energy} is below the noise floor "
            f"sigma2 {spec.sigma2}; re-estimate or enable clamping"
        )
    return excess / (spec.gamma * spec.sigma2)


def timestep_for_phi(phi: float) -> float:
    """Unique root in (0, 1] of (1 - t)^2 = phi * t.

    Closed form t = (2 + phi - sqrt(phi^2 + 4 phi)) / 2, evaluated in the
    rationalised form 2 / (2 + phi + sqrt(phi^2 + 4 phi)) which is free of
    cancellation for large phi.
    """
    if not math.isfinite(phi) or phi < 0.0:
        raise ValueError(f"phi must be finite and >= 0, got {phi}")
    return 2.0 / (2.0 + phi + math.sqrt(phi * (phi + 4.0)))


def timestep_simplified(sigma2: float) -> float:
    """Matched timestep under unit source energy (gamma = 1).

    t = (2 sigma^2 + 1 - sqrt(1 + 4 sigma^2)) / (2 sigma^2), again in
    rationalised form so that it agrees with ``timestep_for_phi(1/sigma2)``
    to machine precision across the whole range.
    """
    if not math.isfinite(sigma2) or sigma2 <= 0.0:
        raise ValueError(f"sigma2 must be finite and > 0, got {sigma2}")
    return 2.0 * sigma2 / (2.0 * sigma2 + 1.0 + math.sqrt(1.0 + 4.0 * sigma2))


def scaling_factor(spec: ChannelSpec, t: float) -> float:
    """Positive alpha with alpha^2 * (gamma + sigma2) = (1 - t)^2 gamma + t.

    Scaling the observation by alpha matches its per-dimension second moment
    to that of the diffusion variable at time ``t``.  Valid for any t in
    [0, 1], not only the matched one.
    """
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"t must lie in [0, 1], got {t}")
    target = (1.0 - t) ** 2 * spec.gamma + t
    return math.sqrt(target / (spec.gamma + spec.sigma2))


def receiver_params(spec: ChannelSpec, clamp_negative: bool = False) -> ReceiverParams:
    """Full adaptation: phi -> matched t* -> alpha.

    When the spec is self-consistent (y_energy = gamma + sigma2) the result
    additionally satisfies alpha = 1 - t* and alpha^2 = t*/sigma2.
    """
    phi = compute_phi(spec, clamp_negative=clamp_negative)
    t_star = timestep_for_phi(phi)
    alpha = scaling_factor(spec, t_star)
    if abs(spec.y_energy - (spec.gamma + spec.sigma2)) <= 1e-12 * spec.y_energy:
        assert abs(alpha - (1.0 - t_star)) <= 1e-9
    return ReceiverParams(t_star=t_star, alpha=alpha, phi=phi)
