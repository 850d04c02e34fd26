"""AWGN latent channel: transmission, SNR conversions, energy measurement.

The channel is real-valued: y = z + n with n i.i.d. N(0, sigma2) per
component.  Gaussian draws come from numpy's ``Generator.standard_normal``
(ziggurat algorithm on the PCG64 stream); every operation takes an explicit
seeded generator, there is no ambient randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adapt import ChannelSpec
from .errors import InvalidInputError


@dataclass(frozen=True)
class SnrPoint:
    """One SNR grid point: decibel value and its linear noise variance."""

    snr_db: float
    sigma2: float


@dataclass(frozen=True)
class ChannelObservation:
    """Received vector together with the statistics of its channel.

    ``spec.sigma2`` is the ground-truth noise variance used by the
    simulation; ``spec.y_energy`` records the measured per-dimension energy
    of this observation.
    """

    y: np.ndarray
    spec: ChannelSpec


def snr_db_to_sigma2(snr_db: float, gamma: float = 1.0) -> float:
    """Noise variance yielding the given SNR for source energy gamma."""
    if not (math.isfinite(gamma) and gamma > 0.0):
        raise ValueError(f"gamma must be finite and > 0, got {gamma}")
    return gamma / 10.0 ** (snr_db / 10.0)


def sigma2_to_snr_db(sigma2: float, gamma: float = 1.0) -> float:
    """Inverse of :func:`snr_db_to_sigma2`; round trip is exact to 1e-12."""
    if not (math.isfinite(gamma) and gamma > 0.0):
        raise ValueError(f"gamma must be finite and > 0, got {gamma}")
    if not (math.isfinite(sigma2) and sigma2 > 0.0):
        raise ValueError(f"sigma2 must be finite and > 0, got {sigma2}")
    return 10.0 * math.log10(gamma / sigma2)


def transmit(
    z: np.ndarray,
    sigma2: float,
    rng: np.random.Generator,
    gamma: float = 1.0,
) -> ChannelObservation:
    """Send z through the AWGN channel.

    Returns the noisy observation with a ChannelSpec carrying the true
    sigma2, the caller-supplied gamma, and the measured per-dimension energy
    of y.  ``z`` may be a single vector or a batch with the last axis as the
    latent dimension; the measured energy then pools over the whole batch.
    """
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("transmit: z contains non-finite components")
    if not (math.isfinite(sigma2) and sigma2 > 0.0):
        raise ValueError(f"sigma2 must be finite and > 0, got {sigma2}")
    n = math.sqrt(sigma2) * rng.standard_normal(z.shape)
    y = z + n
    spec = ChannelSpec(sigma2=sigma2, gamma=gamma, y_energy=float(np.mean(y * y)))
    return ChannelObservation(y=y, spec=spec)


def measure_energy(batch: np.ndarray) -> float:
    """Empirical per-dimension mean energy sum ||y||^2 / (N * d).

    Accepts a single vector, a [N, d] batch, or any array whose elements are
    vector components; the mean pools over everything.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.size == 0:
        raise ValueError("measure_energy: empty batch")
    return float(np.mean(batch * batch))
