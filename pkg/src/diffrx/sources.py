"""Clean-signal sources for sweeps and training.

Synthetic sources draw latents with a known analytic per-dimension
energy and expose the matching exact prior, so the oracle denoisers are
probing exactly the distribution the samples came from.  The PGM source
reads a directory of equally sized images as flattened data vectors for
codec experiments; it has no analytic prior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .denoise import GaussianPrior, GmmPrior
from .errors import InvalidInputError
from .fileio import load_pgm


@dataclass(frozen=True)
class GaussianSource:
    """I.i.d. Gaussian latents, N(mean, var) in every dimension."""

    d: int
    mean: float = 0.0
    var: float = 1.0

    def __post_init__(self) -> None:
        if self.d < 1:
            raise InvalidInputError(f"dimension must be >= 1, got {self.d}")
        if self.var <= 0.0:
            raise InvalidInputError(f"variance must be > 0, got {self.var}")

    @property
    def gamma(self) -> float:
        """Analytic per-dimension energy E[z^2]."""
        return self.var + self.mean * self.mean

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return self.mean + math.sqrt(self.var) * rng.standard_normal((count, self.d))

    def prior(self) -> GaussianPrior:
        return GaussianPrior(mean=self.mean, var=self.var)

    def scaled(self, factor: float) -> "GaussianSource":
        """The source of factor * z for z from this source."""
        return GaussianSource(d=self.d, mean=self.mean * factor, var=self.var * factor**2)


@dataclass(frozen=True)
class GmmSource:
    """Mixture latents: draw a component, then an isotropic Gaussian.

    Component means are scalars applied to every dimension, so one draw
    shifts the whole vector and the matching joint prior is exactly the
    pooled-responsibility mixture implemented by :class:`GmmPrior`.
    """

    d: int
    weights: tuple[float, ...]
    means: tuple[float, ...]
    vars: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.d < 1:
            raise InvalidInputError(f"dimension must be >= 1, got {self.d}")
        k = len(self.weights)
        if k == 0 or len(self.means) != k or len(self.vars) != k:
            raise InvalidInputError("weights, means, and vars must have equal length >= 1")
        if any(w < 0.0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
            raise InvalidInputError("weights must be non-negative and sum to 1")
        if any(v <= 0.0 for v in self.vars):
            raise InvalidInputError("component variances must be > 0")

    @property
    def gamma(self) -> float:
        return float(
            sum(w * (m * m + v) for w, m, v in zip(self.weights, self.means, self.vars))
        )

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(len(self.weights), size=count, p=np.asarray(self.weights))
        mu = np.asarray(self.means)[comp][:, None]
        sd = np.sqrt(np.asarray(self.vars))[comp][:, None]
        return mu + sd * rng.standard_normal((count, self.d))

    def prior(self) -> GmmPrior:
        return GmmPrior(
            weights=np.asarray(self.weights),
            means=np.asarray(self.means),
            vars=np.asarray(self.vars),
        )

    def scaled(self, factor: float) -> "GmmSource":
        return GmmSource(
            d=self.d,
            weights=self.weights,
            means=tuple(m * factor for m in self.means),
            vars=tuple(v * factor**2 for v in self.vars),
        )


class PgmSource:
    """Data-space source backed by a directory of same-sized PGM images.

    Images are loaded eagerly, flattened row-major, and sampled with
    replacement.  ``gamma`` is the empirical per-dimension energy of the
    corpus.
    """

    def __init__(self, directory: str | Path) -> None:
        directory = Path(directory)
        paths = sorted(directory.glob("*.pgm"))
        if not paths:
            raise InvalidInputError(f"no .pgm files found under {directory}")
        images = [load_pgm(p) for p in paths]
        shape = images[0].shape
        for p, img in zip(paths, images):
            if img.shape != shape:
                raise InvalidInputError(
                    f"image {p.name} has shape {img.shape}, expected {shape}"
                )
        self.image_shape = shape
        self.data = np.stack([img.reshape(-1) for img in images])
        self.paths = paths

    @property
    def d(self) -> int:
        return self.data.shape[1]

    @property
    def gamma(self) -> float:
        return float(np.mean(self.data * self.data))

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, self.data.shape[0], size=count)
        return self.data[idx]

    def prior(self) -> None:
        """PGM corpora have no analytic prior; train a predictor instead."""
        return None
