"""Linear semantic codec: principal-subspace projection with unit-energy latents.

The encoder centers the data, projects onto the top-d principal
directions, and standardizes each latent dimension so the training
corpus has per-dimension energy 1.  That normalization is what makes
the simplified (unit energy) timestep rule applicable downstream.  The
decoder is the exact adjoint, so round-trip error equals the energy
outside the fitted subspace.
"""

from __future__ import annotations

from dataclasses import dataclass
from os import PathLike

import numpy as np

from .errors import FitError, InvalidInputError
from .fileio import load_tensor, save_tensor

_GAMMA_BAND = (0.99, 1.01)


@dataclass(frozen=True)
class LinearCodec:
    """Immutable encoder/decoder pair produced by :meth:`fit`.

    Attributes:
        basis: [d, n] matrix with orthonormal rows spanning the latent space.
        data_mean: [n] training-corpus mean, removed before projection.
        latent_scale: [d] per-dimension standardization factors.
        gamma_bar: recorded per-dimension energy of the scaled training
            latents, which the fit drives to 1.
    """

    basis: np.ndarray
    data_mean: np.ndarray
    latent_scale: np.ndarray
    gamma_bar: float

    def __post_init__(self) -> None:
        basis = np.asarray(self.basis, dtype=np.float64)
        mean = np.asarray(self.data_mean, dtype=np.float64)
        scale = np.asarray(self.latent_scale, dtype=np.float64)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "data_mean", mean)
        object.__setattr__(self, "latent_scale", scale)
        d, n = basis.shape if basis.ndim == 2 else (0, 0)
        if basis.ndim != 2 or not 1 <= d < n:
            raise InvalidInputError(f"basis must be [d, n] with d < n, got {basis.shape}")
        if mean.shape != (n,) or scale.shape != (d,):
            raise InvalidInputError("data_mean/latent_scale shapes do not match the basis")
        if not (np.all(np.isfinite(basis)) and np.all(np.isfinite(mean))):
            raise InvalidInputError("codec parameters must be finite")
        if np.any(~np.isfinite(scale)) or np.any(scale <= 0.0):
            raise InvalidInputError("latent_scale entries must be finite and > 0")
        gram = basis @ basis.T
        # Loose bound: float32 checkpoints perturb a fresh fit's 1e-15 level.
        if np.max(np.abs(gram - np.eye(d))) > 1e-4:
            raise InvalidInputError("basis rows are not orthonormal")
        if not _GAMMA_BAND[0] <= self.gamma_bar <= _GAMMA_BAND[1]:
            raise InvalidInputError(
                f"gamma_bar {self.gamma_bar} outside the unit-energy band {_GAMMA_BAND}"
            )

    @property
    def latent_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def data_dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def fit(cls, samples: np.ndarray, d: int) -> "LinearCodec":
        """Fit the top-d principal subspace of a training corpus.

        Args:
            samples: [N, n] data matrix with at least d linearly
                independent rows after centering.
            d: latent dimension, 1 <= d < n.

        Raises:
            FitError: if d >= n or the centered data has rank below d.
        """
        x = np.asarray(samples, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] == 0:
            raise InvalidInputError("samples must be a non-empty [N, n] array")
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("samples hold non-finite values")
        n = x.shape[1]
        if not 1 <= int(d) < n:
            raise FitError(f"latent dimension must satisfy 1 <= d < n, got d={d}, n={n}")
        d = int(d)
        mean = x.mean(axis=0)
        centered = x - mean
        _, sing, vt = np.linalg.svd(centered, full_matrices=False)
        if len(sing) < d or sing[0] == 0.0 or sing[d - 1] <= max(x.shape) * np.finfo(np.float64).eps * sing[0]:
            raise FitError(
                f"centered data has rank below {d}; need at least {d} linearly "
                "independent samples"
            )
        basis = vt[:d].copy()
        for row in basis:
            lead = row[np.abs(row) > 1e-9]
            if lead.size and lead[0] < 0.0:
                row *= -1.0
        proj = centered @ basis.T
        energy = np.mean(proj * proj, axis=0)
        scale = 1.0 / np.sqrt(energy)
        gamma_bar = float(np.mean((proj * scale) ** 2))
        return cls(basis=basis, data_mean=mean, latent_scale=scale, gamma_bar=gamma_bar)

    def encode(self, x: np.ndarray) -> np.ndarray:
        """Project data to scaled latents; accepts one vector or a batch."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1:] != (self.data_dim,):
            raise InvalidInputError(
                f"expected data of dimension {self.data_dim}, got shape {x.shape}"
            )
        return ((x - self.data_mean) @ self.basis.T) * self.latent_scale

    def decode(self, z: np.ndarray) -> np.ndarray:
        """Map latents back to data space (adjoint of :meth:`encode`)."""
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1:] != (self.latent_dim,):
            raise InvalidInputError(
                f"expected latents of dimension {self.latent_dim}, got shape {z.shape}"
            )
        return (z / self.latent_scale) @ self.basis + self.data_mean


def save_codec(path: str | PathLike, codec: LinearCodec) -> None:
    """Write the codec to a tensor container (float32, see fileio)."""
    save_tensor(
        path,
        {
            "basis": codec.basis,
            "data_mean": codec.data_mean,
            "latent_scale": codec.latent_scale,
            "gamma_bar": np.array([codec.gamma_bar]),
        },
    )


def load_codec(path: str | PathLike) -> LinearCodec:
    sections = load_tensor(path)
    try:
        return LinearCodec(
            basis=sections["basis"],
            data_mean=sections["data_mean"],
            latent_scale=sections["latent_scale"],
            gamma_bar=float(sections["gamma_bar"][0]),
        )
    except KeyError as exc:
        raise InvalidInputError(f"codec checkpoint is missing section {exc.args[0]!r}") from exc
