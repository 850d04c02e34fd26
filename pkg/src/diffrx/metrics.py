"""Distortion metrics: RMSE, PSNR, SSIM, and latent moment diagnostics.

SSIM here is the uniform-window variant: box window (default size 8),
stride 1, scores computed on the valid region only, with population
(biased) window statistics and the usual stabilizers C1 = (0.01 peak)^2
and C2 = (0.03 peak)^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInputError

PSNR_CAP_DB = 100.0


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    """Root mean squared difference over all matching entries."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at ``PSNR_CAP_DB``.

    Identical inputs (zero MSE) return the cap by convention so CSV
    output never holds infinities.
    """
    if peak <= 0.0:
        raise InvalidInputError(f"peak must be > 0, got {peak}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(peak * peak / mse))


def ssim(
    img_a: np.ndarray,
    img_b: np.ndarray,
    window: int = 8,
    peak: float = 1.0,
) -> float | np.ndarray:
    """Structural similarity with a uniform sliding window.

    Args:
        img_a, img_b: matching [H, W] images, or [N, H, W] stacks to
            score a whole batch in one call.
        window: box window side; both image sides must be >= window.
        peak: dynamic range entering the C1/C2 stabilizers.

    Returns:
        The mean SSIM over valid window positions; an [N] vector for
        stacked input.
    """
    if peak <= 0.0:
        raise InvalidInputError(f"peak must be > 0, got {peak}")
    a = np.asarray(img_a, dtype=np.float64)
    b = np.asarray(img_b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim not in (2, 3):
        raise InvalidInputError(f"expected 2-D images or a 3-D stack, got shape {a.shape}")
    if window < 1 or min(a.shape[-2:]) < window:
        raise InvalidInputError(
            f"window {window} does not fit images of shape {a.shape[-2:]}"
        )
    axes = (-2, -1)
    wa = sliding_window_view(a, (window, window), axis=axes)
    wb = sliding_window_view(b, (window, window), axis=axes)
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    var_a = (wa * wa).mean(axis=(-2, -1)) - mu_a * mu_a
    var_b = (wb * wb).mean(axis=(-2, -1)) - mu_b * mu_b
    cov = (wa * wb).mean(axis=(-2, -1)) - mu_a * mu_b
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    score = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    per_image = score.mean(axis=(-2, -1))
    return float(per_image) if a.ndim == 2 else per_image


@dataclass(frozen=True)
class MomentReport:
    """Empirical first and second moments of a latent batch."""

    energy: np.ndarray  # per-dimension mean of squares
    mean: np.ndarray  # per-dimension mean
    pooled_energy: float
    pooled_mean: float


def moment_diagnostics(batch: np.ndarray) -> MomentReport:
    """Per-dimension and pooled moments of a batch of latents.

    A 1-D input is treated as a single sample.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.size == 0:
        raise InvalidInputError("moment diagnostics need a non-empty batch")
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise InvalidInputError(f"expected [N, d] latents, got shape {x.shape}")
    energy = np.mean(x * x, axis=0)
    mean = np.mean(x, axis=0)
    return MomentReport(
        energy=energy,
        mean=mean,
        pooled_energy=float(energy.mean()),
        pooled_mean=float(mean.mean()),
    )


@dataclass(frozen=True)
class MetricsReport:
    """Data-space distortion triple plus the latent-space MSE."""

    rmse: float
    psnr_db: float
    ssim: float
    latent_mse: float

    def __post_init__(self) -> None:
        if self.rmse < 0.0 or self.latent_mse < 0.0:
            raise InvalidInputError("rmse and latent_mse must be non-negative")
        if not -1.0 - 1e-9 <= self.ssim <= 1.0 + 1e-9:
            raise InvalidInputError(f"ssim {self.ssim} outside [-1, 1]")


def report_batch(
    x_true: np.ndarray,
    x_hat: np.ndarray,
    shape: tuple[int, int],
    latent_mse: float,
    window: int = 8,
    peak: float = 1.0,
) -> MetricsReport:
    """Score a batch of flattened images of the given shape.

    RMSE is pooled over the whole batch; PSNR and SSIM are computed per
    image and averaged, the usual reporting convention for sweeps.  The
    window shrinks to the smaller image side when needed.
    """
    xt = np.asarray(x_true, dtype=np.float64)
    xh = np.asarray(x_hat, dtype=np.float64)
    if xt.shape != xh.shape or xt.ndim != 2:
        raise InvalidInputError("x_true and x_hat must be matching [N, n] arrays")
    height, width = int(shape[0]), int(shape[1])
    if height * width != xt.shape[1]:
        raise InvalidInputError(
            f"cannot view {xt.shape[1]}-vectors as {height}x{width} images"
        )
    imgs_t = xt.reshape(-1, height, width)
    imgs_h = xh.reshape(-1, height, width)
    per_mse = np.mean((xt - xh) ** 2, axis=1)
    with np.errstate(divide="ignore"):
        per_psnr = np.minimum(
            PSNR_CAP_DB, 10.0 * np.log10(peak * peak / per_mse)
        )
    win = min(window, height, width)
    scores = ssim(imgs_t, imgs_h, window=win, peak=peak)
    return MetricsReport(
        rmse=float(np.sqrt(per_mse.mean())),
        psnr_db=float(per_psnr.mean()),
        ssim=float(np.mean(scores)),
        latent_mse=float(latent_mse),
    )
