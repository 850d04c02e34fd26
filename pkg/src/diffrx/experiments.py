"""Experiment runners behind the CLI: sweeps, sensitivity, OOD, audits.

Every runner is deterministic for a fixed master seed.  The splitting
rule: the trial batch (clean latents plus channel noise) at grid point
``i`` comes from ``SeedSequence([seed, i])``, and the receiver's own
stochastic reverse-step noise from ``SeedSequence([seed, i, 7])``.
Sensitivity and OOD rows reuse the point batch and receiver stream for
every row variant at that point, so the unperturbed row reproduces the
plain sweep byte for byte and perturbed rows are paired comparisons on
identical draws.

Synthetic sources are latent-space sources (the codec is the identity);
PGM sources run through a fitted linear codec checkpoint.  For image
metrics a d-dimensional latent is viewed as a sqrt(d) square image when
d is a perfect square and as a single row otherwise.
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .adapt import (
    ChannelSpec,
    ReceiverParams,
    receiver_params,
    scaling_factor,
    timestep_for_phi,
    timestep_simplified,
)
from .channel import snr_db_to_sigma2, transmit
from .codec import LinearCodec, load_codec, save_codec
from .config import ExperimentConfig, build_source, validate
from .denoise import GaussianPrior, GmmPrior, denoise_with_params
from .errors import ConfigError
from .metrics import report_batch
from .mlp import (
    MlpPredictor,
    TrainConfig,
    draw_batch,
    gradient_check,
    load_checkpoint,
    mlp_train,
    save_checkpoint,
)
from .schedule import T_MAX, ReverseStepPlan, forward_corrupt, reverse_step

RECEIVER_STREAM = 7
"""Third seed word reserved for the receiver's stochastic reverse noise."""

PERTURBATIONS_PERCENT = (-50, -20, -10, -5, 0, 5, 10, 20, 50)

SWEEP_COLUMNS = (
    "snr_db", "sigma2", "t_star", "alpha", "latent_mse", "latent_mse_baseline",
    "rmse", "psnr_db", "ssim", "trials", "seed",
)
SENSITIVITY_COLUMNS = (
    "snr_db", "sigma2", "perturbed_param", "p_percent", "t_used", "alpha_used",
    "latent_mse", "latent_mse_baseline", "rmse", "psnr_db", "ssim", "trials",
    "seed", "status",
)
OOD_COLUMNS = (
    "snr_db", "sigma2", "split", "adapt", "gamma_used", "y_energy_used",
    "t_star", "alpha", "latent_mse", "latent_mse_baseline", "rmse", "psnr_db",
    "ssim", "trials", "seed",
)
VERIFY_COLUMNS = ("check", "tolerance", "value", "verdict")

OUTPUT_FILES = {
    "snr-sweep": "snr_sweep.csv",
    "sensitivity": "sensitivity.csv",
    "ood-sweep": "ood_sweep.csv",
    "verify-theory": "verify_theory.csv",
}


def stream(*words: int) -> np.random.Generator:
    """The documented seed-splitting rule: one PCG64 stream per word list."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(words))))


def format_cell(value: object) -> str:
    """CSV cell formatting: %.12g floats, plain integers, raw strings."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12g}"


def rows_to_csv(columns: Sequence[str], rows: Sequence[dict]) -> str:
    """Render rows as CSV text with LF endings and a trailing newline."""
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format_cell(row.get(col)) for col in columns))
    return "\n".join(lines) + "\n"


def write_csv(path: str | Path, columns: Sequence[str], rows: Sequence[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rows_to_csv(columns, rows), encoding="utf-8", newline="")
    return path


def _latent_image_shape(d: int) -> tuple[int, int]:
    side = math.isqrt(d)
    return (side, side) if side * side == d else (1, d)


def _build_predictor(config: ExperimentConfig, latent_dim: int):
    if config.denoiser == "none":
        return None
    if config.denoiser == "oracle-gaussian":
        return GaussianPrior(mean=config.mean, var=config.var)
    if config.denoiser == "oracle-gmm":
        return GmmPrior(
            weights=np.asarray(config.gmm_weights),
            means=np.asarray(config.gmm_means),
            vars=np.asarray(config.gmm_vars),
        )
    model, _ = load_checkpoint(config.mlp_checkpoint)
    if model.input_dim != latent_dim:
        raise ConfigError(
            f"mlp_checkpoint expects latents of dimension {model.input_dim}, "
            f"the experiment produces {latent_dim}"
        )
    return model


def _denoise_batch(
    y: np.ndarray,
    params: ReceiverParams,
    predictor,
    config: ExperimentConfig,
    recv_rng: np.random.Generator,
) -> np.ndarray:
    if predictor is None:
        return y.copy()
    return denoise_with_params(
        y, params, predictor, config.num_steps, config.stochastic, recv_rng
    )


def _score(
    z: np.ndarray,
    y: np.ndarray,
    z_hat: np.ndarray,
    data_true: np.ndarray,
    data_hat: np.ndarray,
    shape: tuple[int, int],
) -> dict:
    per_trial_mse = np.mean((z_hat - z) ** 2, axis=1)
    n = per_trial_mse.size
    report = report_batch(
        data_true.reshape(n, -1),
        data_hat.reshape(n, -1),
        shape=shape,
        latent_mse=float(per_trial_mse.mean()),
    )
    peak2 = 1.0
    per_psnr = np.minimum(
        100.0,
        10.0 * np.log10(peak2 / np.maximum(np.mean((data_true.reshape(n, -1) - data_hat.reshape(n, -1)) ** 2, axis=1), 1e-300)),
    )
    return {
        "latent_mse": report.latent_mse,
        "latent_mse_baseline": float(np.mean((y - z) ** 2)),
        "rmse": report.rmse,
        "psnr_db": report.psnr_db,
        "ssim": report.ssim,
        "_latent_mse_se": float(per_trial_mse.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        "_psnr_se": float(per_psnr.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
    }


def _matched_params(sigma2: float, gamma: float) -> ReceiverParams:
    spec = ChannelSpec(sigma2=sigma2, gamma=gamma, y_energy=gamma + sigma2)
    return receiver_params(spec)


def run_snr_sweep(config: ExperimentConfig) -> list[dict]:
    """One CSV row per SNR point: adapt, denoise, score, plus a baseline.

    The receiver runs the matched analytic path: t* from the timestep
    rule at the source's known energy and alpha from the scaling rule,
    with the self-consistent received energy gamma + sigma2.
    """
    config = validate(config, "snr-sweep")
    if config.source == "pgm":
        return _run_codec_sweep(config)
    source = build_source(config)
    predictor = _build_predictor(config, source.d)
    gamma = source.gamma
    shape = _latent_image_shape(source.d)
    rows = []
    for idx, snr_db in enumerate(config.snr_db_grid):
        sigma2 = snr_db_to_sigma2(snr_db, gamma=gamma)
        rng = stream(config.seed, idx)
        z = source.sample(config.trials, rng)
        obs = transmit(z, sigma2, rng, gamma=gamma)
        params = _matched_params(sigma2, gamma)
        z_hat = _denoise_batch(
            obs.y, params, predictor, config, stream(config.seed, idx, RECEIVER_STREAM)
        )
        row = {
            "snr_db": snr_db,
            "sigma2": sigma2,
            "t_star": params.t_star,
            "alpha": params.alpha,
            "trials": config.trials,
            "seed": config.seed,
        }
        row.update(_score(z, obs.y, z_hat, z, z_hat, shape))
        rows.append(row)
    return rows


def _run_codec_sweep(config: ExperimentConfig) -> list[dict]:
    source = build_source(config)
    codec = load_codec(config.codec_checkpoint)
    predictor = _build_predictor(config, codec.latent_dim)
    gamma = codec.gamma_bar
    shape = source.image_shape
    rows = []
    for idx, snr_db in enumerate(config.snr_db_grid):
        sigma2 = snr_db_to_sigma2(snr_db, gamma=gamma)
        rng = stream(config.seed, idx)
        x = source.sample(config.trials, rng)
        z = codec.encode(x)
        obs = transmit(z, sigma2, rng, gamma=gamma)
        params = _matched_params(sigma2, gamma)
        z_hat = _denoise_batch(
            obs.y, params, predictor, config, stream(config.seed, idx, RECEIVER_STREAM)
        )
        x_hat = np.clip(codec.decode(z_hat), 0.0, 1.0)
        row = {
            "snr_db": snr_db,
            "sigma2": sigma2,
            "t_star": params.t_star,
            "alpha": params.alpha,
            "trials": config.trials,
            "seed": config.seed,
        }
        row.update(_score(z, obs.y, z_hat, x, x_hat, shape))
        rows.append(row)
    return rows


def run_sensitivity(config: ExperimentConfig) -> list[dict]:
    """Perturb t* (alpha re-derived) and then alpha (t* analytic).

    Rows are keyed by (snr_db, perturbed_param, p_percent).  A perturbed
    timestep landing outside (0, 1) yields a skipped row carrying the
    reason instead of metrics.
    """
    config = validate(config, "sensitivity")
    source = build_source(config)
    predictor = _build_predictor(config, source.d)
    gamma = source.gamma
    shape = _latent_image_shape(source.d)
    rows = []
    for idx, snr_db in enumerate(config.snr_db_grid):
        sigma2 = snr_db_to_sigma2(snr_db, gamma=gamma)
        rng = stream(config.seed, idx)
        z = source.sample(config.trials, rng)
        obs = transmit(z, sigma2, rng, gamma=gamma)
        nominal = _matched_params(sigma2, gamma)
        spec = ChannelSpec(sigma2=sigma2, gamma=gamma, y_energy=gamma + sigma2)
        for param in ("t", "alpha"):
            for p in PERTURBATIONS_PERCENT:
                factor = 1.0 + p / 100.0
                row = {
                    "snr_db": snr_db,
                    "sigma2": sigma2,
                    "perturbed_param": param,
                    "p_percent": p,
                    "trials": config.trials,
                    "seed": config.seed,
                    "status": "ok",
                }
                if param == "t":
                    t_used = nominal.t_star * factor
                    if not 0.0 < t_used <= T_MAX:
                        row.update(
                            t_used=t_used,
                            alpha_used=None,
                            status=f"skipped: perturbed t {t_used:.6g} outside (0, 1)",
                        )
                        rows.append(row)
                        continue
                    alpha_used = scaling_factor(spec, t_used)
                else:
                    t_used = nominal.t_star
                    alpha_used = nominal.alpha * factor
                params = ReceiverParams(t_star=t_used, alpha=alpha_used, phi=nominal.phi)
                z_hat = _denoise_batch(
                    obs.y, params, predictor, config,
                    stream(config.seed, idx, RECEIVER_STREAM),
                )
                row.update(t_used=t_used, alpha_used=alpha_used)
                row.update(_score(z, obs.y, z_hat, z, z_hat, shape))
                rows.append(row)
    return rows


def run_ood_sweep(config: ExperimentConfig) -> list[dict]:
    """Train-on-A, test-on-B contrast for mismatched source energy.

    Both sources are normalized by A's analytic energy, mirroring the
    training-corpus normalization, so A plays the unit-energy training
    distribution and B arrives with mismatched energy gamma_B.  Each
    grid point is evaluated twice per split.  The general path measures
    the received energy, feeds it through the timestep rule with the
    training-corpus gamma, and scales so the second moment matches the
    measured signal energy at that timestep.  The simplified path is the
    unit-energy shortcut: no measurement, gamma assumed 1.
    """
    config = validate(config, "ood-sweep")
    source_a = build_source(config)
    source_b = build_source(
        dataclasses.replace(
            config,
            gmm_weights=config.ood_gmm_weights,
            gmm_means=config.ood_gmm_means,
            gmm_vars=config.ood_gmm_vars,
        )
    )
    norm = 1.0 / math.sqrt(source_a.gamma)
    train_source = source_a.scaled(norm)
    gamma_train = train_source.gamma  # 1 up to rounding, by construction
    test_sources = {"in-dist": train_source, "ood": source_b.scaled(norm)}
    predictor = None if config.denoiser == "none" else train_source.prior()
    shape = _latent_image_shape(config.d)
    rows = []
    for split, test_source in test_sources.items():
        gamma_split = test_source.gamma
        for idx, snr_db in enumerate(config.snr_db_grid):
            sigma2 = snr_db_to_sigma2(snr_db, gamma=gamma_split)
            rng = stream(config.seed, idx)
            z = test_source.sample(config.trials, rng)
            obs = transmit(z, sigma2, rng, gamma=gamma_split)
            y_energy_hat = obs.spec.y_energy
            gamma_hat = y_energy_hat - sigma2
            phi = (y_energy_hat - sigma2) / (gamma_train * sigma2)
            t_general = timestep_for_phi(phi)
            alpha_general = scaling_factor(
                ChannelSpec(sigma2=sigma2, gamma=gamma_hat, y_energy=y_energy_hat),
                t_general,
            )
            paths = {
                "general": (
                    ReceiverParams(t_star=t_general, alpha=alpha_general, phi=phi),
                    gamma_hat,
                    y_energy_hat,
                ),
                "simplified": (
                    receiver_params(ChannelSpec(sigma2=sigma2, gamma=1.0, y_energy=1.0 + sigma2)),
                    1.0,
                    1.0 + sigma2,
                ),
            }
            for adapt_name, (params, gamma_used, y_energy_used) in paths.items():
                z_hat = _denoise_batch(
                    obs.y, params, predictor, config,
                    stream(config.seed, idx, RECEIVER_STREAM),
                )
                row = {
                    "snr_db": snr_db,
                    "sigma2": sigma2,
                    "split": split,
                    "adapt": adapt_name,
                    "gamma_used": gamma_used,
                    "y_energy_used": y_energy_used,
                    "t_star": params.t_star,
                    "alpha": params.alpha,
                    "trials": config.trials,
                    "seed": config.seed,
                }
                row.update(_score(z, obs.y, z_hat, z, z_hat, shape))
                rows.append(row)
    return rows


def run_train_codec(config: ExperimentConfig) -> dict:
    """Fit the linear codec and write its checkpoint to the out directory."""
    config = validate(config, "train-codec")
    rng = stream(config.seed, 0)
    if config.source == "pgm":
        data = build_source(config).data
        if not 1 <= config.d < data.shape[1]:
            raise ConfigError(
                f"train-codec needs 1 <= d < n, got d={config.d} for "
                f"{data.shape[1]}-pixel images"
            )
    else:
        data = rng.standard_normal((config.codec_train_samples, config.n))
    codec = LinearCodec.fit(data, config.d)
    recon = codec.decode(codec.encode(data))
    residual = float(np.mean((data - recon) ** 2))
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "codec.ltns"
    save_codec(path, codec)
    return {
        "path": str(path),
        "gamma_bar": codec.gamma_bar,
        "train_residual": residual,
        "latent_dim": codec.latent_dim,
        "data_dim": codec.data_dim,
    }


def run_train_denoiser(config: ExperimentConfig) -> dict:
    """Train the MLP noise predictor and write its checkpoint."""
    config = validate(config, "train-denoiser")
    rng = stream(config.seed, 0)
    if config.source == "pgm":
        if config.codec_checkpoint is None:
            raise ConfigError("train-denoiser with a pgm source needs codec_checkpoint")
        source = build_source(config)
        codec = load_codec(config.codec_checkpoint)
        x0 = codec.encode(source.sample(config.denoiser_train_samples, rng))
    else:
        source = build_source(config)
        x0 = source.sample(config.denoiser_train_samples, rng)
    train_config = TrainConfig(
        hidden=config.mlp_hidden,
        steps=config.mlp_steps,
        batch_size=config.mlp_batch,
        learning_rate=config.mlp_lr,
        t_min=config.mlp_t_min,
    )
    model, trace = mlp_train(x0, train_config, stream(config.seed, 1))
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "mlp.ltns"
    save_checkpoint(path, model, train_config)
    trace_rows = [{"step": i, "loss": float(v)} for i, v in enumerate(trace)]
    write_csv(out / "train_loss.csv", ("step", "loss"), trace_rows)
    tail = float(np.mean(trace[-100:])) if trace.size else float("nan")
    return {
        "path": str(path),
        "steps": config.mlp_steps,
        "final_loss": tail,
        "latent_dim": model.input_dim,
    }


# ---------------------------------------------------------------------------
# Theory audit


def _check(name: str, tolerance: float, value: float) -> dict:
    return {
        "check": name,
        "tolerance": tolerance,
        "value": value,
        "verdict": "pass" if value <= tolerance else "fail",
    }


def _bisect_timestep(phi: float) -> float:
    """Independent root of (1 - t)^2 = phi t by plain interval halving."""
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if (1.0 - mid) ** 2 - phi * mid > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def run_verify_theory(config: ExperimentConfig) -> tuple[list[dict], bool]:
    """Audit the closed-form layer and the receiver's statistical claims.

    Returns report rows (check, tolerance, value, verdict) and whether
    every check passed.  A check passes when its measured value does not
    exceed its tolerance.  The ``inject_alpha_sign_bug`` flag flips the
    sign of the alpha used by the alignment checks, a self-test that the
    decomposition check actually detects a broken receiver.
    """
    config = validate(config, "verify-theory")
    seed = config.seed
    rows: list[dict] = []

    phis = np.logspace(-6.0, 6.0, 1000)
    t_vals = np.array([timestep_for_phi(p) for p in phis])
    rows.append(_check(
        "timestep-root-residual", 1e-12,
        float(np.max(np.abs((1.0 - t_vals) ** 2 - phis * t_vals))),
    ))
    rows.append(_check(
        "timestep-bisection-agreement", 1e-12,
        float(np.max(np.abs(t_vals - np.array([_bisect_timestep(p) for p in phis])))),
    ))
    sig2_grid = np.logspace(-6.0, 6.0, 1000)
    rows.append(_check(
        "timestep-simplified-equivalence", 1e-12,
        float(np.max(np.abs(
            np.array([timestep_simplified(s) for s in sig2_grid])
            - np.array([timestep_for_phi(1.0 / s) for s in sig2_grid])
        ))),
    ))
    rows.append(_check(
        "timestep-strictly-decreasing", 0.0, float(np.max(np.diff(t_vals)))
    ))
    rows.append(_check("timestep-limit-low-snr", 1e-4, 1.0 - timestep_for_phi(1e-9)))
    rows.append(_check("timestep-limit-high-snr", 1e-6, timestep_for_phi(1e12)))

    rng = stream(seed, 9001)
    worst = 0.0
    for _ in range(1000):
        t = rng.uniform(1e-6, 1.0 - 1e-6)
        gamma = float(np.exp(rng.uniform(-3.0, 3.0)))
        sigma2 = float(np.exp(rng.uniform(-3.0, 3.0)))
        spec = ChannelSpec(sigma2=sigma2, gamma=gamma, y_energy=gamma + sigma2)
        alpha = scaling_factor(spec, t)
        worst = max(worst, abs(alpha * alpha * (gamma + sigma2) - ((1.0 - t) ** 2 * gamma + t)))
    rows.append(_check("scaling-identity", 1e-12, worst))

    rng = stream(seed, 9002)
    worst_a, worst_a2 = 0.0, 0.0
    for _ in range(1000):
        gamma = float(np.exp(rng.uniform(-1.0, 1.5)))
        sigma2 = float(np.exp(rng.uniform(-3.0, 3.0)))
        params = _matched_params(sigma2, gamma)
        worst_a = max(worst_a, abs(params.alpha - (1.0 - params.t_star)))
        worst_a2 = max(worst_a2, abs(params.alpha**2 - params.t_star / sigma2))
    rows.append(_check("matched-alpha-equals-1-minus-t", 1e-9, worst_a))
    rows.append(_check("matched-alpha-squared-t-over-sigma2", 1e-9, worst_a2))

    # Alignment checks simulate the receiver, so the injected-bug flag
    # applies here and only here.
    flip = -1.0 if config.inject_alpha_sign_bug else 1.0
    worst_m2, worst_sig, worst_cross = 0.0, 0.0, 0.0
    for k, sigma2 in enumerate((0.1, 1.0, 10.0)):
        params = _matched_params(sigma2, 1.0)
        alpha_used = flip * params.alpha
        rng = stream(seed, 9003 + k)
        z = rng.standard_normal((200_000, 16))
        y = z + math.sqrt(sigma2) * rng.standard_normal(z.shape)
        target = (1.0 - params.t_star) ** 2 + params.t_star
        m2 = float(np.mean((alpha_used * y) ** 2))
        worst_m2 = max(worst_m2, abs(m2 - target) / target)
        worst_sig = max(worst_sig, abs(alpha_used - (1.0 - params.t_star)))
        cross = float(np.mean(alpha_used * y * z))  # signal coefficient, gamma = 1
        worst_cross = max(worst_cross, abs(cross - (1.0 - params.t_star)))
    rows.append(_check("alignment-second-moment", 0.01, worst_m2))
    rows.append(_check("alignment-signal-coefficient", 1e-9, worst_sig))
    rows.append(_check("alignment-cross-moment", 0.01, worst_cross))

    rng = stream(seed, 9006)
    worst = 0.0
    for _ in range(1000):
        t = rng.uniform(1e-3, 1.0 - 1e-6)
        x0 = rng.standard_normal(4)
        sample = forward_corrupt(x0, t, rng)
        back = reverse_step(sample.x_t, ReverseStepPlan(t_from=t, dt=t, stochastic=False), sample.eps)
        worst = max(worst, float(np.max(np.abs(back - x0))))
    rows.append(_check("single-step-telescoping", 1e-9, worst))

    rng = stream(seed, 9007)
    worst = 0.0
    for _ in range(1000):
        t = rng.uniform(1e-6, 1.0)
        dt = rng.uniform(0.0, t)
        resid = (t - dt) ** 2 / t + dt * (t - dt) / t - (t - dt)
        worst = max(worst, abs(resid))
    rows.append(_check("reverse-variance-bookkeeping", 1e-12, worst))

    rng = stream(seed, 9008)
    gauss = GaussianPrior(mean=0.3, var=0.7)
    gmm = GmmPrior(weights=np.array([1.0]), means=np.array([0.3]), vars=np.array([0.7]))
    x = rng.standard_normal((64, 5))
    worst = 0.0
    for t in (0.1, 0.5, 0.9):
        worst = max(worst, float(np.max(np.abs(gmm.predict(x, t) - gauss.predict(x, t)))))
    rows.append(_check("gmm-single-component-reduction", 1e-12, worst))

    worst = 0.0
    for s in range(5):
        rng = stream(seed, 9100 + s)
        model = MlpPredictor.init(2, (4,), rng, zero_output=False)
        batch = draw_batch(
            rng.standard_normal((32, 2)),
            TrainConfig(hidden=(4,), steps=0, batch_size=8),
            rng,
        )
        worst = max(worst, gradient_check(model, batch))
    rows.append(_check("mlp-gradient-finite-difference", 1e-4, worst))

    rng = stream(seed, 9200)
    params = _matched_params(1.0, 1.0)
    z = rng.standard_normal((100_000, 16))
    y = z + rng.standard_normal(z.shape)
    z_hat = denoise_with_params(y, params, GaussianPrior())
    mse = float(np.mean((z_hat - z) ** 2))
    rows.append(_check("mmse-single-step-monte-carlo", 0.02, abs(mse / 0.5 - 1.0)))

    rng = stream(seed, 9201)
    z = rng.standard_normal((200_000, 16))
    obs = transmit(z, 2.0, rng, gamma=1.0)
    rows.append(_check(
        "channel-energy-consistency", 0.01, abs(obs.spec.y_energy / 3.0 - 1.0)
    ))

    ok = all(row["verdict"] == "pass" for row in rows)
    return rows, ok
