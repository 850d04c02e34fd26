"""Experiment configuration: flat ``key = value`` files, strictly validated.

The format is deliberately primitive so any tool can write it: UTF-8
lines of ``key = value``, ``#`` starting a comment, blank lines ignored.
Every key is typed and listed in ``KEY_CASTERS``; unknown keys,
duplicate keys, and malformed values are all named errors raised before
any computation starts.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from os import PathLike
from pathlib import Path

from .errors import ConfigError, DiffrxError
from .sources import GaussianSource, GmmSource, PgmSource

KINDS = (
    "snr-sweep",
    "sensitivity",
    "ood-sweep",
    "verify-theory",
    "train-codec",
    "train-denoiser",
)

SOURCES = ("gaussian", "gmm", "pgm")
DENOISERS = ("oracle-gaussian", "oracle-gmm", "mlp", "none")

_DEFAULT_GRID = (-10.0, -7.5, -5.0, -2.5, 0.0, 2.5, 5.0, 7.5, 10.0)


def _as_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "false"):
        return low == "true"
    raise ValueError(f"expected true or false, got {raw!r}")


def _as_floats(raw: str) -> tuple[float, ...]:
    return tuple(float(part) for part in raw.split(","))


def _as_ints(raw: str) -> tuple[int, ...]:
    return tuple(int(part) for part in raw.split(","))


@dataclass(frozen=True)
class ExperimentConfig:
    """Typed view of a config file; defaults give a runnable sweep."""

    kind: str | None = None
    source: str = "gaussian"
    d: int = 16
    n: int = 64
    mean: float = 0.0
    var: float = 1.0
    gmm_weights: tuple[float, ...] = (0.5, 0.5)
    gmm_means: tuple[float, ...] = (-0.9, 0.9)
    gmm_vars: tuple[float, ...] = (0.19, 0.19)
    pgm_dir: str | None = None
    snr_db_grid: tuple[float, ...] = _DEFAULT_GRID
    denoiser: str = "oracle-gaussian"
    mlp_checkpoint: str | None = None
    codec_checkpoint: str | None = None
    num_steps: int = 1
    stochastic: bool = False
    trials: int = 10_000
    seed: int = 0
    out: str = "."
    ood_gmm_weights: tuple[float, ...] = (0.5, 0.5)
    ood_gmm_means: tuple[float, ...] = (-4.0, 4.0)
    ood_gmm_vars: tuple[float, ...] = (0.25, 0.25)
    inject_alpha_sign_bug: bool = False
    codec_train_samples: int = 4096
    denoiser_train_samples: int = 8192
    mlp_hidden: tuple[int, ...] = (48, 48)
    mlp_steps: int = 20_000
    mlp_batch: int = 128
    mlp_lr: float = 1e-3
    mlp_t_min: float = 1e-3


KEY_CASTERS = {
    "kind": str,
    "source": str,
    "d": int,
    "n": int,
    "mean": float,
    "var": float,
    "gmm_weights": _as_floats,
    "gmm_means": _as_floats,
    "gmm_vars": _as_floats,
    "pgm_dir": str,
    "snr_db_grid": _as_floats,
    "denoiser": str,
    "mlp_checkpoint": str,
    "codec_checkpoint": str,
    "num_steps": int,
    "stochastic": _as_bool,
    "trials": int,
    "seed": int,
    "out": str,
    "ood_gmm_weights": _as_floats,
    "ood_gmm_means": _as_floats,
    "ood_gmm_vars": _as_floats,
    "inject_alpha_sign_bug": _as_bool,
    "codec_train_samples": int,
    "denoiser_train_samples": int,
    "mlp_hidden": _as_ints,
    "mlp_steps": int,
    "mlp_batch": int,
    "mlp_lr": float,
    "mlp_t_min": float,
}


def parse_config_text(text: str) -> dict[str, str]:
    """Split config text into raw key/value strings.

    Raises:
        ConfigError: on lines without ``=`` or keys appearing twice.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def config_from_mapping(raw: dict[str, str]) -> ExperimentConfig:
    """Type-check raw strings against the documented key list."""
    fields: dict[str, object] = {}
    for key, value in raw.items():
        caster = KEY_CASTERS.get(key)
        if caster is None:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            fields[key] = caster(value)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    return ExperimentConfig(**fields)


def load_config(path: str | PathLike | None) -> ExperimentConfig:
    """Read a config file; a missing path means all defaults."""
    if path is None:
        return ExperimentConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return config_from_mapping(parse_config_text(p.read_text(encoding="utf-8")))


def build_source(config: ExperimentConfig):
    """Construct the configured clean-signal source.

    Source parameter problems (bad weights, missing directory) surface
    as ConfigError so the CLI can report them before any computation.
    """
    try:
        if config.source == "gaussian":
            return GaussianSource(d=config.d, mean=config.mean, var=config.var)
        if config.source == "gmm":
            return GmmSource(
                d=config.d,
                weights=config.gmm_weights,
                means=config.gmm_means,
                vars=config.gmm_vars,
            )
        if config.source == "pgm":
            if config.pgm_dir is None:
                raise ConfigError("source = pgm requires pgm_dir")
            return PgmSource(config.pgm_dir)
    except ConfigError:
        raise
    except DiffrxError as exc:
        raise ConfigError(f"invalid source parameters: {exc}") from exc
    raise ConfigError(f"source must be one of {SOURCES}, got {config.source!r}")


def validate(config: ExperimentConfig, kind: str) -> ExperimentConfig:
    """Check cross-field constraints for the experiment kind.

    Returns the config with ``kind`` filled in.  Everything wrong is
    reported as ConfigError naming the offending key.
    """
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    if config.kind is not None and config.kind != kind:
        raise ConfigError(
            f"config kind {config.kind!r} does not match the requested {kind!r}"
        )
    if config.trials < 1:
        raise ConfigError(f"trials must be >= 1, got {config.trials}")
    if config.num_steps < 1:
        raise ConfigError(f"num_steps must be >= 1, got {config.num_steps}")
    if config.d < 1:
        raise ConfigError(f"d must be >= 1, got {config.d}")
    if not config.snr_db_grid:
        raise ConfigError("snr_db_grid must hold at least one value")
    if any(not _finite(v) for v in config.snr_db_grid):
        raise ConfigError(f"snr_db_grid values must be finite, got {config.snr_db_grid}")
    if config.seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {config.seed}")
    if config.denoiser not in DENOISERS:
        raise ConfigError(f"denoiser must be one of {DENOISERS}, got {config.denoiser!r}")
    if config.source not in SOURCES:
        raise ConfigError(f"source must be one of {SOURCES}, got {config.source!r}")

    if kind in ("snr-sweep", "sensitivity", "ood-sweep"):
        build_source(config)  # surfaces source parameter errors
        if config.source == "pgm" and config.denoiser.startswith("oracle"):
            raise ConfigError("pgm sources have no analytic prior; use denoiser = mlp or none")
        if config.source == "pgm" and config.codec_checkpoint is None:
            raise ConfigError("pgm sweeps need codec_checkpoint (run train-codec first)")
        if config.denoiser == "mlp":
            if config.mlp_checkpoint is None:
                raise ConfigError("denoiser = mlp requires mlp_checkpoint")
            if not Path(config.mlp_checkpoint).is_file():
                raise ConfigError(f"mlp_checkpoint not found: {config.mlp_checkpoint}")
        if config.codec_checkpoint is not None and not Path(config.codec_checkpoint).is_file():
            raise ConfigError(f"codec_checkpoint not found: {config.codec_checkpoint}")
    if kind == "ood-sweep":
        if config.source != "gmm":
            raise ConfigError("ood-sweep compares mixture sources; set source = gmm")
        shifted = dataclasses.replace(
            config,
            gmm_weights=config.ood_gmm_weights,
            gmm_means=config.ood_gmm_means,
            gmm_vars=config.ood_gmm_vars,
        )
        build_source(shifted)
    if kind == "train-codec":
        if config.source == "pgm":
            build_source(config)
        elif not 1 <= config.d < config.n:
            raise ConfigError(f"train-codec needs 1 <= d < n, got d={config.d}, n={config.n}")
        if config.codec_train_samples < 2:
            raise ConfigError("codec_train_samples must be >= 2")
    if kind == "train-denoiser":
        build_source(config)
        if config.denoiser_train_samples < 1:
            raise ConfigError("denoiser_train_samples must be >= 1")
        if config.mlp_steps < 0 or config.mlp_batch < 1:
            raise ConfigError("mlp_steps must be >= 0 and mlp_batch >= 1")
        if not config.mlp_hidden or any(w < 1 for w in config.mlp_hidden):
            raise ConfigError(f"mlp_hidden widths must be >= 1, got {config.mlp_hidden}")
        if not 0.0 < config.mlp_t_min < 1.0:
            raise ConfigError(f"mlp_t_min must lie in (0, 1), got {config.mlp_t_min}")
        if config.mlp_lr <= 0.0:
            raise ConfigError(f"mlp_lr must be > 0, got {config.mlp_lr}")
    return dataclasses.replace(config, kind=kind)


def _finite(v: float) -> bool:
    return v == v and abs(v) != float("inf")
