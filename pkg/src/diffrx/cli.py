"""Command line entry points for the experiment harness.

Every subcommand takes the same four flags.  Exit codes: 0 on success,
1 on a configuration problem, 2 when verify-theory finds a failing
check.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import experiments
from .config import ExperimentConfig, load_config
from .errors import ConfigError, DiffrxError


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="PATH", help="key = value config file")
    sub.add_argument("--seed", type=int, metavar="U64", help="override the master seed")
    sub.add_argument("--out", metavar="DIR", help="override the output directory")
    sub.add_argument("--quiet", action="store_true", help="suppress progress output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffrx",
        description="SNR-adaptive diffusion denoising receiver experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("train-codec", "fit the linear latent codec and write codec.ltns"),
        ("train-denoiser", "train the MLP noise predictor and write mlp.ltns"),
        ("snr-sweep", "run the SNR grid and write snr_sweep.csv"),
        ("sensitivity", "perturb t* and alpha and write sensitivity.csv"),
        ("ood-sweep", "train-on-A test-on-B contrast, writes ood_sweep.csv"),
        ("verify-theory", "audit the closed-form layer, writes verify_theory.csv"),
    ):
        _common_flags(sub.add_parser(name, help=text))
    return parser


def _effective_config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be non-negative, got {args.seed}")
        config = dataclasses.replace(config, seed=args.seed)
    if args.out is not None:
        config = dataclasses.replace(config, out=args.out)
    return config


def _write_rows(config: ExperimentConfig, kind: str, columns, rows) -> Path:
    out = Path(config.out) / experiments.OUTPUT_FILES[kind]
    return experiments.write_csv(out, columns, rows)


def _run_sweep_like(config: ExperimentConfig, kind: str, quiet: bool) -> int:
    runner, columns = {
        "snr-sweep": (experiments.run_snr_sweep, experiments.SWEEP_COLUMNS),
        "sensitivity": (experiments.run_sensitivity, experiments.SENSITIVITY_COLUMNS),
        "ood-sweep": (experiments.run_ood_sweep, experiments.OOD_COLUMNS),
    }[kind]
    rows = runner(config)
    path = _write_rows(config, kind, columns, rows)
    if not quiet:
        print(f"wrote {path} ({len(rows)} rows)")
    return 0


def _run_verify(config: ExperimentConfig, quiet: bool) -> int:
    rows, ok = experiments.run_verify_theory(config)
    path = _write_rows(config, "verify-theory", experiments.VERIFY_COLUMNS, rows)
    if not quiet:
        for row in rows:
            print(
                f"{row['verdict']:>4}  {row['check']}"
                f"  value={row['value']:.3g} tolerance={row['tolerance']:.3g}"
            )
        print(f"wrote {path} ({'all checks pass' if ok else 'FAILURES PRESENT'})")
    return 0 if ok else 2


def _run_train_codec(config: ExperimentConfig, quiet: bool) -> int:
    info = experiments.run_train_codec(config)
    if not quiet:
        print(
            f"wrote {info['path']} (d={info['latent_dim']}, n={info['data_dim']}, "
            f"gamma_bar={info['gamma_bar']:.6f}, train_residual={info['train_residual']:.6g})"
        )
    return 0


def _run_train_denoiser(config: ExperimentConfig, quiet: bool) -> int:
    info = experiments.run_train_denoiser(config)
    if not quiet:
        print(
            f"wrote {info['path']} (d={info['latent_dim']}, steps={info['steps']}, "
            f"final_loss={info['final_loss']:.6g})"
        )
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _effective_config(args)
        if args.command == "verify-theory":
            return _run_verify(config, args.quiet)
        if args.command == "train-codec":
            return _run_train_codec(config, args.quiet)
        if args.command == "train-denoiser":
            return _run_train_denoiser(config, args.quiet)
        return _run_sweep_like(config, args.command, args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DiffrxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
