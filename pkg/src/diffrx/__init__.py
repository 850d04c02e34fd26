"""SNR-adaptive diffusion denoising receiver for latent semantic links.

The library splits into a small closed-form layer (timestep matching
and scaling for a measured channel), the diffusion schedule and noise
predictors, a linear latent codec, distortion metrics, and a
config-driven experiment harness with a CLI front end.
"""

from .adapt import (
    ChannelSpec,
    ReceiverParams,
    compute_phi,
    receiver_params,
    scaling_factor,
    timestep_for_phi,
    timestep_simplified,
)
from .channel import (
    ChannelObservation,
    SnrPoint,
    measure_energy,
    sigma2_to_snr_db,
    snr_db_to_sigma2,
    transmit,
)
from .codec import LinearCodec, load_codec, save_codec
from .config import ExperimentConfig, load_config
from .denoise import (
    GaussianPrior,
    GmmPrior,
    NoisePredictor,
    denoise_with_params,
    receive_and_denoise,
)
from .errors import (
    ConfigError,
    DegenerateTimestepError,
    DiffrxError,
    FitError,
    InvalidInputError,
    InvalidPlanError,
    NegativeEnergyError,
    NumericalError,
    PgmFormatError,
    TensorFormatError,
    TrainingDivergedError,
)
from .fileio import load_pgm, load_tensor, save_pgm, save_tensor
from .metrics import (
    MetricsReport,
    MomentReport,
    moment_diagnostics,
    psnr,
    report_batch,
    rmse,
    ssim,
)
from .mlp import (
    EpsBatch,
    MlpPredictor,
    TrainConfig,
    draw_batch,
    gradient_check,
    load_checkpoint,
    mlp_gradient,
    mlp_loss,
    mlp_train,
    save_checkpoint,
)
from .schedule import (
    T_MAX,
    ForwardSample,
    ReverseStepPlan,
    forward_corrupt,
    reverse_chain,
    reverse_step,
    single_step_denoise,
)
from .sources import GaussianSource, GmmSource, PgmSource

__version__ = "0.1.0"

__all__ = [
    "ChannelObservation",
    "ChannelSpec",
    "ConfigError",
    "DegenerateTimestepError",
    "DiffrxError",
    "EpsBatch",
    "ExperimentConfig",
    "FitError",
    "ForwardSample",
    "GaussianPrior",
    "GaussianSource",
    "GmmPrior",
    "GmmSource",
    "InvalidInputError",
    "InvalidPlanError",
    "LinearCodec",
    "MetricsReport",
    "MlpPredictor",
    "MomentReport",
    "NegativeEnergyError",
    "NoisePredictor",
    "NumericalError",
    "PgmFormatError",
    "PgmSource",
    "ReceiverParams",
    "ReverseStepPlan",
    "SnrPoint",
    "T_MAX",
    "TensorFormatError",
    "TrainConfig",
    "TrainingDivergedError",
    "compute_phi",
    "denoise_with_params",
    "draw_batch",
    "forward_corrupt",
    "gradient_check",
    "load_checkpoint",
    "load_codec",
    "load_config",
    "load_pgm",
    "load_tensor",
    "measure_energy",
    "mlp_gradient",
    "mlp_loss",
    "mlp_train",
    "moment_diagnostics",
    "psnr",
    "receive_and_denoise",
    "receiver_params",
    "report_batch",
    "reverse_chain",
    "reverse_step",
    "rmse",
    "save_checkpoint",
    "save_codec",
    "save_pgm",
    "save_tensor",
    "scaling_factor",
    "sigma2_to_snr_db",
    "single_step_denoise",
    "snr_db_to_sigma2",
    "ssim",
    "timestep_for_phi",
    "timestep_simplified",
    "transmit",
]
