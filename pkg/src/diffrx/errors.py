"""Exception types shared across the package."""


class DiffrxError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(DiffrxError, ValueError):
    """An input vector contains non-finite components or has a bad shape."""


class InvalidPlanError(DiffrxError, ValueError):
    """A reverse-step plan is inconsistent (e.g. dt > t_from)."""


class DegenerateTimestepError(DiffrxError, ValueError):
    """Timestep too close to 1 for the clean-sample reconstruction to exist."""


class NegativeEnergyError(DiffrxError, ValueError):
    """Measured received energy fell below the noise floor sigma^2."""


class NumericalError(DiffrxError, ArithmeticError):
    """A computation lost all precision (e.g. every mixture weight underflowed)."""


class FitError(DiffrxError, ValueError):
    """Codec fitting failed (rank deficiency, d >= n, too few samples)."""


class TrainingDivergedError(DiffrxError, RuntimeError):
    """Training loss became non-finite."""


class TensorFormatError(DiffrxError, ValueError):
    """Malformed tensor container file."""


class PgmFormatError(DiffrxError, ValueError):
    """Malformed or unsupported PGM file."""


class ConfigError(DiffrxError, ValueError):
    """Invalid experiment configuration."""
