"""Exception types shared across the package."""


class ChaosBsdeError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(ChaosBsdeError, ValueError):
    """Invalid parameter combination or malformed run configuration."""


class ResourceLimitError(ChaosBsdeError, RuntimeError):
    """A requested computation exceeds a configured size cap."""


class DataError(ChaosBsdeError, ValueError):
    """Input data is unusable: wrong shape, mismatched panels, non-finite entries."""


class UnderdeterminedError(ChaosBsdeError, ValueError):
    """Fewer Monte Carlo samples than regression coefficients."""


class IllConditionedError(ChaosBsdeError, RuntimeError):
    """Normal equations too ill-conditioned to solve without a ridge term."""


class NumericalBlowupError(ChaosBsdeError, RuntimeError):
    """The Picard iteration produced non-finite or exploding values."""
