"""
Exception and warning types shared by the library and the CLI.

The CLI maps these onto exit codes (see cli.py):

    ConfigError / DomainError  → 2
    DataError                  → 3
"""


class CdfTransformError(Exception):
    """Base class for every error raised by cdftransform."""


class DomainError(CdfTransformError, ValueError):
    """A numeric argument lies outside the domain of the operation."""


class DataError(CdfTransformError):
    """Input data is unusable (empty, non-finite, malformed CSV, ...)."""


class ConfigError(CdfTransformError):
    """A configuration document or argument is invalid."""


class UnsupportedConfigurationError(ConfigError):
    """The configuration is valid on its own but not for this operation."""


# ---------------------------------------------------------------------------
# Warnings: raised through warnings.warn and copied into TestResult.diagnostics
# ---------------------------------------------------------------------------

class MonotonicityWarning(UserWarning):
    """A transformation family failed the sampled monotonicity audit."""


class PerturbationWarning(UserWarning):
    """The bootstrap perturbation weight c = tau * sqrt(T_n) is at least 1."""
