"""Exception hierarchy with CLI exit codes.

Exit code convention: 0 success, 2 configuration error, 3 numerical error,
4 saturation (rejection sampling gave up), 5 I/O or file-format error.
"""


class IdsBenchError(Exception):
    exit_code = 1


class ConfigError(IdsBenchError):
    """Bad configuration: missing files, invalid parameters, mismatched inputs."""

    exit_code = 2


class DomainError(ConfigError):
    """An operation was called with inputs outside its contract."""


class NumericalError(IdsBenchError):
    """A numerical computation left its valid regime (e.g. negative spectrum)."""

    exit_code = 3


class SaturationError(IdsBenchError):
    """Rejection sampling exhausted its attempt budget."""

    exit_code = 4

    def __init__(self, attempts: int, closest_ratio: float, lo: float, hi: float):
        self.attempts = attempts
        self.closest_ratio = closest_ratio
        super().__init__(
            f"no mask with ratio in ({lo}, {hi}) after {attempts} attempts; "
            f"closest achieved ratio was {closest_ratio:.6f}"
        )


class FeatureFileError(IdsBenchError):
    """Feature file could not be read or written."""

    exit_code = 5


class BadMagicError(FeatureFileError):
    """File does not start with the feature-file magic bytes."""


class UnsupportedVersionError(FeatureFileError):
    """Feature file declares a version this reader does not understand."""


class TruncatedFileError(FeatureFileError):
    """Feature file ends before the declared payload is complete."""


class NonFiniteError(FeatureFileError):
    """Feature payload contains NaN or infinite entries."""


class IoError(IdsBenchError):
    """Filesystem or decoding failure on an input/output path."""

    exit_code = 5
