"""Exception hierarchy shared by every module of the package."""


class FronthaulError(Exception):
    """Base class for all package errors."""


class DomainError(FronthaulError, ValueError):
    """An argument lies outside the domain of an operation."""


class InstabilityError(FronthaulError):
    """The offered load saturates a queue (utilisation >= 1)."""


class NoSolutionError(FronthaulError):
    """A numeric inversion could not find a point meeting the target."""


class EmptyFrameError(DomainError):
    pass


class InsufficientBlocksError(FronthaulError):
    pass


class MetadataMismatchError(FronthaulError):
    pass


class SingularMatrixError(FronthaulError):
    """Raised if a decoding submatrix is singular. Impossible for a correct MDS generator."""


class ConfigError(FronthaulError, ValueError):
    """An invalid scenario was handed to the simulator or CLI."""


class ParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ConfigError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnknownPresetError(ConfigError):
    pass


class NoSamplesError(FronthaulError):
    pass


class EmptyInputError(FronthaulError, ValueError):
    pass
