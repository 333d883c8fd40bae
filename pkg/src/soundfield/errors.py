"""Exception types shared across the toolkit."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class SingularityError(DomainError):
    """Evaluation point coincides with a point source."""


class InfeasibleError(DomainError):
    """Requested physical configuration cannot be realised."""


class DegenerateInputError(DomainError):
    """Input data carries no information (e.g. all-zero observations)."""


class ModelCorruptError(ValueError):
    """Network parameters are non-finite or inconsistent."""


class UnsupportedForPDEError(ValueError):
    """Activation is not twice differentiable, so the Laplacian is undefined."""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical procedure."""


class IllPosedError(NumericalError):
    """Linear system is singular and no regularisation was supplied."""


class TrainingDivergedError(NumericalError):
    """Loss became non-finite during training.

    Attributes
    ----------
    checkpoint : object
        Last model whose loss was finite.
    """

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint


class ConfigError(ValueError):
    """Malformed configuration or scene file.

    Attributes
    ----------
    location : str
        File path and key path of the offending entry.
    """

    def __init__(self, message, location=""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location
