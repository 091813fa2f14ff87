"""Exception types shared across the package.

Every contract violation raises one of these rather than a bare
ValueError so callers (and the CLI) can tell configuration mistakes
apart from numerical blow-ups.
"""


class SmarlabError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(SmarlabError):
    """Operands have incompatible or unsupported dimensions."""


class NumericError(SmarlabError):
    """A value left the numeric domain an operation requires (NaN, <= 0 under log, ...)."""


class GraphStateError(SmarlabError):
    """The gradient graph was used in an invalid order (e.g. backward twice)."""


class ParameterError(SmarlabError):
    """A hyper-parameter or structural argument is out of its legal range."""


class InputError(SmarlabError):
    """Runtime input data violates a precondition (bad label, empty batch, ...)."""


class ConfigError(SmarlabError):
    """A configuration file or override could not be parsed or validated."""


class CheckpointError(SmarlabError):
    """A checkpoint file is missing, malformed, or incompatible."""


class MrdUndefinedError(SmarlabError):
    """Routing distribution statistics need both modalities in the batch."""


class TrainingDivergedError(SmarlabError):
    """Training hit a non-finite loss; carries the last logged metrics."""

    def __init__(self, message, last_metrics=None):
        super().__init__(message)
        self.last_metrics = last_metrics
