"""Exception hierarchy. Every error carries a stable ``code`` string."""

from __future__ import annotations


class TwinForgeError(Exception):
    code = "ERROR"


class ConfigError(TwinForgeError):
    code = "CONFIG_ERROR"

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownKey(ConfigError):
    code = "UNKNOWN_KEY"


class TypeMismatch(ConfigError):
    code = "TYPE_MISMATCH"


class MissingRequired(ConfigError):
    code = "MISSING_REQUIRED"


class InvalidState(TwinForgeError):
    code = "INVALID_STATE"


class InvalidDistance(TwinForgeError):
    code = "INVALID_DISTANCE"


class EmptyGroup(TwinForgeError):
    code = "EMPTY_GROUP"


class HeterogeneousGroup(TwinForgeError):
    code = "HETEROGENEOUS_GROUP"


class EpisodeOver(TwinForgeError):
    code = "EPISODE_OVER"


class MirrorDivergence(TwinForgeError):
    code = "MIRROR_DIVERGENCE"


class NumericError(TwinForgeError):
    code = "NUMERIC_ERROR"


class ShapeError(TwinForgeError):
    code = "SHAPE_ERROR"
