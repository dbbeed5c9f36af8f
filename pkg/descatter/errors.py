import typing as T


class DescatterError(Exception):
    def __init__(
        self,
        message: str,
        *,
        extensions: dict[str, T.Any] | None = None,
        original_error: Exception | None = None,
    ):
        super().__init__(message)
        self.message = message
        self.extensions = extensions or {}
        self.original_error = original_error


class ShapeError(DescatterError):
    pass


class ConfigError(DescatterError):
    pass


class FormatError(DescatterError):
    """raised by every binary/text reader. extensions always carry `path` or `offset`"""


class ArchitectureMismatchError(FormatError):
    @property
    def fields(self) -> list[str]:
        return self.extensions.get("fields", [])


class StateError(DescatterError):
    pass


class TrainingError(DescatterError):
    pass


class DegenerateCorrelationWarning(UserWarning):
    """Corr of a constant image is undefined; the sentinel 0.0 was returned."""


__all__ = [
    "DescatterError",
    "ShapeError",
    "ConfigError",
    "FormatError",
    "ArchitectureMismatchError",
    "StateError",
    "TrainingError",
    "DegenerateCorrelationWarning",
]
