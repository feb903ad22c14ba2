"""Exception types raised across the toolkit."""


class LcnnError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(LcnnError, ValueError):
    """Tensor shapes are inconsistent with the requested operation."""


class ConfigError(LcnnError, ValueError):
    """An architecture or frontend configuration is invalid."""


class NumericError(LcnnError, ValueError):
    """A numeric-domain precondition was violated (non-finite input, var+eps <= 0, ...)."""


class PrecisionError(LcnnError, TypeError):
    """A float-only operation received a quantized network, or vice versa."""


class ContainerError(LcnnError, ValueError):
    """A model container could not be parsed. ``section`` names the offending section."""

    def __init__(self, message, section=None):
        self.section = section
        if section is not None:
            message = f"{message} (section {section!r})"
        super().__init__(message)


class AudioError(LcnnError, ValueError):
    """A WAV file could not be parsed. ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
