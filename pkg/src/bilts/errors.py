"""Exception hierarchy shared by all bilts modules."""


class BiltsError(Exception):
    """Base class for every error raised by this package."""


class RotationNearPi(BiltsError):
    """Relative rotation too close to pi for a unique logarithm."""


class PureTranslation(BiltsError):
    """Screw axis requested for a twist without rotation (axis at infinity)."""


class DegenerateProgress(BiltsError):
    """The trajectory does not advance under the chosen progress definition."""


class SingularDecomposition(BiltsError):
    """The extended QR decomposition has r11 or r22 numerically zero."""


class SingularInvariants(BiltsError):
    """ISA invariants are unbounded because r11 or r22 vanish."""


class MismatchedScale(BiltsError):
    """Descriptors computed at different progress scales were compared."""


class TooShort(BiltsError):
    """Too few descriptor instances to compare two trajectories."""


class ParseError(BiltsError):
    """A trajectory file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(BiltsError):
    """A trajectory file parsed but violates the file schema."""


class ConfigError(BiltsError, ValueError):
    """Invalid configuration value; the message names the field."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ProtocolError(BiltsError):
    """The recognition protocol cannot be set up (e.g. missing reference context)."""
