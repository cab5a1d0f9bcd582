"""Exception hierarchy shared by every psnn module."""


class PSNNError(Exception):
    """Base class for all errors raised by psnn."""


class DomainError(PSNNError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class ShapeError(PSNNError, ValueError):
    """Waveforms or arrays do not line up (length, timestep, dimension)."""


class NumericError(PSNNError, ArithmeticError):
    """A simulation produced or received a non-finite value."""


class ProgrammingError(PSNNError):
    """A mesh weight target cannot be realised by the mesh."""


class UnclassifiableError(PSNNError):
    """Too few spikes to assign a firing pattern."""


class ProfileError(PSNNError):
    """A technology profile lacks data required by the requested mode."""


class TrainingError(PSNNError):
    """Training data is degenerate."""


class SchemaError(PSNNError, ValueError):
    """A file does not have the expected columns or keys."""


class ParseError(PSNNError, ValueError):
    """A file row or config value could not be parsed."""

    def __init__(self, message, *, path=None, line=None, key=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{': '.join(where)}: {message}" if where else message)
        self.path = path
        self.line = line
        self.key = key


class ConfigError(ParseError):
    """A configuration file or one of its values is invalid."""


class PropertyFailure(PSNNError):
    """A scenario's expected property did not hold."""
