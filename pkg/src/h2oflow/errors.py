"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An argument violates an operation's preconditions."""


class InvalidData(ValueError):
    """Input data is malformed (non-finite coordinates, bad shapes)."""


class InvalidConfig(ValueError):
    """A configuration object violates its invariants."""


class ConfigError(ValueError):
    """A config file or flag could not be parsed; carries key/line context."""


class GenerationFailure(RuntimeError):
    """The scenario pose solver could not satisfy its contact condition."""


class NumericFailure(RuntimeError):
    """Non-finite values appeared mid-computation; message carries context."""


class ConstraintViolation(ValueError):
    """A kinematic constraint (joint limit) was violated."""


class FormatError(ValueError):
    """A binary file failed magic/structure checks; carries byte offset."""


class VersionError(FormatError):
    """A binary file has an unsupported format version."""
