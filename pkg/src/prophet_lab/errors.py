"""Exception hierarchy shared by every module."""


class ProphetLabError(Exception):
    """Base class for all library errors."""


class ValidationError(ProphetLabError, ValueError):
    """Input violates a documented invariant."""


class MalformedSpecError(ValidationError):
    """A valuation, distribution or certificate is structurally invalid."""


class WrongVariantError(ValidationError):
    """An operation was given a valuation of an unsupported variant/class."""


class InfeasibleAllocationError(ValidationError):
    """Allocation parts overlap or reference items outside ``M``."""


class AlignmentError(ValidationError):
    """Score generators do not line up with the instance's supports."""


class ParameterError(ValidationError):
    """A numeric parameter is out of its admissible range."""


class PreconditionError(ValidationError):
    """A certificate does not meet the precondition of a check."""


class CapacityError(ProphetLabError):
    """An exhaustive enumeration would exceed its configured size cap."""


class WitnessNotFound(ProphetLabError):
    """Exhaustive witness search came back empty."""
