"""Exception taxonomy shared by all modules.

Validation problems (bad parameters, grids that do not line up, windows that
fall off the sampled path) are ValueError subclasses; runtime numerical
breakage is an ArithmeticError subclass so callers can tell the two apart.
"""


class ConfigurationError(ValueError):
    """A parameter violates a documented constraint (message names it)."""


class ShiftRangeError(ValueError):
    """A shift or evaluation window leaves the sampled path.

    The caller should sample a wider path and retry.
    """


class AlignmentError(ValueError):
    """A time does not sit on the relevant uniform grid."""


class OrderingError(ValueError):
    """A two-parameter evolution operator was queried with t < s."""


class NumericalError(ArithmeticError):
    """Non-finite values or a broken numerical invariant at runtime."""


class DefinitenessError(NumericalError):
    """An operator expected to be negative definite is not."""
