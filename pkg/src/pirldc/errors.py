"""Exception hierarchy.

Everything raised for bad domain input derives from ``PirError`` so the CLI
can map it to exit code 1.
"""


class PirError(ValueError):
    """Base class for domain errors."""


class LengthMismatch(PirError):
    pass


class ArrangementError(PirError):
    """Database size or index incompatible with the requested arrangement."""


class EnumerationTooLarge(PirError):
    pass


class NotPSD(PirError):
    pass


class NotOrthonormal(PirError):
    pass


class NotSymmetric(PirError):
    pass


class NotAPOVM(PirError):
    pass


class InvalidRange(PirError):
    pass


class SelectionMismatch(PirError):
    pass
