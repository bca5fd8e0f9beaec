"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`PNKAError`,
so callers (and the CLI) can separate bad input from programming faults.
"""


class PNKAError(Exception):
    """Base class for all package errors."""


class FormatError(PNKAError, ValueError):
    """A file does not follow the layout its reader expects."""


class UnsupportedError(PNKAError, ValueError):
    """Valid input that this package deliberately does not handle."""


class DataError(PNKAError, ValueError):
    """Well-formed input whose content is unusable (NaN, duplicates, empty)."""


class ShapeError(PNKAError, ValueError):
    """Array dimensions are inconsistent with each other or with an index."""


class StateError(PNKAError, RuntimeError):
    """An object is in the wrong state for the requested operation."""


class IoError(PNKAError, OSError):
    """Reading or writing a file failed at the OS level."""
