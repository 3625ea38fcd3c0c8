"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid arguments: wrong shapes, out-of-range parameters, bad files."""


class DegenerateInputError(InputError):
    """Geometry that an operation cannot handle, e.g. coincident points."""


class PreconditionError(RuntimeError):
    """A numerical precondition failed (for example the secant-gap check)."""
