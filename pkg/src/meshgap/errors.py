"""Exception hierarchy shared across the package.

InputError subclasses map to CLI exit code 2 (bad user input),
everything else under MeshgapError maps to exit code 1.
"""


class MeshgapError(Exception):
    """Base class for all package errors."""


class InputError(MeshgapError):
    """Invalid user-supplied data: malformed files, bad parameters."""


class MeshFormatError(InputError):
    """Mesh or correspondence file could not be parsed."""


class ValidationError(InputError):
    """Structurally parsed data violates an invariant."""


class GeometryError(MeshgapError):
    """A geometric computation failed (e.g. unresolvable ray degeneracy)."""


class BudgetExhaustedError(MeshgapError):
    """A randomized search ran out of proposal budget."""
