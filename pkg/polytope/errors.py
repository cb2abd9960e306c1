# polytope/errors.py
"""Exceptions raised by the polytope package."""


class ExchPolyError(ValueError):
    """Base class for every error the library raises on bad input"""


class DomainError(ExchPolyError):
    """A parameter lies outside the range where the operation is defined"""


class InvariantError(ExchPolyError):
    """A value object violates one of its invariants"""


class DimensionError(ExchPolyError):
    """Shapes or lengths of the inputs do not match"""


class SizeGuardError(ExchPolyError):
    """A combinatorial enumeration would exceed the configured limit"""
