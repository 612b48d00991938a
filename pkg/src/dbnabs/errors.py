"""Exception hierarchy shared by every module."""


class DbnError(Exception):
    """Base class for all errors raised by dbnabs."""


class ValidationError(DbnError, ValueError):
    """Invalid input: bad shapes, non-finite numbers, malformed files."""


class ResourceCapError(DbnError):
    """A table would exceed a configured entry cap."""


class ConvergenceError(DbnError):
    """A numerical routine hit its iteration or depth cap."""
