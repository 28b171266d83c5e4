"""Exception types raised by lance."""


class LanceError(Exception):
    """Base class for all lance errors."""


class InvalidArgumentError(LanceError, ValueError):
    """A shape, dimension or parameter violates an operation's precondition."""


class FormatError(LanceError, ValueError):
    """A tensor file is malformed (bad magic, truncated payload, bad dims)."""
