"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: parse/validation failures exit 2,
capacity limits exit 3, internal invariant violations exit 4.
"""


class BlockSchedError(Exception):
    """Base class for all library errors."""


class ParseError(BlockSchedError):
    """Malformed input file or record."""


class ValidationError(BlockSchedError):
    """Structurally sound input that violates a documented precondition."""


class CapacityError(BlockSchedError):
    """Instance too large for an exact algorithm; the message names the fallback."""


class InvariantError(BlockSchedError):
    """An internal consistency check failed. Always a bug, never user error."""
