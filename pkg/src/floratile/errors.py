"""Exception hierarchy shared across the toolkit.

Two broad classes matter for the CLI exit-code contract: problems with user
input (files, arguments, schemas) exit with code 1, violated internal
contracts exit with code 2.
"""


class FloratileError(Exception):
    """Base class for all toolkit errors."""


class InputError(FloratileError):
    """Malformed input: bad file, bad schema, bad CLI argument."""


class InvariantViolation(FloratileError):
    """A documented contract of the pipeline was violated."""


class UnknownRegionError(InputError):
    """No registry entry is a prefix of the given quadrat id."""

    def __init__(self, quadrat_id: str):
        super().__init__(f"no registered region is a prefix of quadrat id {quadrat_id!r}")
        self.quadrat_id = quadrat_id


class ImageTooSmallError(InputError):
    """Image has fewer pixels per side than the grid has cells."""
