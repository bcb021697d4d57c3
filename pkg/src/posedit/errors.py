"""Exception types shared across the package."""


class PoseditError(Exception):
    """Base class for every error raised by this package."""


class ParseError(PoseditError):
    """An input document violates its schema.

    The message names the offending path inside the document, e.g.
    ``frames[1].frame_index: must be strictly increasing``.
    """


class GeometryError(PoseditError):
    """A geometric operation received a degenerate configuration."""


class DatabaseError(PoseditError):
    """The pose database, or a query against it, is invalid."""


class ShapeError(PoseditError):
    """Array, grid, or vector dimensions do not line up."""


class StageError(PoseditError):
    """A pipeline stage could not run (missing input, failed helper process)."""
