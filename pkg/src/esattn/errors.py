"""Exception families shared across the package."""


class ShapeError(ValueError):
    """Array dimensions disagree with what an operation requires."""


class DomainError(ValueError):
    """A value lies outside an operation's mathematical domain."""


class MeshParseError(ValueError):
    """A mesh file line could not be parsed; the message names the line."""


class DegenerateRenderError(RuntimeError):
    """A mesh projected to zero pixels, so no crop/rescale is possible."""
