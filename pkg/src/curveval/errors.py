"""Exception types shared across the package.

Every error raised on bad user input derives from CurveEvalError; the CLI
maps these to exit code 1 and anything else to exit code 2.
"""


class CurveEvalError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(CurveEvalError):
    """A document could not be parsed at all (malformed JSON etc.)."""


class SchemaError(CurveEvalError):
    """A parsed document is missing a required key or violates the schema."""


class UnknownIdError(CurveEvalError):
    """An annotation or prediction references an id that does not exist."""


class FormatError(CurveEvalError):
    """A text-format line (YOLO) is malformed."""


class GeometryError(CurveEvalError):
    """A segmentation geometry is degenerate or inconsistent with its canvas."""


class ScoreRangeError(CurveEvalError):
    """A prediction score lies outside [0, 1]."""


class RleLengthError(CurveEvalError):
    """Run-length counts do not sum to the canvas size."""


class RleCodecError(CurveEvalError):
    """Compressed run-length text is malformed."""


class ShapeMismatchError(CurveEvalError):
    """Two masks that must share a canvas have different dimensions."""


class EmptyMaskError(CurveEvalError):
    """An operation that needs at least one set pixel got an empty mask."""


class DegeneratePathError(CurveEvalError):
    """A polyline operation got fewer than two points."""


class PlacementError(CurveEvalError):
    """The synthetic generator could not place an instance on the canvas."""
