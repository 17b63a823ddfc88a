"""Exception hierarchy for the codec and streaming layers.

Every error raised on a decode path derives from ``CodecError`` so that
callers feeding untrusted bytes can catch a single type.
"""


class CodecError(Exception):
    """Base class for all codec errors."""


class ConfigMismatch(CodecError):
    """Two range images with different projection configs were compared."""


class NonPositiveDenominator(CodecError):
    """Surface model denominator is <= 0 at a queried pixel."""


class DegeneratePlane(CodecError):
    """Plane model denominator is zero for the queried ray."""


class ShapeMismatch(CodecError):
    """Coefficient support exceeds what the shape mask implies."""


class CorruptStream(CodecError):
    """Byte stream cannot be decoded (framing, entropy or section level)."""


class BadMagic(CorruptStream):
    """Frame does not start with the expected magic bytes."""


class UnsupportedVersion(CorruptStream):
    """Frame header declares a format version this build does not know."""


class MalformedTuple(CorruptStream):
    """A surface tuple lies outside the grid or has an invalid run length."""


class InconsistentShape(CodecError):
    """Coefficient section does not match occupancy minus fitted pixels."""


class LinkClosed(Exception):
    """The transport link was closed; loops terminate with partial logs."""
