"""Exception hierarchy shared by every module of the package."""


class IdExpError(Exception):
    """Base class for all errors raised by idexp."""


class DimensionError(IdExpError, ValueError):
    """Array sizes do not agree with each other or with a model."""

    def __init__(self, what, expected, actual):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected {expected}, got {actual}")


class RangeError(IdExpError, ValueError):
    """A count or index lies outside its admissible range."""


class DegenerateSubspace(IdExpError, ValueError):
    """A basis is zero or rank deficient where full rank is required."""


class NearlyParallel(DegenerateSubspace):
    """Identity and expression blocks are each full rank but their union is not."""


class CorruptModel(IdExpError):
    """Container payload is truncated or fails its checksum."""


class UnsupportedVersion(IdExpError):
    """Container declares a format version this reader does not know."""


class MalformedManifest(IdExpError):
    """Container manifest is unparsable or internally inconsistent."""
