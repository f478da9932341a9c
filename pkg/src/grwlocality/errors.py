"""Exception hierarchy for grwlocality."""


class GRWLocalityError(Exception):
    """Base class for all library errors."""


class ZeroVector(GRWLocalityError, ValueError):
    """Raised when normalizing a state whose norm vanishes."""


class DegenerateState(GRWLocalityError, ValueError):
    """Raised when the non-linear rule receives a zero-norm state."""


class AllBranchesDead(GRWLocalityError):
    """Raised when every enumerated branch has zero cooked weight."""


class EmptyCommonSupport(GRWLocalityError):
    """Raised when no lambda value is shared by the two right settings."""


class Unclassifiable(GRWLocalityError):
    """Raised when deviations match none of the known theory classes."""
