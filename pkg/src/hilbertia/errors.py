"""Error types raised by the numerical routines.

Every failure mode that callers may want to catch gets its own class so the
command line tool can report a stable name and exit code.  All of them derive
from HilbertiaError.
"""


class HilbertiaError(Exception):
    """Base class for all library-specific failures."""

    @property
    def name(self):
        return type(self).__name__


class NonInvertible(HilbertiaError):
    """Matrix determinant is zero (or numerically indistinguishable from it)."""


class NotHyperbolic(HilbertiaError):
    """Map does not have three distinct positive real eigenvalues."""


class DegenerateImage(HilbertiaError):
    """Image of a point underflowed to the zero vector."""


class NotInterior(HilbertiaError):
    """Point expected strictly inside the domain is not."""


class OriginNotInterior(HilbertiaError):
    """Polar duality needs an interior basepoint and recentring failed."""


class TooFewPoints(HilbertiaError):
    """Not enough distinct points to span a convex hull."""


class EmptyIntersection(HilbertiaError):
    """Sampling region does not meet the domain."""


class NotOnBoundary(HilbertiaError):
    """Point expected on the domain boundary is too far from it."""


class NotConverged(HilbertiaError):
    """Iteration or limit did not settle within its budget."""


class TooShort(HilbertiaError):
    """Requested geodesic lengths are below the constructible range."""


class InsufficientData(HilbertiaError):
    """Too few samples or classes to fit the requested quantity."""


class NotPositiveDefinite(HilbertiaError):
    """Quadratic form expected positive definite is not."""


class TooCloseToBoundary(HilbertiaError):
    """Evaluation point is within the unreliable band next to the boundary."""


class MismatchedBoundary(HilbertiaError):
    """Two measures live on different domain boundaries."""


class NonConvexDomain(HilbertiaError):
    """Input region fails the convexity checks."""
