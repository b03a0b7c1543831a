"""Exception types shared across the package.

Every error carries its class name into CLI diagnostics, so the names are
part of the user-facing contract.
"""


class IsomwalkError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(IsomwalkError, ValueError):
    """Operands live in different dimensions."""


class GroupNotFinite(IsomwalkError):
    """Closure enumeration exceeded the allowed number of elements."""


class AtomExplosion(IsomwalkError):
    """An exact convolution would exceed the atom cap."""


class CapExceeded(IsomwalkError):
    """A simulation or enumeration request exceeds a configured cap."""


class NonUniqueFixedPoint(IsomwalkError):
    """The averaged rotation fixes a nonzero vector, so no unique center exists."""


class DegenerateForm(IsomwalkError):
    """A quadratic form required to be positive definite is not."""


class InterpolationOverflow(IsomwalkError):
    """A field carries energy above the band limit of its grid."""


class ProjectorRankError(IsomwalkError):
    """A subspace basis came out with fewer dimensions than expected."""


class InvariantSplitError(IsomwalkError):
    """Computed blocks fail the invariance check under the generators."""


class ConfigError(IsomwalkError):
    """Malformed experiment configuration or measure file."""
