"""Exception types shared across the package."""


class VmfheadError(Exception):
    """Base class for all package-specific errors."""


class DegenerateInput(VmfheadError):
    """An input vector is degenerate (e.g. zero where a direction is needed)."""


class DimensionMismatch(VmfheadError):
    """Operands live in incompatible dimensions."""


class DomainError(VmfheadError):
    """A scalar argument is outside the mathematical domain of an operation."""


class PoleSingularity(VmfheadError):
    """The stereographic projection was evaluated at its pole."""


class NumericalFailure(VmfheadError):
    """An iterative numeric procedure failed to converge."""


class EncodingError(VmfheadError):
    """A digit stream is malformed or inconsistent with its declared shape."""


class PrecisionBudgetExceeded(VmfheadError):
    """A digit-packing request does not fit the floating-point budget."""


class InstanceTooLarge(VmfheadError):
    """A fully synthesized construction was requested beyond its size caps."""


class OverflowWarning(UserWarning):
    """A bound evaluation overflowed to infinity."""


class PermissiveModeWarning(UserWarning):
    """A bound formula was evaluated outside its guaranteed dimension range."""
