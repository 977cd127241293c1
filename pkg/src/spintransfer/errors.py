"""Exception hierarchy shared by all modules."""


class SpinTransferError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(SpinTransferError, ValueError):
    """A caller-supplied argument is invalid; the message names the field."""


class NumericError(SpinTransferError, ArithmeticError):
    """A numerical routine failed to meet its accuracy contract."""


class ModelError(SpinTransferError):
    """A structural assumption (e.g. fidelity quadratic in cos(theta)) broke."""


class RangeError(SpinTransferError):
    """A requested target is unreachable within the searched bracket."""


class CapacityError(SpinTransferError):
    """Problem size exceeds a hard implementation cap."""


class CertificationError(SpinTransferError):
    """A self-certification check failed."""
