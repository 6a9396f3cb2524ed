"""Exception hierarchy shared by every module."""


class FBHError(Exception):
    """Base class for all toolkit errors."""


class NegativeDiscriminant(FBHError, ValueError):
    """Requested waist magnification cannot be reached at this object distance."""


class ScattererAtArrayPlane(FBHError, ValueError):
    pass


class ZeroSignal(FBHError, ValueError):
    pass


class PlanMismatch(FBHError, ValueError):
    pass


class AllZeroImage(FBHError, ValueError):
    pass


class EmptyBank(FBHError, ValueError):
    pass


class EpsilonNonPositive(FBHError, ValueError):
    pass


class NoPeak(FBHError, ValueError):
    pass


class ContainerError(FBHError):
    pass


class BadMagic(ContainerError):
    pass


class VersionUnsupported(ContainerError):
    pass


class TruncatedPayload(ContainerError):
    pass


class DimensionOverflow(ContainerError):
    pass


class UnknownRecordTag(ContainerError):
    pass


class ConfigError(FBHError):
    """Scene config problem, anchored to a 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IoFailure(FBHError, OSError):
    pass
