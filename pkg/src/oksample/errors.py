"""Exception types raised across the package."""


class OkSampleError(Exception):
    """Base class for all package errors."""


class EmptySample(OkSampleError, ValueError):
    pass


class DegenerateSample(OkSampleError, ValueError):
    """All values identical while more than one component was requested."""


class InvalidC0(OkSampleError, ValueError):
    pass


class InvalidRange(OkSampleError, ValueError):
    pass


class ShapeMismatch(OkSampleError, ValueError):
    pass


class OutOfRange(OkSampleError, ValueError):
    pass


class UnknownLeaf(OkSampleError, KeyError):
    pass


class EmptyBand(OkSampleError, ValueError):
    pass


class EmptyRegion(OkSampleError, ValueError):
    pass
