"""Exception types raised by the smoothing engine.

Every precondition failure derives from :class:`PreconditionError` so callers
(the command line front end in particular) can tell bad input apart from I/O
trouble.
"""


class PreconditionError(ValueError):
    """Input violates a documented precondition of a pipeline stage."""

    module = "kernsmooth"


class UnsupportedFastKernel(PreconditionError):
    module = "kernels"


class MonotonicityViolation(PreconditionError):
    module = "sliding1d"


class NonPositiveBandwidth(PreconditionError):
    module = "sliding1d"


class InvalidK(PreconditionError):
    module = "bandwidth"


class InfeasibleFraction(PreconditionError):
    module = "bandwidth"


class DegenerateSample(PreconditionError):
    module = "frame"


class ThresholdCollision(PreconditionError):
    module = "partition"
