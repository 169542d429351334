"""Fast kernel smoothing by sliding-window sum updating.

Kernel density estimates, Nadaraya-Watson and locally linear regression
evaluated on whole grids of points in ``O(N log N + M)`` time, with a direct
``O(M N)`` reference implementation for comparison.
"""

from .accumulator import CompensatedAccumulator, PlainAccumulator, make_accumulator
from .bandwidth import allocate_fractions, knn_bandwidth_1d
from .errors import (
    DegenerateSample,
    InfeasibleFraction,
    InvalidK,
    MonotonicityViolation,
    NonPositiveBandwidth,
    PreconditionError,
    ThresholdCollision,
    UnsupportedFastKernel,
)
from .frame import build_grid, fit_frame, interpolate
from .kernels import KernelKind, decompose, eval_kernel
from .oracle import naive_smooth
from .partition import build_partition, enumerate_moment_keys, precompute_box_sums
from .pipeline import run
from .sliding1d import SortedSample1D, smooth1d
from .sweep import assemble_smoothers, expand_kernel_sums, sweep_sums

__version__ = "0.1.0"

__all__ = [
    "allocate_fractions",
    "assemble_smoothers",
    "build_grid",
    "build_partition",
    "CompensatedAccumulator",
    "decompose",
    "DegenerateSample",
    "enumerate_moment_keys",
    "eval_kernel",
    "expand_kernel_sums",
    "fit_frame",
    "InfeasibleFraction",
    "interpolate",
    "InvalidK",
    "KernelKind",
    "knn_bandwidth_1d",
    "make_accumulator",
    "MonotonicityViolation",
    "naive_smooth",
    "NonPositiveBandwidth",
    "PlainAccumulator",
    "precompute_box_sums",
    "PreconditionError",
    "run",
    "smooth1d",
    "SortedSample1D",
    "sweep_sums",
    "ThresholdCollision",
    "UnsupportedFastKernel",
]
