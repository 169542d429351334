"""End-to-end smoothing on a rectilinear grid.

``rotate -> grid -> per-axis KNN bandwidths -> fast engine`` and,
optionally, the direct reference engine on the same grid and bandwidths.
One dimension uses the sliding-window engine with any fast kernel; two or
more use box partitions and the grid sweep with the additive Epanechnikov
kernel.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bandwidth import BandwidthAllocation, allocate_fractions, knn_bandwidth_1d
from .errors import UnsupportedFastKernel
from .frame import EvalGrid, RotatedFrame, build_grid, fit_frame
from .kernels import KernelKind
from .oracle import naive_smooth
from .partition import ONE, build_partition, enumerate_moment_keys
from .sliding1d import SortedSample1D, smooth1d
from .sweep import (
    SmoothResultGrid,
    assemble_plain,
    assemble_smoothers,
    expand_kernel_sums,
    expand_plain,
    expansion_columns,
    streamed_moment_sums,
)

ENGINES = ("fast", "naive", "both")


@dataclass
class GridSetup:
    frame: RotatedFrame
    rotated: np.ndarray
    grid: EvalGrid
    allocation: BandwidthAllocation
    axis_bandwidths: list
    sorted_axes: list

    @property
    def d(self) -> int:
        return self.grid.d

    def points(self) -> np.ndarray:
        """Grid nodes in rotated coordinates, lexicographic order."""
        return self.grid.points()

    def bandwidths(self) -> np.ndarray:
        """Per-axis half-widths at every grid node, ``(M, d)``."""
        mesh = np.meshgrid(*self.axis_bandwidths, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass
class PipelineResult:
    setup: GridSetup
    fast: SmoothResultGrid = None
    naive: SmoothResultGrid = None
    fast_seconds: float = float("nan")
    naive_seconds: float = float("nan")
    timings: dict = field(default_factory=dict)

    @property
    def points(self) -> np.ndarray:
        """Grid nodes in the original coordinates."""
        return self.setup.frame.inverse(self.setup.points())


def prepare_grid(inputs, p: float = 0.15, grid_size=None, rotate: bool = True) -> GridSetup:
    """Frame, grid and KNN bandwidths for a sample."""
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    frame = fit_frame(x, rotate)
    rotated = frame.transform(x)
    alloc = allocate_fractions(frame.singular_values, p, n)
    grid = build_grid(rotated, n if grid_size is None else int(grid_size), frame.singular_values)
    sorted_axes, hs = [], []
    for k in range(x.shape[1]):
        xs = np.sort(rotated[:, k])
        sorted_axes.append(xs)
        hs.append(knn_bandwidth_1d(xs, grid.axes[k], int(alloc.K_k[k])).h)
    return GridSetup(frame, rotated, grid, alloc, hs, sorted_axes)


def _fast_1d(setup: GridSetup, outputs, kind, policy):
    x = setup.rotated[:, 0]
    order = np.argsort(x, kind="stable")
    y = None if outputs is None else np.asarray(outputs, dtype=float)[order]
    res = smooth1d(SortedSample1D(x[order], y), setup.grid.axes[0], setup.axis_bandwidths[0], kind, policy)
    return SmoothResultGrid(res.density, res.nw, res.loclin, res.status)


def _fast_sweep(setup: GridSetup, outputs, policy, estimators):
    x = setup.rotated
    n, d = x.shape
    center = x.mean(axis=0)
    # Power-of-two scales keep the division exact.
    spread = x.std(axis=0)
    scale = np.exp2(np.round(np.log2(np.where(spread > 0, spread, 1.0))))
    xn = (x - center) / scale
    parts = [build_partition(setup.grid.axes[k], setup.axis_bandwidths[k], setup.sorted_axes[k]) for k in range(d)]
    keys = sorted({k for e in estimators for k in enumerate_moment_keys(d, e)}, key=lambda k: (k.q, k.degree, k.monomial))
    y = None if outputs is None else np.asarray(outputs, dtype=float)
    t_hi, t_lo = streamed_moment_sums(x, y, parts, keys, policy, monomial_inputs=xn)
    zn = (setup.points() - center) / scale
    hn = setup.bandwidths() / scale
    regs = sorted({r for r in keys if r.degree <= 2 and (r.q == 0 or r.degree <= 1)}, key=lambda k: (k.q, k.degree, k.monomial))
    regs = [r for r in regs if _regressor_needed(r, estimators)]
    counts = t_hi[:, keys.index(ONE)]
    # Density is per unit volume of the unscaled rotated coordinates.
    unscale = 1.0 / np.prod(scale)
    if t_lo is None:
        sk = expand_plain(t_hi, expansion_columns(keys, regs, d), zn, hn, n) * unscale
        return assemble_plain(sk, regs, zn, hn, counts, estimators)
    # Compensated sums stay as (sum, error) pairs through the expansion.
    sums = expand_kernel_sums((t_hi, t_lo), keys, zn, hn, n, regs)
    sums = {r: v * unscale for r, v in sums.items()}
    return assemble_smoothers(sums, zn, hn, counts, estimators)


def _regressor_needed(r, estimators) -> bool:
    if r.q == 0 and r.degree == 0:
        return True
    if r.q == 1 and r.degree == 0:
        return "nw" in estimators or "loclin" in estimators
    return "loclin" in estimators


def fast_smooth(setup: GridSetup, outputs=None, kernel="epanechnikov", policy="plain", estimators=("kde", "nw", "loclin")):
    kind = KernelKind.parse(kernel)
    if setup.d == 1:
        return _fast_1d(setup, outputs, kind, policy)
    if kind is not KernelKind.EPANECHNIKOV:
        raise UnsupportedFastKernel("the multivariate fast engine uses the additive Epanechnikov kernel only")
    return _fast_sweep(setup, outputs, policy, tuple(estimators))


def reference_smooth(setup: GridSetup, outputs=None, kernel="epanechnikov", estimators=("kde", "nw", "loclin")):
    combine = "product" if setup.d == 1 else "average"
    return naive_smooth(setup.rotated, outputs, setup.points(), setup.bandwidths(), kernel, combine, estimators)


def run(
    inputs,
    outputs=None,
    p: float = 0.15,
    grid_size=None,
    rotate: bool = True,
    policy="plain",
    kernel="epanechnikov",
    estimators=("kde", "nw", "loclin"),
    engine="fast",
) -> PipelineResult:
    """Smooth a sample on its evaluation grid with the chosen engine(s).

    ``fast_seconds`` covers everything from the raw sample to the estimates
    (rotation, sorting, bandwidths, partitions, sums, assembly);
    ``naive_seconds`` covers the direct evaluation on the same grid.
    """
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}")
    t0 = time.perf_counter()
    setup = prepare_grid(inputs, p, grid_size, rotate)
    t_setup = time.perf_counter() - t0
    out = PipelineResult(setup)
    out.timings["setup"] = t_setup
    if engine in ("fast", "both"):
        t0 = time.perf_counter()
        out.fast = fast_smooth(setup, outputs, kernel, policy, estimators)
        out.fast_seconds = t_setup + time.perf_counter() - t0
    if engine in ("naive", "both"):
        t0 = time.perf_counter()
        out.naive = reference_smooth(setup, outputs, kernel, estimators)
        out.naive_seconds = time.perf_counter() - t0
    return out


def relative_errors(fast, naive, estimators=("kde", "nw", "loclin")) -> np.ndarray:
    """``|fast - naive| / |naive|`` over all estimators and grid points where both are defined."""
    names = {"kde": "density", "nw": "nw", "loclin": "loclin"}
    errs = []
    for e in estimators:
        f = getattr(fast, names[e])
        r = getattr(naive, names[e])
        ok = np.isfinite(f) & np.isfinite(r) & (r != 0)
        errs.append(np.abs(f[ok] - r[ok]) / np.abs(r[ok]))
    return np.concatenate(errs) if errs else np.zeros(0)
