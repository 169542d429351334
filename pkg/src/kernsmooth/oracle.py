"""Direct O(M N) reference smoothers.

Every estimate is formed by visiting every sample point for every
evaluation point and summing the defining formulas, with compensated
accumulation throughout.  Window membership uses the same edge expressions
``z - h`` and ``z + h`` and the same half-open test as the fast engine, so
both engines see identical point sets.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .accumulator import comp_add
from .kernels import KernelKind, kernel_raw
from .localfit import solve_local_linear
from .partition import bandwidth_edges
from .sliding1d import STATUS_EMPTY, STATUS_OK, STATUS_SINGULAR
from .sweep import SmoothResultGrid

COMBINE = ("product", "average")


@njit(cache=True)
def _naive_moments(x, xt, y, z, h, lo, hi, code, finite, average):
    """Kernel-weighted local moments about every evaluation point.

    Returns ``(a, b, mag, count)``: the centered, bandwidth-scaled normal
    equations of the locally linear fit (``a[:, 0, 0]`` is the kernel mass,
    ``b[:, 0]`` the weighted output sum), the diagonal magnitudes for the
    pivot test, and the number of points in each window.
    """
    n, d = x.shape
    m = z.shape[0]
    p = d + 1
    a = np.zeros((m, p, p))
    b = np.zeros((m, p))
    mag = np.zeros((m, p))
    count = np.zeros(m, dtype=np.int64)
    na = p * (p + 1) // 2
    sa = np.empty(na)
    ca = np.empty(na)
    sb = np.empty(p)
    cb = np.empty(p)
    u = np.empty(p)
    scale = 1.0 / (d * 2.0 ** (d - 1))
    idx = np.empty(n, dtype=np.int64)
    for j in range(m):
        sa[:] = 0.0
        ca[:] = 0.0
        sb[:] = 0.0
        cb[:] = 0.0
        # Window membership as a branch-free compaction pass over all rows.
        cnt = 0
        for i in range(n):
            idx[cnt] = i
            ins = 1
            if finite:
                for k in range(d):
                    ins &= (lo[j, k] <= xt[k, i]) & (xt[k, i] < hi[j, k])
            cnt += ins
        for e in range(cnt):
            i = idx[e]
            u[0] = 1.0
            for k in range(d):
                u[k + 1] = (x[i, k] - z[j, k]) / h[j, k]
            if average:
                w = 0.0
                for k in range(d):
                    w += kernel_raw(code, u[k + 1])
                w *= scale
            else:
                w = 1.0
                for k in range(d):
                    w *= kernel_raw(code, u[k + 1])
            t = 0
            for r in range(p):
                wr = w * u[r]
                for c in range(r + 1):
                    sa[t], ca[t] = comp_add(sa[t], ca[t], wr * u[c])
                    t += 1
                sb[r], cb[r] = comp_add(sb[r], cb[r], wr * y[i])
        count[j] = cnt
        t = 0
        for r in range(p):
            for c in range(r + 1):
                v = sa[t] + ca[t]
                a[j, r, c] = v
                a[j, c, r] = v
                t += 1
            b[j, r] = sb[r] + cb[r]
            mag[j, r] = abs(a[j, r, r])
    return a, b, mag, count


def naive_smooth(
    inputs,
    outputs,
    points,
    bandwidths,
    kernel="epanechnikov",
    combine="product",
    estimators=("kde", "nw", "loclin"),
) -> SmoothResultGrid:
    """Reference density, Nadaraya-Watson and locally linear estimates.

    Parameters
    ----------
    inputs : (N, d) array_like
    outputs : (N,) array_like or None
    points : (M, d) array_like
        Evaluation points.
    bandwidths : (M, d) array_like
        Per-axis half-widths at every evaluation point.
    kernel : KernelKind or str
        Any of the ten univariate kernels.
    combine : {"product", "average"}
        Multivariate kernel: product of univariate kernels, or their mean
        scaled by ``1 / 2**(d-1)`` to integrate to one over the box (finite
        support kernels only).  Identical for ``d = 1``.
    """
    kind = KernelKind.parse(kernel)
    if combine not in COMBINE:
        raise ValueError(f"combine must be one of {COMBINE}")
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    z = np.asarray(points, dtype=float).reshape(-1, d)
    hb = np.asarray(bandwidths, dtype=float)
    if hb.ndim == 1 and d == 1:
        hb = hb[:, None]
    h = np.ascontiguousarray(np.broadcast_to(hb, z.shape))
    if np.any(~(h > 0)):
        raise ValueError("bandwidths must be positive")
    average = combine == "average" and d > 1
    if average and not kind.finite_support:
        raise ValueError("the averaged multivariate kernel needs a finite-support base kernel")
    y = np.zeros(n) if outputs is None else np.asarray(outputs, dtype=float)
    # Rows in order of the first coordinate: results change only within
    # compensated rounding, and members of a window sit close in memory.
    order = np.argsort(x[:, 0], kind="stable")
    x = np.ascontiguousarray(x[order])
    y = np.ascontiguousarray(y[order])
    lo, hi = bandwidth_edges(z, h)
    a, b, mag, count = _naive_moments(
        x, np.ascontiguousarray(x.T), y, np.ascontiguousarray(z), h, lo, hi, kind.code, kind.finite_support, average
    )
    mass = a[:, 0, 0]
    empty = (count == 0) | ~(mass > 0)
    density = np.where(empty, 0.0, np.maximum(mass, 0.0) / (n * np.prod(h, axis=1)))
    with np.errstate(divide="ignore", invalid="ignore"):
        nw = np.where(empty, np.nan, b[:, 0] / mass)
        beta, singular = solve_local_linear(a, b, mag)
        est = beta[:, 0]
    status = np.full(z.shape[0], STATUS_OK, dtype=np.int8)
    loclin = np.full(z.shape[0], np.nan)
    if "loclin" in estimators:
        singular &= ~empty
        loclin = np.where(singular, nw, est)
        loclin[empty] = np.nan
        status[singular] = STATUS_SINGULAR
    status[empty] = STATUS_EMPTY
    if "nw" not in estimators and "loclin" not in estimators:
        nw = np.full(z.shape[0], np.nan)
    return SmoothResultGrid(density, nw, loclin, status)
