"""K-nearest-neighbour balloon bandwidths.

:func:`knn_bandwidth_1d` slides a block of ``k`` consecutive sorted sample
points along the evaluation points and picks, for each one, a half-width
whose half-open window ``[z - h, z + h)`` holds exactly that block.
:func:`allocate_fractions` splits a global neighbour fraction ``p`` across
the axes of a multivariate sample so that the per-axis windows form boxes
holding roughly ``p * n`` points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import InfeasibleFraction, InvalidK, MonotonicityViolation, PreconditionError


@dataclass
class KnnBandwidth1D:
    h: np.ndarray
    k: int
    convention: str = "half-open [z - h, z + h)"


@dataclass
class BandwidthAllocation:
    p: float
    p_k: np.ndarray
    K_k: np.ndarray


@njit(cache=True)
def _knn_core(x, z, k):
    n = x.shape[0]
    out = np.empty(z.shape[0])
    dmax = x[n - 1] - x[0]
    il = 0
    ir = k - 1
    for m in range(z.shape[0]):
        zm = z[m]
        # Shift the block right while z is past the midpoint of its outer neighbours.
        while ir + 1 <= n - 1 and zm > 0.5 * (x[il] + x[ir + 1]):
            il += 1
            ir += 1
        hmin = max(zm - x[il], x[ir] - zm)
        # An open side is bounded by the sample range.  Past half the range the
        # bound grows with hmin, so the window keeps its outermost point and
        # the edges stay monotone as z moves away from the sample.
        free = max(dmax, hmin + (0.5 * dmax if dmax > 0.0 else 1.0))
        left = zm - x[il - 1] if il > 0 else free
        right = x[ir + 1] - zm if ir < n - 1 else free
        h = 0.5 * (hmin + min(left, right))
        if h <= 0.0:
            # z sits on a run of tied points; use half the gap to the nearest distinct value.
            gap = np.inf
            i = il
            while i >= 0 and x[i] == zm:
                i -= 1
            if i >= 0:
                gap = zm - x[i]
            i = ir
            while i < n and x[i] == zm:
                i += 1
            if i < n:
                gap = min(gap, x[i] - zm)
            h = 0.5 * gap if gap < np.inf else 1.0
        out[m] = h
    _repair_rounding(z, out)
    return out


@njit(cache=True)
def _repair_rounding(z, h):
    # Edges pinned to the same sample points can step back by a few ulps of
    # z after rounding; snap h onto the previous edge, then nudge by ulps.
    for m in range(1, z.shape[0]):
        hi_prev = z[m - 1] + h[m - 1]
        if z[m] + h[m] < hi_prev:
            h[m] = hi_prev - z[m]
            for _ in range(4):
                if z[m] + h[m] >= hi_prev:
                    break
                h[m] = np.nextafter(h[m], np.inf)
        lo_prev = z[m - 1] - h[m - 1]
        if z[m] - h[m] < lo_prev:
            h[m] = z[m] - lo_prev
            for _ in range(4):
                if z[m] - h[m] >= lo_prev:
                    break
                h[m] = np.nextafter(h[m], 0.0)


def knn_bandwidth_1d(x, z, k: int) -> KnnBandwidth1D:
    """Balloon bandwidths whose windows hold the ``k`` nearest sample points.

    Parameters
    ----------
    x : array_like
        Sorted sample, length ``N``.
    z : array_like
        Sorted evaluation points.
    k : int
        Neighbour count, ``1 <= k <= N``.

    Returns
    -------
    KnnBandwidth1D
        For distinct ``x``, ``[z[m] - h[m], z[m] + h[m])`` contains exactly
        ``k`` points, and ``z - h``, ``z + h`` are nondecreasing.  With tied
        sample values the count can exceed ``k``.

    Examples
    --------
    >>> knn_bandwidth_1d([0.0, 1.0, 2.5, 10.0], [1.0], 2).h
    array([1.25])
    """
    x = np.ascontiguousarray(x, dtype=float)
    z = np.ascontiguousarray(z, dtype=float)
    n = x.size
    if not (1 <= int(k) <= n) or int(k) != k:
        raise InvalidK(f"k must be an integer in [1, {n}], got {k}")
    if np.any(np.diff(x) < 0) or np.any(np.diff(z) < 0):
        raise MonotonicityViolation("sample and evaluation points must both be sorted")
    return KnnBandwidth1D(_knn_core(x, z, int(k)), int(k))


def _clipped_fractions(log_sig, log_p, log_lo):
    # p_k = clip(c / sigma_k, lo, 1) with prod p_k = p.  The log of the
    # product is piecewise linear and nondecreasing in t = log c, so scan
    # its pieces for the one holding the root.
    edges = np.unique(np.concatenate([log_sig + log_lo, log_sig]))
    bounds = np.concatenate([[-np.inf], edges, [np.inf]])
    for t0, t1 in zip(bounds[:-1], bounds[1:]):
        mid = t0 + 1.0 if t1 == np.inf else (t1 - 1.0 if t0 == -np.inf else 0.5 * (t0 + t1))
        at_lo = mid <= log_sig + log_lo
        at_one = mid >= log_sig
        free = ~(at_lo | at_one)
        if not free.any():
            continue
        t = (log_p - at_lo.sum() * log_lo + log_sig[free].sum()) / free.sum()
        tol = 1e-12 * (1.0 + abs(t))
        if t0 - tol <= t <= t1 + tol:
            out = np.where(at_lo, np.exp(log_lo), 1.0)
            out[free] = np.exp(t - log_sig[free])
            return np.clip(out, np.exp(log_lo), 1.0)
    # Only reachable when every axis is pinned: p is 1 or (2/n)^d.
    return np.full(log_sig.size, 1.0 if log_p >= 0.0 else np.exp(log_lo))


def allocate_fractions(singular_values, p: float, n: int) -> BandwidthAllocation:
    """Split the global fraction ``p`` into per-axis fractions ``p_k``.

    ``p_k`` is inversely proportional to the spread ``sigma_k`` of axis
    ``k`` with ``prod(p_k) = p``, subject to ``2/n <= p_k <= 1``: the result
    is ``p_k = clip(c / sigma_k, 2/n, 1)`` with the common factor ``c``
    solved exactly.  Axes with zero spread get ``p_k = 1``.

    Examples
    --------
    >>> a = allocate_fractions([4.0, 1.0], 0.25, 10000)
    >>> a.p_k.tolist()
    [0.25, 1.0]
    """
    sig = np.asarray(singular_values, dtype=float).ravel()
    d = sig.size
    if not 0.0 < p <= 1.0:
        raise InfeasibleFraction(f"p must lie in (0, 1], got {p}")
    if not np.any(sig > 0):
        raise PreconditionError("at least one singular value must be positive")
    lo = 2.0 / n
    if p < lo**d:
        raise InfeasibleFraction(f"p={p} is below (2/n)^d = {lo ** d:.3g}")

    pk = np.ones(d)
    pos = sig > 0
    pk[pos] = _clipped_fractions(np.log(sig[pos]), np.log(p), np.log(lo))
    kk = np.clip(np.rint(pk * n), 2, n).astype(np.int64)
    return BandwidthAllocation(float(p), pk, kk)
