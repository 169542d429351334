"""Per-axis box partitions and precomputed per-box moment sums.

Along each axis the bandwidth edges ``z - h`` and ``z + h`` of all grid
coordinates cut the line into intervals.  Runs of intervals holding no
sample point are merged into one threshold, so the number of boxes stays
below twice the number of grid coordinates.  Every bandwidth window is then
a contiguous range of boxes, and the product of per-axis ranges is exactly
the multivariate bandwidth box.  Summing the per-box monomial sums over
such a range therefore gives the window sum without touching the sample.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numba import njit

from .accumulator import comp_add, dd_mul, is_compensated
from .ddarith import DD
from .errors import MonotonicityViolation, ThresholdCollision

ESTIMATORS = ("kde", "nw", "loclin")


@dataclass
class AxisPartition:
    """Thresholds of one axis and the box range of every grid coordinate.

    Box ``l`` is ``[thresholds[l], thresholds[l + 1])``.  Grid coordinate
    ``j`` covers boxes ``l_index[j] .. r_index[j]`` inclusive (0-based); an
    empty range (``r < l``) means its window holds no sample point.
    """

    thresholds: np.ndarray
    l_index: np.ndarray
    r_index: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @property
    def box_count(self) -> int:
        return self.thresholds.size - 1

    def bin(self, values) -> np.ndarray:
        """Box index of each value, ``-1`` outside the thresholds."""
        b = np.searchsorted(self.thresholds, values, side="right") - 1
        b[(b < 0) | (b >= self.box_count)] = -1
        return b


def bandwidth_edges(z, h):
    """Window edges ``z - h`` and ``z + h``; the oracle uses the same expressions."""
    z = np.asarray(z, dtype=float)
    h = np.asarray(h, dtype=float)
    return z - h, z + h


def _avoid_inputs(t, x):
    """Move a threshold off the sample without changing window membership.

    A threshold equal to a sample value moves into the gap below that value,
    which keeps ``t <= x_i`` for the value itself and every larger one.
    """
    i = np.searchsorted(x, t, side="left")
    if i >= x.size or x[i] != t:
        return t
    below = x[i - 1] if i > 0 else -np.inf
    cand = 0.5 * (below + t) if np.isfinite(below) else np.nextafter(t, -np.inf)
    if not below < cand < t:
        cand = np.nextafter(t, -np.inf)
    if not below < cand < t:
        raise ThresholdCollision(f"no float lies between sample values {below!r} and {t!r}")
    return cand


def build_partition(axis_grid, axis_bandwidths, axis_inputs) -> AxisPartition:
    """Threshold partition of one axis.

    Parameters
    ----------
    axis_grid, axis_bandwidths : array_like
        Grid coordinates ``z_j`` and half-widths ``h_j`` with ``z - h`` and
        ``z + h`` nondecreasing.
    axis_inputs : array_like
        Sorted sample coordinates along this axis.

    Examples
    --------
    >>> p = build_partition([1.5], [0.5], [0.0, 1.2, 3.0])
    >>> p.thresholds.tolist(), p.l_index.tolist(), p.r_index.tolist()
    ([1.0, 2.0], [0], [0])
    """
    x = np.ascontiguousarray(axis_inputs, dtype=float)
    lo, hi = bandwidth_edges(axis_grid, axis_bandwidths)
    if np.any(np.diff(lo) < 0) or np.any(np.diff(hi) < 0):
        raise MonotonicityViolation("z - h and z + h must be nondecreasing along each axis")
    adj_lo = np.array([_avoid_inputs(t, x) for t in lo])
    adj_hi = np.array([_avoid_inputs(t, x) for t in hi])
    raw = np.unique(np.concatenate([adj_lo, adj_hi]))
    counts = np.diff(np.searchsorted(x, raw, side="left"))
    thresholds, mapping = trim_empty(raw, counts)
    lo_idx = np.searchsorted(raw, adj_lo)
    hi_idx = np.searchsorted(raw, adj_hi)
    return AxisPartition(
        thresholds,
        mapping[lo_idx],
        mapping[hi_idx] - 1,
        lo,
        hi,
    )


def trim_empty(thresholds, counts):
    """Merge every run of empty intervals into the midpoint of its outer thresholds.

    Returns the trimmed thresholds and the index of each original threshold
    in the trimmed list.

    >>> g, _ = trim_empty(np.array([0.0, 1.0, 2.0, 3.0]), np.array([1, 0, 1]))
    >>> g.tolist()
    [0.0, 1.5, 3.0]
    """
    m = thresholds.size
    if m < 2 or not np.any(counts):
        mapping = np.zeros(m, dtype=np.int64)
        if m >= 2:
            mapping[-1] = 1
            return np.array([thresholds[0], thresholds[-1]]), mapping
        return thresholds.copy(), mapping
    out = []
    mapping = np.empty(m, dtype=np.int64)
    i = 0
    while i < m:
        if i < m - 1 and counts[i] == 0:
            j = i
            while j < m - 1 and counts[j] == 0:
                j += 1
            out.append(0.5 * (thresholds[i] + thresholds[j]))
            mapping[i : j + 1] = len(out) - 1
            i = j + 1
        else:
            out.append(thresholds[i])
            mapping[i] = len(out) - 1
            i += 1
    return np.array(out), mapping


@dataclass(frozen=True, order=True)
class MomentKey:
    """Monomial ``prod x_dim**power`` (canonical sorted pairs) times ``y**q``."""

    monomial: tuple
    q: int

    @staticmethod
    def make(powers: dict, q: int) -> "MomentKey":
        return MomentKey(tuple(sorted((k, p) for k, p in powers.items() if p)), q)

    def times(self, other: "MomentKey") -> "MomentKey":
        powers = dict(self.monomial)
        for k, p in other.monomial:
            powers[k] = powers.get(k, 0) + p
        return MomentKey.make(powers, self.q + other.q)

    @property
    def degree(self) -> int:
        return sum(p for _, p in self.monomial)

    def __str__(self):
        mono = "*".join(f"x{k + 1}^{p}" if p > 1 else f"x{k + 1}" for k, p in self.monomial) or "1"
        return mono + ("*y" if self.q else "")


ONE = MomentKey((), 0)


def kernel_monomials(d: int) -> list:
    """Monomials of the additive Epanechnikov expansion: ``1, x_k, x_k**2``."""
    keys = [ONE]
    for k in range(d):
        keys += [MomentKey(((k, 1),), 0), MomentKey(((k, 2),), 0)]
    return keys


def regression_monomials(d: int, degree: int, q: int) -> list:
    """Monomials of total degree at most ``degree`` (<= 2) times ``y**q``."""
    keys = [MomentKey((), q)]
    if degree >= 1:
        keys += [MomentKey(((a, 1),), q) for a in range(d)]
    if degree >= 2:
        for a, b in itertools.combinations_with_replacement(range(d), 2):
            keys.append(MomentKey.make({a: 2} if a == b else {a: 1, b: 1}, q))
    return keys


def enumerate_moment_keys(d: int, estimator: str = "loclin") -> list:
    """Distinct moment keys needed by ``estimator`` in dimension ``d``.

    ``kde`` needs the kernel monomials, ``nw`` adds them times ``y``, and
    ``loclin`` needs the kernel monomials times the regression monomials of
    its normal equations: degree 2 without ``y`` and degree 1 with ``y``.
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    kern = kernel_monomials(d)
    if estimator == "kde":
        regs = [ONE]
    elif estimator == "nw":
        regs = [ONE, MomentKey((), 1)]
    else:
        regs = regression_monomials(d, 2, 0) + regression_monomials(d, 1, 1)
    keys = {r.times(k) for r in regs for k in kern}
    return sorted(keys, key=lambda k: (k.q, k.degree, k.monomial))


def key_exponents(keys, d: int):
    """Exponent matrix ``(K, d)`` and output powers ``(K,)`` of ``keys``."""
    pw = np.zeros((len(keys), d), dtype=np.int64)
    qs = np.zeros(len(keys), dtype=np.int64)
    for i, key in enumerate(keys):
        for k, p in key.monomial:
            pw[i, k] = p
        qs[i] = key.q
    return pw, qs


def monomial_values(inputs, outputs, keys, exact=False):
    """Matrix ``(N, K)`` of every key's monomial evaluated at every sample point.

    With ``exact`` the products are formed in double-double and the pair
    ``(values, rounding_errors)`` is returned.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    n, d = x.shape
    pw, qs = key_exponents(keys, d)
    if exact:
        return _monomial_pairs(x, outputs, pw, qs)
    table = x[:, :, None] ** np.arange(pw.max(initial=0) + 1)[None, None, :]
    out = np.ones((n, len(keys)))
    for k in range(d):
        out *= table[:, k, pw[:, k]]
    if outputs is not None and qs.any():
        out[:, qs == 1] *= np.asarray(outputs, dtype=float)[:, None]
    return out


def _monomial_pairs(x, outputs, pw, qs):
    n, d = x.shape
    top = int(pw.max(initial=0))
    powers = []
    for k in range(d):
        col = [DD(np.ones(n))]
        for _ in range(top):
            col.append(col[-1] * x[:, k])
        powers.append(col)
    y = None if outputs is None else np.asarray(outputs, dtype=float)
    hi = np.empty((n, pw.shape[0]))
    lo = np.empty((n, pw.shape[0]))
    for j in range(pw.shape[0]):
        v = DD(np.ones(n))
        for k in range(d):
            if pw[j, k]:
                v = v * powers[k][pw[j, k]]
        if qs[j] and y is not None:
            v = v * y
        hi[:, j], lo[:, j] = v.hi, v.lo
    return hi, lo


@njit(cache=True)
def _accumulate(flat, x, y, pw, qs, nbox, compensated):
    """Per-box sums of every key's monomial; ``(sums, error_terms)``.

    Monomials are formed on the fly, in double-double when compensated.
    """
    n, d = x.shape
    nk = pw.shape[0]
    top = 0
    for j in range(nk):
        for k in range(d):
            top = max(top, pw[j, k])
    s = np.zeros((nbox, nk))
    c = np.zeros((nbox if compensated else 1, nk))
    ph = np.empty((d, top + 1))
    pl = np.zeros((d, top + 1))
    for i in range(n):
        b = flat[i]
        if b < 0:
            continue
        for k in range(d):
            ph[k, 0] = 1.0
            for p in range(1, top + 1):
                if compensated:
                    ph[k, p], pl[k, p] = dd_mul(ph[k, p - 1], pl[k, p - 1], x[i, k], 0.0)
                else:
                    ph[k, p] = ph[k, p - 1] * x[i, k]
        for j in range(nk):
            vh = 1.0
            vl = 0.0
            for k in range(d):
                p = pw[j, k]
                if p > 0:
                    if compensated:
                        vh, vl = dd_mul(vh, vl, ph[k, p], pl[k, p])
                    else:
                        vh *= ph[k, p]
            if qs[j] == 1:
                if compensated:
                    vh, vl = dd_mul(vh, vl, y[i], 0.0)
                else:
                    vh *= y[i]
            if compensated:
                s[b, j], c[b, j] = comp_add(s[b, j], c[b, j], vh)
                c[b, j] += vl
            else:
                s[b, j] += vh
    return s, c


@dataclass
class BoxSums:
    """Dense table ``(m_1 - 1, ..., m_d - 1, K)`` of per-box moment sums.

    With compensated accumulation ``table_lo`` holds the accumulated
    rounding errors, so each entry is exactly ``table + table_lo`` up to the
    error of the error term; it is ``None`` for plain sums.
    """

    table: np.ndarray
    keys: list
    table_lo: np.ndarray = None

    def totals(self) -> np.ndarray:
        return self.table if self.table_lo is None else self.table + self.table_lo

    def key_index(self, key: MomentKey) -> int:
        return self.keys.index(key)


def check_thresholds(inputs, partitions):
    """Raise :class:`ThresholdCollision` if a threshold equals a sample coordinate."""
    for k, part in enumerate(partitions):
        hit = np.isin(part.thresholds, inputs[:, k])
        if hit.any():
            raise ThresholdCollision(f"axis {k}: threshold {part.thresholds[hit][0]!r} equals a sample value")


def box_indices(inputs, partitions) -> np.ndarray:
    """Flat (C-order) box index of every sample point, ``-1`` if outside."""
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    flat = np.zeros(x.shape[0], dtype=np.int64)
    outside = np.zeros(x.shape[0], dtype=bool)
    for k, part in enumerate(partitions):
        b = part.bin(x[:, k])
        outside |= b < 0
        flat = flat * part.box_count + np.maximum(b, 0)
    flat[outside] = -1
    return flat


def precompute_box_sums(inputs, outputs, partitions, keys, policy="plain", monomial_inputs=None) -> BoxSums:
    """Sum every key's monomial over the sample points of every box.

    Parameters
    ----------
    inputs : (N, d) array_like
        Coordinates used for binning (same frame as the partitions).
    outputs : (N,) array_like or None
    partitions : sequence of AxisPartition
    keys : list of MomentKey
    policy : {"plain", "compensated"}
    monomial_inputs : (N, d) array_like, optional
        Coordinates the monomials are evaluated in, e.g. a centered and
        scaled copy of ``inputs``.  Defaults to ``inputs``.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    check_thresholds(x, partitions)
    flat = box_indices(x, partitions)
    source = x if monomial_inputs is None else np.atleast_2d(np.asarray(monomial_inputs, dtype=float))
    shape = tuple(p.box_count for p in partitions)
    return accumulate_box_sums(flat, shape, source, outputs, keys, is_compensated(policy))


def accumulate_box_sums(flat, shape, source, outputs, keys, compensated: bool) -> BoxSums:
    """Box sums from precomputed flat box indices (see :func:`box_indices`)."""
    pw, qs = key_exponents(keys, source.shape[1])
    if outputs is None and qs.any():
        raise ValueError("keys with an output power need outputs")
    y = np.zeros(source.shape[0]) if outputs is None else np.asarray(outputs, dtype=float)
    nbox = int(np.prod(shape))
    hi, lo = _accumulate(flat, np.ascontiguousarray(source), np.ascontiguousarray(y), pw, qs, nbox, compensated)
    full = tuple(shape) + (len(keys),)
    return BoxSums(hi.reshape(full), list(keys), lo.reshape(full) if compensated else None)
