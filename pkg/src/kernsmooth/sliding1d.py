"""Fast univariate kernel smoothing by sliding-window sum updating.

Sample and evaluation points are sorted once.  Window sums of the monomials
``x**p * y**q`` are then carried from one evaluation point to the next with
two pointers: points entering on the right are added, points leaving on the
left are subtracted, so each sample point is touched at most twice per
pointer.  Kernel-weighted sums follow from the window sums through the
kernel's source/target split (:func:`kernsmooth.kernels.decompose`), which
gives the density, Nadaraya-Watson and locally linear estimates at every
evaluation point in ``O(M + N)`` after sorting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .accumulator import comp_add, dd_mul, is_compensated, make_accumulator
from .errors import MonotonicityViolation, NonPositiveBandwidth, UnsupportedFastKernel
from .kernels import KernelKind, decompose, source_values
from .ddarith import DD
from .localfit import PIVOT_RTOL, local_linear_system, refine_solution, solve_local_linear
from .partition import MomentKey

STATUS_OK = 0
STATUS_EMPTY = 1
STATUS_SINGULAR = 2
STATUS_NAMES = {STATUS_OK: "ok", STATUS_EMPTY: "empty_window", STATUS_SINGULAR: "singular_fallback"}

# exp(x / h) stays finite for |x / h| below this.
_EXP_LIMIT = 700.0
# Bound on ((|z - c| + h) / h)**degree, the factor by which the source/target
# expansion about a center c can amplify rounding errors.
MAX_GROWTH = 30.0
_FACTOR_CODES = {"one": 0, "cos": 1, "sin": 2}


@dataclass
class SortedSample1D:
    x: np.ndarray
    y: np.ndarray = None

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=float)
        if self.x.ndim != 1:
            raise ValueError("x must be one-dimensional")
        if self.y is None:
            self.y = np.zeros_like(self.x)
        else:
            self.y = np.ascontiguousarray(self.y, dtype=float)
        if self.y.shape != self.x.shape:
            raise ValueError("x and y must have the same length")
        if np.any(np.diff(self.x) < 0):
            raise MonotonicityViolation("sample x must be sorted in nondecreasing order")

    @classmethod
    def from_unsorted(cls, x, y=None) -> "SortedSample1D":
        x = np.asarray(x, dtype=float)
        order = np.argsort(x, kind="stable")
        return cls(x[order], None if y is None else np.asarray(y, dtype=float)[order])

    def __len__(self):
        return self.x.size


@dataclass
class SmoothResult1D:
    density: np.ndarray
    nw: np.ndarray
    loclin: np.ndarray
    status: np.ndarray


class WindowMoments:
    """Window sums ``sum_{iL <= i < iR} x_i**p1 * y_i**p2`` for ``p1 <= 4, p2 <= 1``.

    A direct transcription of the univariate updating loop, one accumulator
    per table cell.  ``iR`` is exclusive (0-based), ``iL`` inclusive.
    """

    P1 = 5
    P2 = 2

    def __init__(self, policy="plain"):
        self.policy = policy
        self.s = [[make_accumulator(policy) for _ in range(self.P2)] for _ in range(self.P1)]
        self.iL = 0
        self.iR = 0
        self.left = -np.inf
        self.right = -np.inf

    def _apply(self, sample: SortedSample1D, i: int, sign: float):
        xi, yi = sample.x[i], sample.y[i]
        for p1 in range(self.P1):
            xp = xi**p1
            for p2 in range(self.P2):
                self.s[p1][p2].add(sign * xp * yi**p2)

    def update(self, sample: SortedSample1D, left: float, right: float) -> "WindowMoments":
        if left < self.left or right < self.right:
            raise MonotonicityViolation("window bounds must not move backwards")
        n = len(sample)
        while self.iR < n and sample.x[self.iR] < right:
            self._apply(sample, self.iR, 1.0)
            self.iR += 1
        while self.iL < n and sample.x[self.iL] < left:
            self._apply(sample, self.iL, -1.0)
            self.iL += 1
        self.left, self.right = left, right
        return self

    def total(self, p1: int, p2: int) -> float:
        return self.s[p1][p2].total()

    def table(self) -> np.ndarray:
        return np.array([[self.total(p1, p2) for p2 in range(self.P2)] for p1 in range(self.P1)])


def window_update(moments: WindowMoments, sample: SortedSample1D, left: float, right: float) -> WindowMoments:
    """Advance ``moments`` to the half-open window ``[left, right)``."""
    return moments.update(sample, left, right)


@njit(cache=True)
def window_sums(x, vals, lo, hi, compensated):
    """Sums of ``vals`` rows over ``{i : lo[m] <= x[i] < hi[m]}`` for every ``m``.

    ``x`` sorted, ``lo`` and ``hi`` nondecreasing.  Additions happen before
    removals at every step.
    """
    n, k = vals.shape
    m_count = lo.shape[0]
    out = np.empty((m_count, k))
    s = np.zeros(k)
    c = np.zeros(k)
    il = 0
    ir = 0
    for m in range(m_count):
        while ir < n and x[ir] < hi[m]:
            for j in range(k):
                if compensated:
                    s[j], c[j] = comp_add(s[j], c[j], vals[ir, j])
                else:
                    s[j] += vals[ir, j]
            ir += 1
        while il < n and x[il] < lo[m]:
            for j in range(k):
                if compensated:
                    s[j], c[j] = comp_add(s[j], c[j], -vals[il, j])
                else:
                    s[j] -= vals[il, j]
            il += 1
        for j in range(k):
            out[m, j] = s[j] + c[j]
    return out


@njit(cache=True)
def suffix_sums(x, vals, lo, compensated):
    """Sums of ``vals`` rows over ``{i : x[i] >= lo[m]}``, built right to left."""
    n, k = vals.shape
    m_count = lo.shape[0]
    out = np.empty((m_count, k))
    s = np.zeros(k)
    c = np.zeros(k)
    i = n - 1
    for m in range(m_count - 1, -1, -1):
        while i >= 0 and x[i] >= lo[m]:
            for j in range(k):
                if compensated:
                    s[j], c[j] = comp_add(s[j], c[j], vals[i, j])
                else:
                    s[j] += vals[i, j]
            i -= 1
        for j in range(k):
            out[m, j] = s[j] + c[j]
    return out


@njit(cache=True)
def expansion_blocks(z, h, reach):
    """Split sorted evaluation points into runs with ``z[m] - z[start] <= reach * h[m]``.

    Returns the start index of every run followed by ``len(z)``.
    """
    m_count = z.shape[0]
    starts = np.empty(m_count + 1, dtype=np.int64)
    nb = 0
    m0 = 0
    for m in range(m_count):
        if m == 0 or z[m] - z[m0] > reach * h[m]:
            starts[nb] = m
            nb += 1
            m0 = m
    starts[nb] = m_count
    return starts[: nb + 1]


@njit(cache=True)
def blocked_window_sums(x, y, lo, hi, starts, centers, scales, pmax, factor, hv, compensated):
    """Window sums of ``t**p * y**q * f(t)``, ``t = (x - c) / s``, restarted per block.

    Block ``b`` covers evaluation points ``starts[b] .. starts[b + 1] - 1``
    and uses center ``centers[b]`` and scale ``scales[b]``; its windows are
    ``[lo[m], hi[m])``.  ``f`` is 1, ``cos(pi t / 2 hv[b])`` or
    ``sin(pi t / 2 hv[b])`` for ``factor`` 0, 1, 2.

    Returns ``(sums, error_terms)``, each ``(M, 2, pmax + 1)``.  When
    compensated the powers are formed in double-double and the exact sum
    is ``sums + error_terms``; otherwise ``error_terms`` is empty.
    """
    n = x.shape[0]
    m_count = lo.shape[0]
    k = pmax + 1
    out = np.empty((m_count, 2, k))
    out_lo = np.zeros((m_count if compensated else 0, 2, k))
    s = np.empty(2 * k)
    c = np.empty(2 * k)
    vh = np.empty(2 * k)
    vl = np.zeros(2 * k)
    for b in range(starts.shape[0] - 1):
        cen = centers[b]
        sc = scales[b]
        s[:] = 0.0
        c[:] = 0.0
        il = np.searchsorted(x, lo[starts[b]])
        ir = il
        for m in range(starts[b], starts[b + 1]):
            while ir < n and x[ir] < hi[m]:
                _point_values(x[ir], y[ir], cen, sc, factor, hv[b], vh, vl, compensated)
                for j in range(2 * k):
                    if compensated:
                        s[j], c[j] = comp_add(s[j], c[j], vh[j])
                        c[j] += vl[j]
                    else:
                        s[j] += vh[j]
                ir += 1
            while il < ir and x[il] < lo[m]:
                _point_values(x[il], y[il], cen, sc, factor, hv[b], vh, vl, compensated)
                for j in range(2 * k):
                    if compensated:
                        s[j], c[j] = comp_add(s[j], c[j], -vh[j])
                        c[j] -= vl[j]
                    else:
                        s[j] -= vh[j]
                il += 1
            for q in range(2):
                for p in range(k):
                    out[m, q, p] = s[q * k + p]
                    if compensated:
                        out_lo[m, q, p] = c[q * k + p]
    return out, out_lo


@njit(cache=True, inline="always")
def _point_values(xi, yi, cen, sc, factor, hv, vh, vl, compensated):
    k = vh.shape[0] // 2
    t = (xi - cen) / sc
    fh = 1.0
    if factor == 1:
        fh = np.cos(0.5 * np.pi * t / hv)
    elif factor == 2:
        fh = np.sin(0.5 * np.pi * t / hv)
    fl = 0.0
    for p in range(k):
        vh[p] = fh
        if compensated:
            vl[p] = fl
            vh[k + p], vl[k + p] = dd_mul(fh, fl, yi, 0.0)
            fh, fl = dd_mul(fh, fl, t, 0.0)
        else:
            vh[k + p] = fh * yi
            fh *= t


def _check_inputs(z, h, kind, needs_window):
    if np.any(~(h > 0)):
        raise NonPositiveBandwidth("all bandwidths must be positive")
    if np.any(np.diff(z) < 0):
        raise MonotonicityViolation("evaluation points must be sorted in nondecreasing order")
    if needs_window and (np.any(np.diff(z - h) < 0) or np.any(np.diff(z + h) < 0)):
        raise MonotonicityViolation("z - h and z + h must both be nondecreasing")
    if not decompose(kind).supports_balloon and h.size and np.any(h != h[0]):
        raise UnsupportedFastKernel(
            f"the {kind.value} fast path needs one constant bandwidth, not balloon bandwidths"
        )


def solve_loclin_1d(sk, zn, scale=None):
    """Locally linear fit at ``zn`` from kernel sums ``sk[..., r, q]`` (r <= 2, q <= 1).

    Returns ``(estimate, singular)``.  The 2x2 system is centered at ``zn``
    and factored by Cholesky; a second pivot smaller than ``PIVOT_RTOL``
    times the magnitude of the terms it was computed from is singular.
    """
    s0, s1, s2 = sk[:, 0, 0], sk[:, 1, 0], sk[:, 2, 0]
    t0, t1 = sk[:, 0, 1], sk[:, 1, 1]
    a11 = s1 - zn * s0
    a22 = s2 - 2.0 * zn * s1 + zn * zn * s0
    b1 = t1 - zn * t0
    with np.errstate(divide="ignore", invalid="ignore"):
        l21 = a11 / s0
        piv = a22 - l21 * a11
        mag = np.abs(s2) + 2.0 * np.abs(zn * s1) + zn * zn * np.abs(s0)
        if scale is not None:
            mag = np.maximum(mag, scale)
        singular = ~(piv > PIVOT_RTOL * mag) | ~(s0 > 0)
        beta = (b1 - l21 * t0) / piv
        alpha = t0 / s0 - l21 * beta
    return alpha, singular


def assemble_1d(sk, zn, counts, n, h, hn=None):
    """Density, Nadaraya-Watson and locally linear estimates from kernel sums.

    Double-double ``sk`` (with local half-widths ``hn``) is solved through
    the shared normal equations with one refinement step.
    """
    exact = isinstance(sk, DD)
    mass = sk[:, 0, 0].value() if exact else sk[:, 0, 0]
    empty = (counts == 0) | ~(mass > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        density = np.where(empty, 0.0, mass / (n * h))
        if exact:
            nw = np.where(empty, np.nan, (sk[:, 0, 1] / sk[:, 0, 0]).value())
            loclin, singular = _solve_exact_1d(sk, zn, hn)
        else:
            nw = np.where(empty, np.nan, sk[:, 0, 1] / mass)
    if not exact:
        loclin, singular = solve_loclin_1d(sk, zn)
    status = np.full(mass.shape, STATUS_OK, dtype=np.int8)
    singular &= ~empty
    loclin = np.where(singular, nw, loclin)
    loclin = np.where(empty, np.nan, loclin)
    status[singular] = STATUS_SINGULAR
    status[empty] = STATUS_EMPTY
    return SmoothResult1D(np.maximum(density, 0.0), nw, loclin, status)


def _solve_exact_1d(sk, zn, hn):
    sums = {MomentKey.make({0: r}, q): sk[:, r, q] for r in range(3) for q in range(2) if r + q <= 2}
    with np.errstate(over="ignore"):
        a, b, mag, exact = local_linear_system(sums, zn[:, None], hn[:, None])
        beta, singular = solve_local_linear(a, b, mag)
        beta = refine_solution(a, beta, exact)
    return beta[:, 0], singular


def kernel_sums_1d(sample: SortedSample1D, z, h, kind, policy, center=0.0, scale=1.0):
    """Kernel-weighted sums ``sum_i K((x_i - z)/h) xn_i**r y_i**q`` for ``r <= 2, q <= 1``.

    ``xn = (x - center) / scale`` are the normalized coordinates the sums are
    taken in; window membership is always decided on the raw ``x``.
    Returns an array of shape ``(M, 3, 2)``.
    """
    kind = KernelKind.parse(kind)
    dec = decompose(kind)
    compensated = is_compensated(policy)
    x, y = sample.x, sample.y
    xn = (x - center) / scale
    zn = (z - center) / scale
    hn = h / scale
    lo, hi = z - h, z + h
    pmax = dec.max_source_power + 2
    powers = xn[:, None] ** np.arange(pmax + 1)[None, :]
    base = np.concatenate([powers, powers * y[:, None]], axis=1)

    if not dec.supports_balloon:
        h0 = float(hn[0]) if hn.size else 1.0
        if kind is KernelKind.LAPLACIAN and xn.size and np.max(np.abs(xn)) / h0 > _EXP_LIMIT:
            raise ValueError("bandwidth too small for the Laplacian fast path (exp overflow)")

    sums = {}
    for piece, factor in dec.source_keys():
        hv = float(hn[0]) if factor != "one" else 1.0
        vals = base * source_values(factor, xn, hv)[:, None]
        vals = np.ascontiguousarray(vals)
        if piece == "window":
            w = window_sums(x, vals, lo, hi, compensated)
        elif piece == "left":
            w = window_sums(x, vals, lo, z, compensated)
        elif piece == "right":
            w = window_sums(x, vals, z, hi, compensated)
        elif piece == "below":
            w = window_sums(x, vals, np.full_like(z, -np.inf), z, compensated)
        else:
            w = suffix_sums(x, vals, z, compensated)
        sums[piece, factor] = w.reshape(-1, 2, pmax + 1)

    sk = np.zeros((z.size, 3, 2))
    for term in dec.terms:
        coef = np.broadcast_to(term.target_factor(zn, hn), zn.shape)
        w = sums[term.piece, term.source_factor]
        for r in range(3):
            sk[:, r, :] += coef[:, None] * w[:, :, term.source_power + r]
    return sk


def local_kernel_sums_1d(sample: SortedSample1D, z, h, kind, policy):
    """Kernel sums like :func:`kernel_sums_1d` with the expansion re-centered per block.

    Consecutive evaluation points share a center ``c`` (the first point of
    the block) and scale (its half-width) while ``(z - c + h) / h`` keeps the
    expansion's error growth below ``MAX_GROWTH``; each block restarts its
    window sums.  Windows of a block overlap, so the total work stays
    ``O(M + N)``.  Only kernels whose pieces are bounded windows qualify.

    Returns ``(sk, zn, hn)`` with ``zn`` and ``hn`` the evaluation points
    and half-widths in the local coordinates of their block.  Under the
    compensated policy ``sk`` is a double-double array.
    """
    kind = KernelKind.parse(kind)
    dec = decompose(kind)
    compensated = is_compensated(policy)
    degree = dec.max_source_power + 2
    reach = MAX_GROWTH ** (1.0 / degree) - 1.0
    starts = expansion_blocks(z, h, reach)
    first = starts[:-1]
    centers = z[first]
    scales = h[first]
    block_of = np.repeat(np.arange(first.size), np.diff(starts))
    zn = (z - centers[block_of]) / scales[block_of]
    hn = h / scales[block_of]
    # Constant-width kernels only: the source factor's width in block units.
    hv = h[first] / scales
    bounds = {"window": (z - h, z + h), "left": (z - h, z), "right": (z, z + h)}
    sums = {}
    for piece, factor in dec.source_keys():
        lo, hi = bounds[piece]
        sums[piece, factor] = blocked_window_sums(
            sample.x, sample.y, lo, hi, starts, centers, scales,
            dec.max_source_power + 2, _FACTOR_CODES[factor], hv, compensated,
        )
    if not compensated:
        sk = np.zeros((z.size, 3, 2))
        for term in dec.terms:
            coef = np.broadcast_to(term.target_factor(zn, hn), zn.shape)
            w = sums[term.piece, term.source_factor][0]
            for r in range(3):
                sk[:, r, :] += coef[:, None] * w[:, :, term.source_power + r]
        return sk, zn, hn
    # Double-double expansion: its terms cancel by up to MAX_GROWTH.
    zd, hd = DD(zn), DD(hn)
    acc = [DD(np.zeros((z.size, 2))) for _ in range(3)]
    for term in dec.terms:
        if dec.polynomial_targets:
            coef = term.target_factor(zd, hd)
        else:
            coef = DD(np.broadcast_to(term.target_factor(zn, hn), zn.shape))
        w = DD.pair(*sums[term.piece, term.source_factor])
        for r in range(3):
            acc[r] = acc[r] + coef[:, None] * w[:, :, term.source_power + r]
    sk = DD(np.stack([a.hi for a in acc], axis=1), np.stack([a.lo for a in acc], axis=1))
    return sk, zn, hn


def window_counts(x, lo, hi):
    return np.searchsorted(x, hi, side="left") - np.searchsorted(x, lo, side="left")


def smooth1d(
    sample: SortedSample1D, z, h, kind="epanechnikov", policy="plain", normalize=True, recenter=None
) -> SmoothResult1D:
    """Kernel density, Nadaraya-Watson and locally linear estimates at ``z``.

    Parameters
    ----------
    sample : SortedSample1D
        Sorted inputs and their outputs.
    z : array_like
        Nondecreasing evaluation points.
    h : array_like or float
        Positive half-widths, one per evaluation point, with ``z - h`` and
        ``z + h`` nondecreasing.  Cosine and Laplacian need a constant value.
    kind : KernelKind or str
        Any fast-decomposable kernel.
    policy : {"plain", "compensated"}
        Accumulator used for the running sums.
    normalize : bool
        Center and scale the sample before summation (estimates are
        unchanged in exact arithmetic, rounding is reduced).
    recenter : bool, optional
        With ``normalize``, re-center the expansion per block of evaluation
        points (:func:`local_kernel_sums_1d`) instead of once at the sample
        mean.  Defaults to on for the compensated policy and off for plain.
        Ignored for the Laplacian.

    Returns
    -------
    SmoothResult1D
    """
    kind = KernelKind.parse(kind)
    z = np.ascontiguousarray(z, dtype=float)
    h = np.ascontiguousarray(np.broadcast_to(np.asarray(h, dtype=float), z.shape))
    dec = decompose(kind)
    _check_inputs(z, h, kind, needs_window=any(p in ("window", "left", "right") for p in dec.pieces))

    n = len(sample)
    windowed = all(p in ("window", "left", "right") for p in dec.pieces)
    if recenter is None:
        recenter = is_compensated(policy)
    if normalize and recenter and windowed and n:
        sk, zn, hn = local_kernel_sums_1d(sample, z, h, kind, policy)
    else:
        center, scale = 0.0, 1.0
        if normalize and n:
            center = float(np.mean(sample.x))
            spread = float(np.std(sample.x))
            scale = spread if spread > 0 else 1.0
        sk = kernel_sums_1d(sample, z, h, kind, policy, center, scale)
        zn = (z - center) / scale
        hn = h / scale
    if kind.finite_support:
        counts = window_counts(sample.x, z - h, z + h)
    else:
        counts = np.full(z.shape, n)
    return assemble_1d(sk, zn, counts, n, h, hn)
