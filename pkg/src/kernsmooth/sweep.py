"""Multivariate sweep over the evaluation grid.

The per-box moment sums are collapsed one axis at a time.  Along axis 1 a
two-pointer window slides over the boxes: boxes entering the range of grid
coordinate ``j_1`` are added, boxes leaving it are subtracted.  The result,
one partial table per ``j_1``, is swept the same way along axis 2, and so
on.  After the last axis every grid point holds the moment sums over its
bandwidth box.  This is the nested per-level recurrence with each level's
state reset for every combination of outer indices, executed level by
level so each level runs as one compiled loop.

The additive Epanechnikov kernel then turns those box sums into kernel
weighted sums, from which the density, Nadaraya-Watson and locally linear
estimates follow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .accumulator import comp_add, dd_mul, is_compensated
from .ddarith import DD
from .partition import ONE, BoxSums, MomentKey, check_thresholds, key_exponents
from .localfit import local_linear_system, refine_solution, solve_local_linear
from .sliding1d import STATUS_EMPTY, STATUS_OK, STATUS_SINGULAR


@dataclass
class SmoothResultGrid:
    density: np.ndarray
    nw: np.ndarray
    loclin: np.ndarray
    status: np.ndarray


@njit(cache=True)
def slide_batch(src, src_lo, left, right, compensated):
    """Window sums along axis 1 of ``src`` (B, nbox, R) for ranges ``left..right``.

    Returns ``(out, out_lo)`` of shape ``(B, M, R)``.  Boxes are added before
    any are removed.  In compensated mode ``src_lo`` carries the error terms
    of the inputs (same shape as ``src``) and ``out_lo`` those of the
    outputs; otherwise both are ignored / zero-sized.
    """
    nb, nbox, r = src.shape
    m = left.shape[0]
    out = np.empty((nb, m, r))
    out_lo = np.zeros((nb, m, r)) if compensated else np.zeros((0, 0, 0))
    s = np.empty(r)
    c = np.empty(r)
    for b in range(nb):
        s[:] = 0.0
        c[:] = 0.0
        il = 0
        ir = 0
        for j in range(m):
            while ir <= right[j]:
                for k in range(r):
                    if compensated:
                        s[k], c[k] = comp_add(s[k], c[k], src[b, ir, k])
                        c[k] += src_lo[b, ir, k]
                    else:
                        s[k] += src[b, ir, k]
                ir += 1
            while il < left[j]:
                for k in range(r):
                    if compensated:
                        s[k], c[k] = comp_add(s[k], c[k], -src[b, il, k])
                        c[k] -= src_lo[b, il, k]
                    else:
                        s[k] -= src[b, il, k]
                il += 1
            for k in range(r):
                out[b, j, k] = s[k]
                if compensated:
                    out_lo[b, j, k] = c[k]
    return out, out_lo


def sweep_levels(box_sums: BoxSums, partitions, policy="plain"):
    """Yield ``(level, table, table_lo)`` after each axis has been swept.

    After level ``k`` (1-based) the table has shape
    ``(M_1, ..., M_k, m_{k+1} - 1, ..., m_d - 1, K)``: entry ``[j_1..j_k, l..]``
    is the sum of box sums over boxes ``L_{i,j_i}..R_{i,j_i}`` for ``i <= k``
    with the remaining box indices free.  ``table_lo`` holds the error terms
    in compensated mode and is ``None`` otherwise.
    """
    compensated = is_compensated(policy)
    hi = box_sums.table
    lo = box_sums.table_lo
    if compensated and lo is None:
        lo = np.zeros_like(hi)
    done = ()
    empty = np.zeros((0, 0, 0))
    for level, part in enumerate(partitions, start=1):
        rest = hi.shape[len(done) + 1 :]
        shape3 = (int(np.prod(done)) if done else 1, hi.shape[len(done)], int(np.prod(rest)))
        src = np.ascontiguousarray(hi.reshape(shape3))
        src_lo = np.ascontiguousarray(lo.reshape(shape3)) if compensated else empty
        out, out_lo = slide_batch(src, src_lo, part.l_index, part.r_index, compensated)
        done = done + (part.l_index.size,)
        hi = out.reshape(done + rest)
        lo = out_lo.reshape(done + rest) if compensated else None
        yield level, hi, lo


def sweep_sums(box_sums: BoxSums, partitions, policy="plain", visitor=None, pairs=False):
    """Moment sums over every grid point's bandwidth box.

    Returns an ``(M, K)`` array in lexicographic grid order, or the pair
    ``(sums, error_terms)`` when ``pairs`` is true (error terms are ``None``
    without compensation).  If ``visitor`` is given it is called as
    ``visitor(j, row)`` for every grid point.
    """
    hi, lo = box_sums.table, box_sums.table_lo
    for _, hi, lo in sweep_levels(box_sums, partitions, policy):
        pass
    k = len(box_sums.keys)
    hi = hi.reshape(-1, k)
    lo = None if lo is None else lo.reshape(-1, k)
    flat = hi if lo is None else hi + lo
    if visitor is not None:
        for j in range(flat.shape[0]):
            visitor(j, flat[j])
    return (hi, lo) if pairs else flat


@njit(cache=True)
def _point_monomials(x, y, i, pw, qs, ph, pl, vh, vl, compensated):
    """Every key's monomial at point ``i`` into ``vh`` (and ``vl`` when compensated)."""
    d = x.shape[1]
    top = ph.shape[1] - 1
    for k in range(d):
        ph[k, 0] = 1.0
        for p in range(1, top + 1):
            if compensated:
                ph[k, p], pl[k, p] = dd_mul(ph[k, p - 1], pl[k, p - 1], x[i, k], 0.0)
            else:
                ph[k, p] = ph[k, p - 1] * x[i, k]
    for j in range(pw.shape[0]):
        h = 1.0
        l = 0.0
        for k in range(d):
            p = pw[j, k]
            if p > 0:
                if compensated:
                    h, l = dd_mul(h, l, ph[k, p], pl[k, p])
                else:
                    h *= ph[k, p]
        if qs[j] == 1:
            if compensated:
                h, l = dd_mul(h, l, y[i], 0.0)
            else:
                h *= y[i]
        vh[j] = h
        vl[j] = l


@njit(cache=True)
def _stream_sweep(order, starts, rest, x, y, pw, qs, lefts, rights, offs, nboxes, ms, compensated):
    n, d = x.shape
    nk = pw.shape[0]
    top = 0
    for j in range(nk):
        for k in range(d):
            top = max(top, pw[j, k])
    nrest = 1
    mrest = 1
    for k in range(1, d):
        nrest *= nboxes[k]
        mrest *= ms[k]
    m1 = ms[0]
    out = np.empty((m1 * mrest, nk))
    out_lo = np.zeros((m1 * mrest, nk)) if compensated else np.zeros((0, nk))
    s = np.zeros((nrest, nk))
    c = np.zeros((nrest if compensated else 0, nk))
    ph = np.empty((d, top + 1))
    pl = np.zeros((d, top + 1))
    vh = np.empty(nk)
    vl = np.zeros(nk)
    empty = np.zeros((0, 0, 0))
    il = 0
    ir = 0
    for j1 in range(m1):
        while ir <= rights[j1]:
            for t in range(starts[ir], starts[ir + 1]):
                i = order[t]
                b = rest[i]
                _point_monomials(x, y, i, pw, qs, ph, pl, vh, vl, compensated)
                for q in range(nk):
                    if compensated:
                        s[b, q], c[b, q] = comp_add(s[b, q], c[b, q], vh[q])
                        c[b, q] += vl[q]
                    else:
                        s[b, q] += vh[q]
            ir += 1
        while il < lefts[j1]:
            for t in range(starts[il], starts[il + 1]):
                i = order[t]
                b = rest[i]
                _point_monomials(x, y, i, pw, qs, ph, pl, vh, vl, compensated)
                for q in range(nk):
                    if compensated:
                        s[b, q], c[b, q] = comp_add(s[b, q], c[b, q], -vh[q])
                        c[b, q] -= vl[q]
                    else:
                        s[b, q] -= vh[q]
            il += 1
        cur = s.reshape((1, nrest, nk))
        cur_lo = c.reshape((1, nrest, nk)) if compensated else empty
        done = 1
        width = nrest * nk
        for k in range(1, d):
            width //= nboxes[k]
            src = np.ascontiguousarray(cur).reshape((done, nboxes[k], width))
            src_lo = np.ascontiguousarray(cur_lo).reshape((done, nboxes[k], width)) if compensated else empty
            cur, cur_lo = slide_batch(src, src_lo, lefts[offs[k] : offs[k + 1]], rights[offs[k] : offs[k + 1]], compensated)
            done *= ms[k]
        out[j1 * mrest : (j1 + 1) * mrest] = cur.reshape((mrest, nk))
        if compensated:
            out_lo[j1 * mrest : (j1 + 1) * mrest] = cur_lo.reshape((mrest, nk))
    return out, out_lo


def streamed_moment_sums(inputs, outputs, partitions, keys, policy="plain", monomial_inputs=None):
    """Moment sums over every grid point's bandwidth box without a box table.

    Same sums as :func:`~kernsmooth.partition.precompute_box_sums` followed
    by :func:`sweep_sums` with ``pairs=True``.  Along axis 1 the sample
    points themselves, grouped by their axis-1 box, enter and leave the
    window; the state is one row of per-box sums over the remaining axes,
    which is swept along those axes for every grid coordinate ``j_1``.
    Memory is one such row plus the ``(M, K)`` result.

    Returns
    -------
    hi, lo : (M, K) arrays
        Sums and, in compensated mode, their error terms (``None`` otherwise).
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    check_thresholds(x, partitions)
    source = x if monomial_inputs is None else np.atleast_2d(np.asarray(monomial_inputs, dtype=float))
    pw, qs = key_exponents(keys, source.shape[1])
    if outputs is None and qs.any():
        raise ValueError("keys with an output power need outputs")
    y = np.zeros(x.shape[0]) if outputs is None else np.asarray(outputs, dtype=float)
    first = partitions[0].bin(x[:, 0])
    rest = np.zeros(x.shape[0], dtype=np.int64)
    for k, part in enumerate(partitions[1:], start=1):
        b = part.bin(x[:, k])
        rest = np.where(b < 0, -1, np.where(rest < 0, -1, rest * part.box_count + b))
    inside = (first >= 0) & (rest >= 0)
    order = np.flatnonzero(inside)[np.argsort(first[inside], kind="stable")]
    starts = np.zeros(partitions[0].box_count + 1, dtype=np.int64)
    starts[1:] = np.cumsum(np.bincount(first[inside], minlength=partitions[0].box_count))
    lefts = np.concatenate([p.l_index for p in partitions]).astype(np.int64)
    rights = np.concatenate([p.r_index for p in partitions]).astype(np.int64)
    offs = np.concatenate([[0], np.cumsum([p.l_index.size for p in partitions])]).astype(np.int64)
    nboxes = np.array([p.box_count for p in partitions], dtype=np.int64)
    ms = np.array([p.l_index.size for p in partitions], dtype=np.int64)
    compensated = is_compensated(policy)
    hi, lo = _stream_sweep(
        order, starts, rest, np.ascontiguousarray(source), np.ascontiguousarray(y),
        pw, qs, lefts, rights, offs, nboxes, ms, compensated,
    )
    return hi, (lo if compensated else None)


def _index(keys):
    return {k: i for i, k in enumerate(keys)}


def expand_kernel_sums(t_d, keys, z, h, n, regressors=None):
    """Additive Epanechnikov kernel sums from box moment sums.

    Parameters
    ----------
    t_d : (M, K) array or pair of arrays
        Box sums per grid point, columns ordered as ``keys``.  A pair
        ``(sums, error_terms)`` switches to double-double arithmetic and
        double-double results.
    keys : list of MomentKey
    z, h : (M, d) arrays
        Grid points and half-widths in the coordinates the monomials were
        taken in.
    n : int
        Sample size.
    regressors : list of MomentKey, optional
        Monomials ``r`` to carry through; defaults to every ``r`` for which
        all products ``r * {1, x_k, x_k**2}`` are available.

    Returns
    -------
    dict
        ``r -> (M,)`` array of ``3/(d 2**(d+1) n prod h) sum_i sum_k (1 - u_ik**2) r(x_i)``
        over the points in each box, with ``u_ik = (x_ik - z_k) / h_k``.
    """
    if isinstance(t_d, tuple):
        t_hi, t_lo = t_d
        if t_lo is None:
            t_lo = np.zeros_like(t_hi)

        def column(i):
            return DD.pair(t_hi[:, i], t_lo[:, i])

        dd = True
    else:
        t_hi = np.atleast_2d(t_d)

        def column(i):
            return t_hi[:, i]

        dd = False
    z = np.atleast_2d(np.asarray(z, dtype=float))
    h = np.atleast_2d(np.asarray(h, dtype=float))
    d = z.shape[1]
    col = _index(keys)
    if regressors is None:
        regressors = [
            r for r in keys if all(r.times(MomentKey.make({k: p}, 0)) in col for k in range(d) for p in (1, 2))
        ]
    pref = 3.0 / (d * 2.0 ** (d + 1) * n * np.prod(h, axis=1))
    if dd:
        # Coefficients 1/h^2, z/h^2 and 1 - z^2/h^2 in double-double.
        inv_h2 = [1.0 / (DD(h[:, k]) * h[:, k]) for k in range(d)]
        z_h2 = [inv_h2[k] * z[:, k] for k in range(d)]
        c0 = [1.0 - z_h2[k] * z[:, k] for k in range(d)]
    out = {}
    for r in regressors:
        t0 = column(col[r])
        acc = DD(np.zeros(t_hi.shape[0])) if dd else np.zeros(t_hi.shape[0])
        for k in range(d):
            t1 = column(col[r.times(MomentKey(((k, 1),), 0))])
            t2 = column(col[r.times(MomentKey(((k, 2),), 0))])
            if dd:
                acc = acc + (c0[k] * t0 + (z_h2[k] * t1) * 2.0 - inv_h2[k] * t2)
            else:
                zk, hk2 = z[:, k], h[:, k] ** 2
                acc += (1.0 - zk * zk / hk2) * t0 + (2.0 * zk / hk2) * t1 - t2 / hk2
        out[r] = acc * pref
    return out


def expansion_columns(keys, regressors, d: int) -> np.ndarray:
    """Columns of ``r``, ``r x_k`` and ``r x_k**2`` for every regressor, ``(R, d, 3)``."""
    col = _index(keys)
    out = np.empty((len(regressors), d, 3), dtype=np.int64)
    for a, r in enumerate(regressors):
        for k in range(d):
            out[a, k, 0] = col[r]
            out[a, k, 1] = col[r.times(MomentKey(((k, 1),), 0))]
            out[a, k, 2] = col[r.times(MomentKey(((k, 2),), 0))]
    return out


@njit(cache=True)
def expand_plain(t, cols, z, h, n):
    """Compiled plain-float :func:`expand_kernel_sums`; returns ``(M, R)``.

    Same operations in the same order as the array version, one grid
    point at a time.
    """
    m = t.shape[0]
    nr, d, _ = cols.shape
    out = np.empty((m, nr))
    base = d * 2.0 ** (d + 1) * n
    for j in range(m):
        ph = 1.0
        for k in range(d):
            ph *= h[j, k]
        pref = 3.0 / (base * ph)
        for a in range(nr):
            acc = 0.0
            for k in range(d):
                zk = z[j, k]
                hk2 = h[j, k] ** 2
                acc += (1.0 - zk * zk / hk2) * t[j, cols[a, k, 0]] + (2.0 * zk / hk2) * t[j, cols[a, k, 1]] - t[j, cols[a, k, 2]] / hk2
            out[j, a] = acc * pref
    return out


def system_indices(regressors, d: int):
    """Positions of the regressors used by the normal equations.

    Returns ``(one, y, lin (d,), lin_y (d,), quad (d, d))`` indexing into
    ``regressors``.
    """
    pos = _index(regressors)
    lin = np.array([pos[MomentKey(((k, 1),), 0)] for k in range(d)], dtype=np.int64)
    lin_y = np.array([pos[MomentKey(((k, 1),), 1)] for k in range(d)], dtype=np.int64)
    quad = np.empty((d, d), dtype=np.int64)
    for i in range(d):
        for j in range(d):
            quad[i, j] = pos[MomentKey.make({i: 2} if i == j else {i: 1, j: 1}, 0)]
    return pos[ONE], pos[MomentKey((), 1)], lin, lin_y, quad


@njit(cache=True)
def system_plain(s, one, yy, lin, lin_y, quad, z, h):
    """Compiled plain-float :func:`local_linear_system` from ``(M, R)`` kernel sums."""
    m = s.shape[0]
    d = z.shape[1]
    p = d + 1
    a = np.empty((m, p, p))
    b = np.empty((m, p))
    mag = np.empty((m, p))
    for j in range(m):
        s0 = s[j, one]
        y0 = s[j, yy]
        a[j, 0, 0] = s0
        b[j, 0] = y0
        mag[j, 0] = abs(s0)
        for i in range(d):
            zi = z[j, i]
            hi = h[j, i]
            si = s[j, lin[i]]
            v = (si - s0 * zi) / hi
            a[j, 0, i + 1] = v
            a[j, i + 1, 0] = v
            b[j, i + 1] = (s[j, lin_y[i]] - y0 * zi) / hi
            for k in range(i + 1):
                zk = z[j, k]
                sk = s[j, lin[k]]
                centered = s[j, quad[i, k]] - sk * zi - si * zk + (s0 * zi) * zk
                v = centered / hi / h[j, k]
                a[j, i + 1, k + 1] = v
                a[j, k + 1, i + 1] = v
            mag[j, i + 1] = (abs(s[j, quad[i, i]]) + 2.0 * abs(zi * si) + zi * zi * abs(s0)) / hi**2
    return a, b, mag


def assemble_smoothers(sums, z, h, counts, estimators=("kde", "nw", "loclin")) -> SmoothResultGrid:
    """Density, Nadaraya-Watson and locally linear estimates at every grid point.

    Parameters
    ----------
    sums : dict
        Kernel sums from :func:`expand_kernel_sums`, already carrying the
        ``1 / (n prod h)`` density prefactor.
    z, h : (M, d) arrays
        Grid points and half-widths in the monomial coordinates.
    counts : (M,) array
        Number of sample points in each bandwidth box.
    """
    vals = {k: (x.value() if isinstance(x, DD) else x) for k, x in sums.items()}
    system = None
    if "loclin" in estimators:
        system = local_linear_system(sums, z, h)
    ynum = vals.get(MomentKey((), 1))
    return _finish(vals[ONE], ynum, system, counts, estimators)


def assemble_plain(s, regressors, z, h, counts, estimators=("kde", "nw", "loclin")) -> SmoothResultGrid:
    """:func:`assemble_smoothers` for plain ``(M, R)`` kernel sums, compiled."""
    pos = _index(regressors)
    system = None
    if "loclin" in estimators:
        one, yy, lin, lin_y, quad = system_indices(regressors, z.shape[1])
        a, b, mag = system_plain(s, one, yy, lin, lin_y, quad, np.ascontiguousarray(z), np.ascontiguousarray(h))
        system = (a, b, mag, None)
    ynum = s[:, pos[MomentKey((), 1)]] if MomentKey((), 1) in pos else None
    return _finish(s[:, pos[ONE]], ynum, system, counts, estimators)


def _finish(mass, ynum, system, counts, estimators) -> SmoothResultGrid:
    m = mass.shape[0]
    empty = (np.asarray(counts) == 0) | ~(mass > 0)
    density = np.where(empty, 0.0, np.maximum(mass, 0.0))
    nw = np.full(m, np.nan)
    loclin = np.full(m, np.nan)
    status = np.full(m, STATUS_OK, dtype=np.int8)
    if "nw" in estimators or "loclin" in estimators:
        with np.errstate(divide="ignore", invalid="ignore"):
            nw = np.where(empty, np.nan, ynum / mass)
    if system is not None:
        a, b, mag, exact = system
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            beta, singular = solve_local_linear(a, b, mag)
            if exact is not None:
                beta = refine_solution(a, beta, exact)
        est = beta[:, 0]
        singular &= ~empty
        loclin = np.where(singular, nw, est)
        loclin[empty] = np.nan
        status[singular] = STATUS_SINGULAR
    status[empty] = STATUS_EMPTY
    return SmoothResultGrid(density, nw, loclin, status)
