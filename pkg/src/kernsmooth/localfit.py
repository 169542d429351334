"""Locally linear fits from kernel-weighted moment sums.

The normal equations are formed about the evaluation point and scaled by
the bandwidth, so every entry is of order one, then factored by Cholesky
with a relative pivot test.  Double-double sums give double-double
entries, and the solution is then refined once against them.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .ddarith import DD
from .partition import MomentKey

# Cholesky pivots below this fraction of the entry's own magnitude count as singular.
PIVOT_RTOL = 1e-12


@njit(cache=True)
def solve_local_linear(a, b, mag):
    """Solutions of the batched symmetric systems ``a[m] beta = b[m]``.

    Cholesky with a relative pivot test: pivot ``k`` must exceed
    ``PIVOT_RTOL * mag[m, k]``.  Returns ``(beta, singular)``; rows that
    fail the test are NaN.
    """
    nm, p, _ = a.shape
    out = np.empty((nm, p))
    bad = np.zeros(nm, dtype=np.bool_)
    low = np.zeros((p, p))
    w = np.empty(p)
    beta = np.empty(p)
    for m in range(nm):
        ok = True
        for i in range(p):
            for j in range(i + 1):
                acc = a[m, i, j]
                for k in range(j):
                    acc -= low[i, k] * low[j, k]
                if i == j:
                    if not acc > PIVOT_RTOL * mag[m, i]:
                        ok = False
                        break
                    low[i, i] = np.sqrt(acc)
                else:
                    low[i, j] = acc / low[j, j]
            if not ok:
                break
        if not ok:
            bad[m] = True
            out[m, :] = np.nan
            continue
        for i in range(p):
            acc = b[m, i]
            for k in range(i):
                acc -= low[i, k] * w[k]
            w[i] = acc / low[i, i]
        for i in range(p - 1, -1, -1):
            acc = w[i]
            for k in range(i + 1, p):
                acc -= low[k, i] * beta[k]
            beta[i] = acc / low[i, i]
        out[m, :] = beta
    return out, bad


def local_linear_system(sums, z, h):
    """Centered, bandwidth-scaled normal equations from kernel sums.

    ``sums`` maps regression monomials to kernel sums; coordinates are
    shifted to ``z`` and divided by ``h`` so every entry is of order one.
    Returns ``(A, b, mag, exact)`` where ``mag`` bounds the terms that cancel
    in each diagonal entry and ``exact`` holds the unrounded double-double
    entries ``(A_entries, b_entries)`` when ``sums`` are double-double
    (``None`` otherwise).
    """
    z = np.atleast_2d(z)
    h = np.atleast_2d(h)
    m, d = z.shape
    p = d + 1

    def s(*dims, q=0):
        powers = {}
        for k in dims:
            powers[k] = powers.get(k, 0) + 1
        return sums[MomentKey.make(powers, q)]

    def v(x):
        return x.value() if isinstance(x, DD) else x

    s0, y0 = s(), s(q=1)
    ea = [[None] * p for _ in range(p)]
    eb = [None] * p
    ea[0][0], eb[0] = s0, y0
    for i in range(d):
        zi, hi = z[:, i], h[:, i]
        si = s(i)
        ea[0][i + 1] = ea[i + 1][0] = (si - s0 * zi) / hi
        eb[i + 1] = (s(i, q=1) - y0 * zi) / hi
        for j in range(i + 1):
            zj, hj, sj = z[:, j], h[:, j], s(j)
            # (x_i - z_i)(x_j - z_j) expanded; z_i z_j kept exact.
            centered = s(i, j) - sj * zi - si * zj + (s0 * zi) * zj
            ea[i + 1][j + 1] = ea[j + 1][i + 1] = centered / hi / hj
    a = np.empty((m, p, p))
    b = np.empty((m, p))
    mag = np.empty((m, p))
    for i in range(p):
        b[:, i] = v(eb[i])
        for j in range(p):
            a[:, i, j] = v(ea[i][j])
    mag[:, 0] = np.abs(a[:, 0, 0])
    for i in range(d):
        zi, hi = z[:, i], h[:, i]
        mag[:, i + 1] = (np.abs(v(s(i, i))) + 2.0 * np.abs(zi * v(s(i))) + zi * zi * np.abs(v(s0))) / hi**2
    exact = (ea, eb) if isinstance(s0, DD) else None
    return a, b, mag, exact


def refine_solution(a, beta, exact):
    """One step of iterative refinement with the residual in double-double."""
    ea, eb = exact
    p = beta.shape[1]
    r = np.empty_like(beta)
    for i in range(p):
        acc = eb[i]
        for j in range(p):
            acc = acc - ea[i][j] * beta[:, j]
        r[:, i] = acc.value()
    r[~np.isfinite(r)] = 0.0
    delta, _ = solve_local_linear(a, r, np.zeros_like(r))
    return beta + np.where(np.isfinite(delta), delta, 0.0)
