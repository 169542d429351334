"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
The 160000-point univariate benchmark is the slowest piece (a few minutes
of naive evaluation) and is shared by criteria 4 and 8.
"""

import math
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE
from numba import njit
from scipy.integrate import trapezoid

from kernsmooth.accumulator import comp_add
from kernsmooth.bandwidth import knn_bandwidth_1d
from kernsmooth.bench import bench_case, generate_sample, warm_up
from kernsmooth.partition import build_partition, enumerate_moment_keys, monomial_values, precompute_box_sums
from kernsmooth.pipeline import fast_smooth, prepare_grid
from kernsmooth.sliding1d import STATUS_OK

_ROWS = {}


def _row(n, d, p, engine="both", repeats=1):
    key = (n, d, p, engine, repeats)
    if key not in _ROWS:
        _ROWS[key] = bench_case(n, d, p, seed=0, engine=engine, repeats=repeats)
    return _ROWS[key]


def _verdict(label, passed, detail):
    ACCEPTANCE.append((label, bool(passed), detail))
    print(f"{'PASS' if passed else 'FAIL'} {label}: {detail}")
    assert passed, detail


@pytest.fixture(scope="module", autouse=True)
def _compiled():
    warm_up()


def test_oracle_equivalence():
    start = time.perf_counter()
    lines, ok = [], True
    for d in (1, 2, 3):
        for p in (0.15, 0.25):
            r = _row(20000, d, p)
            good = r.worst <= 1e-6 and r.worst_stable <= 1e-9 and r.average <= 1e-10
            ok &= good
            lines.append(f"d={d} p={p} worst={r.worst:.1e}/{r.worst_stable:.1e} avg={r.average:.1e}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 300
    _verdict("criterion 1 oracle equivalence", ok, f"{'; '.join(lines)}; {elapsed:.0f}s")


def test_scaling_law():
    sizes = (20000, 40000, 80000, 160000)
    times = [_row(n, 2, 0.15, engine="fast", repeats=5).fast_s for n in sizes]
    ratios = [b / a for a, b in zip(times, times[1:])]
    _verdict("criterion 2 scaling", max(ratios) <= 2.6, "ratios " + ", ".join(f"{q:.2f}" for q in ratios))


def test_speedup():
    r = _row(20000, 1, 0.15)
    speedup = r.naive_s / r.fast_s
    _verdict("criterion 3 speedup", speedup >= 50, f"{speedup:.0f}x (fast {r.fast_s:.4f}s, naive {r.naive_s:.1f}s)")


def test_bandwidth_independence():
    a, b = _row(160000, 1, 0.15, repeats=3), _row(160000, 1, 0.25, repeats=3)
    fast = max(a.fast_s, b.fast_s) / min(a.fast_s, b.fast_s) - 1.0
    naive = max(a.naive_s, b.naive_s) / min(a.naive_s, b.naive_s) - 1.0
    _verdict(
        "criterion 4 bandwidth independence",
        fast <= 0.25 and naive >= 0.30,
        f"fast differs {fast:.0%}, naive differs {naive:.0%}",
    )


def test_knn_exactness():
    rng = np.random.default_rng(500)
    bad = 0
    for _ in range(500):
        n = int(rng.integers(1, 300))
        x = np.sort(rng.permutation(10 * n)[:n] / 7.0 + rng.uniform(-1, 1))
        z = np.sort(rng.uniform(x[0] - 1, x[-1] + 1, int(rng.integers(1, 100))))
        k = int(rng.integers(1, n + 1))
        h = knn_bandwidth_1d(x, z, k).h
        counts = np.searchsorted(x, z + h) - np.searchsorted(x, z - h)
        monotone = np.all(np.diff(z - h) >= 0) and np.all(np.diff(z + h) >= 0)
        bad += int(np.any(counts != k) or not monotone)
    _verdict("criterion 5 knn exactness", bad == 0, f"{bad} of 500 instances wrong")


def test_box_identity():
    rng = np.random.default_rng(2025)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 4))
        n = int(rng.integers(50, 600))
        x = rng.normal(size=(n, d)) @ rng.normal(size=(d, d))
        y = rng.normal(size=n)
        setup = prepare_grid(x, float(rng.uniform(0.1, 0.4)), grid_size=int(rng.integers(5, 200)))
        parts = [build_partition(setup.grid.axes[k], setup.axis_bandwidths[k], setup.sorted_axes[k]) for k in range(d)]
        keys = enumerate_moment_keys(d, "loclin")
        xr = setup.rotated
        box = precompute_box_sums(xr, y, parts, keys, "compensated").totals()
        mono = monomial_values(xr, y, keys)
        for _ in range(5):
            j = [int(rng.integers(0, p.l_index.size)) for p in parts]
            sl = tuple(slice(p.l_index[i], p.r_index[i] + 1) for p, i in zip(parts, j))
            fast = box[sl].reshape(-1, len(keys)).sum(axis=0)
            inside = np.ones(n, dtype=bool)
            for k, (p, i) in enumerate(zip(parts, j)):
                inside &= (xr[:, k] >= p.lo[i]) & (xr[:, k] < p.hi[i])
            brute = np.array([math.fsum(mono[inside, q]) for q in range(len(keys))])
            scale = np.abs(mono[inside]).sum(axis=0)
            err = np.abs(fast - brute) / np.where(scale > 0, scale, 1.0)
            worst = max(worst, float(err.max()))
    _verdict("criterion 6 box-range identity", worst <= 1e-10, f"worst relative error {worst:.1e}")


def test_affine_exactness():
    worst, ok, lines = 0.0, True, []
    for d in (1, 2, 3):
        rng = np.random.default_rng(d)
        x = rng.normal(size=(4000, d))
        coef = rng.normal(size=d)
        y = 1.5 + x @ coef
        setup = prepare_grid(x, 0.2)
        pts = setup.frame.inverse(setup.points())
        lo, hi = np.quantile(x, 0.1, axis=0), np.quantile(x, 0.9, axis=0)
        for policy in ("plain", "compensated"):
            res = fast_smooth(setup, y, policy=policy)
            interior = np.all((pts > lo) & (pts < hi), axis=1) & (res.status == STATUS_OK)
            err = float(np.max(np.abs(res.loclin[interior] - (1.5 + pts[interior] @ coef))))
            ok &= interior.sum() > 20
            worst = max(worst, err)
        lines.append(f"d={d}")
    _verdict("criterion 7 affine exactness", ok and worst <= 1e-8, f"{', '.join(lines)}: max error {worst:.1e}")


@njit(cache=True)
def _sum_both(vals):
    s = c = plain = 0.0
    for v in vals:
        s, c = comp_add(s, c, v)
        plain += v
    return plain, s + c


def test_compensated_summation():
    rng = np.random.default_rng(8)
    big = 1e16 * rng.uniform(1, 2, 3333)
    small = rng.uniform(0.5, 1.5, 3334)
    # 3333 triples (big, small, -big) and a final small term: 10^4 terms.
    vals = np.append(np.stack([big, small[:-1], -big], axis=1).ravel(), small[-1])
    exact = math.fsum(vals)
    plain, comp = _sum_both(vals)
    e_plain = abs(plain - exact) / abs(exact)
    e_comp = abs(comp - exact) / abs(exact)
    rows = [_row(160000, 1, p, repeats=3) for p in (0.15, 0.25)]
    ratios = [r.worst / r.worst_stable for r in rows]
    _verdict(
        "criterion 8 compensated summation",
        e_plain >= 1e-6 and e_comp <= 1e-12 and min(ratios) >= 100,
        f"adversarial plain {e_plain:.1e} compensated {e_comp:.1e}; "
        + "; ".join(f"N=160000 p={r.p} plain {r.worst:.1e} stabilized {r.worst_stable:.1e}" for r in rows),
    )


def test_kde_plausibility():
    x, _ = generate_sample(10000, 1, seed=9)
    setup = prepare_grid(x, 0.15)
    res = fast_smooth(setup, None, estimators=("kde",))
    z = setup.points()[:, 0]
    area = float(trapezoid(res.density, z))
    _verdict(
        "criterion 9 kde plausibility",
        0.9 <= area <= 1.05 and np.all(res.density >= 0),
        f"integral {area:.4f}, min density {res.density.min():.1e}",
    )
