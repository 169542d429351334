"""Timing and accuracy benchmark of the fast engine against the direct one.

Samples follow ``X ~ N(0, 0.6 I_d)`` and ``Y = f(X) + W`` with
``f(x) = sum(x) + exp(-16 sum(x)**2)`` and ``W ~ N(0, 0.7)`` (variances).
The grid has about as many nodes as there are sample points.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import asdict, dataclass

import numpy as np

from .pipeline import fast_smooth, prepare_grid, reference_smooth, relative_errors

X_VARIANCE = 0.6
NOISE_VARIANCE = 0.7


def normal_pairs(gen: np.random.Generator, size: int) -> np.ndarray:
    """Standard normals by the Box-Muller transform of uniform pairs."""
    half = (size + 1) // 2
    u1 = 1.0 - gen.random(half)  # in (0, 1], keeps the log finite
    u2 = gen.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
    return z[:size]


def regression_function(x) -> np.ndarray:
    s = np.sum(np.atleast_2d(x), axis=1)
    return s + np.exp(-16.0 * s * s)


def generate_sample(n: int, d: int, seed: int = 0):
    """Reproducible benchmark sample from a counter-based (Philox) generator."""
    gen = np.random.Generator(np.random.Philox(seed))
    x = np.sqrt(X_VARIANCE) * normal_pairs(gen, n * d).reshape(n, d)
    w = np.sqrt(NOISE_VARIANCE) * normal_pairs(gen, n)
    return x, regression_function(x) + w


@dataclass
class BenchRow:
    d: int
    n: int
    p: float
    fast_s: float
    naive_s: float
    worst: float
    worst_stable: float
    average: float
    average_stable: float
    fast_stable_s: float = float("nan")


@dataclass
class BenchReport:
    rows: list
    workers: int = 1

    def to_text(self) -> str:
        head = f"{'d':>2} {'N':>8} {'p':>5} {'fast (s)':>10} {'naive (s)':>10} {'worst':>9} {'worst stab':>10} {'avg':>9} {'avg stab':>9}"
        lines = [f"workers: {self.workers}", head]
        for r in self.rows:
            lines.append(
                f"{r.d:>2} {r.n:>8} {r.p:>5.2f} {r.fast_s:>10.4f} {r.naive_s:>10.3f} "
                f"{r.worst:>9.1E} {r.worst_stable:>10.1E} {r.average:>9.1E} {r.average_stable:>9.1E}"
            )
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        fields = list(BenchRow.__dataclass_fields__)
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in asdict(r).items()})
        return buf.getvalue()


def _timed(fn, repeats):
    best, out = np.inf, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_case(n: int, d: int, p: float = 0.15, seed: int = 0, estimators=("kde", "nw", "loclin"), engine="both", repeats: int = 1) -> BenchRow:
    """One benchmark row; times are the best of ``repeats`` runs."""
    x, y = generate_sample(n, d, seed)

    def fast(policy):
        setup = prepare_grid(x, p)
        return setup, fast_smooth(setup, y, "epanechnikov", policy, estimators)

    t_fast, (setup, plain) = _timed(lambda: fast("plain"), repeats)
    t_stab, (_, stable) = _timed(lambda: fast("compensated"), repeats)
    t_naive, worst, worst_s, avg, avg_s = float("nan"), float("nan"), float("nan"), float("nan"), float("nan")
    if engine in ("naive", "both"):
        t_naive, ref = _timed(lambda: reference_smooth(setup, y, "epanechnikov", estimators), 1)
        e_plain = relative_errors(plain, ref, estimators)
        e_stab = relative_errors(stable, ref, estimators)
        worst, avg = float(e_plain.max()), float(e_plain.mean())
        worst_s, avg_s = float(e_stab.max()), float(e_stab.mean())
    return BenchRow(d, n, p, t_fast, t_naive, worst, worst_s, avg, avg_s, t_stab)


def warm_up():
    """Compile every numba kernel once so timings exclude compilation."""
    for d in (1, 2):
        bench_case(200, d, 0.25, seed=1)


def run_bench(dims=(1,), sizes=(20000,), p: float = 0.15, seed: int = 0, estimators=("kde", "nw", "loclin"), engine="both", repeats: int = 1) -> BenchReport:
    warm_up()
    rows = [bench_case(n, d, p, seed, estimators, engine, repeats) for d in dims for n in sizes]
    # Both engines run single-threaded.
    return BenchReport(rows, workers=1)
