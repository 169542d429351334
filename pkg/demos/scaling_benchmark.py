"""Runtime scaling of the fast engine.

Doubling the sample should roughly double the fast engine's time, while the
direct evaluation grows with the product of sample and grid sizes.  The
fast time also barely depends on the bandwidth fraction.

Run with ``python3 demos/scaling_benchmark.py`` (about a minute).
"""

# %%
from kernsmooth.bench import bench_case, run_bench

# %%
# Fast engine only, d = 2, four doublings; best of three runs each.
report = run_bench(dims=(2,), sizes=(20000, 40000, 80000, 160000), engine="fast", repeats=3)
print(report.to_text())
times = [r.fast_s for r in report.rows]
print("doubling ratios:", ", ".join(f"{b / a:.2f}" for a, b in zip(times, times[1:])))

# %%
# Both engines at d = 1 for two bandwidth fractions.
for p in (0.15, 0.25):
    r = bench_case(20000, 1, p, repeats=3)
    print(
        f"p={p}: fast {r.fast_s * 1e3:.1f} ms, direct {r.naive_s:.2f} s, "
        f"speedup {r.naive_s / r.fast_s:.0f}x, worst error plain {r.worst:.1e} / stabilized {r.worst_stable:.1e}"
    )
