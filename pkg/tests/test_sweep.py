"""Grid sweep, kernel expansion and smoother assembly."""

import math

import numpy as np
import pytest

from kernsmooth.bandwidth import knn_bandwidth_1d
from kernsmooth.bench import generate_sample
from kernsmooth.frame import EvalGrid
from kernsmooth.partition import (
    ONE,
    MomentKey,
    build_partition,
    enumerate_moment_keys,
    monomial_values,
    precompute_box_sums,
)
from kernsmooth.pipeline import fast_smooth, prepare_grid, reference_smooth, relative_errors
from kernsmooth.sliding1d import STATUS_EMPTY, STATUS_OK, window_sums
from kernsmooth.sweep import (
    assemble_smoothers,
    expand_kernel_sums,
    expand_plain,
    expansion_columns,
    local_linear_system,
    streamed_moment_sums,
    sweep_levels,
    sweep_sums,
    system_indices,
    system_plain,
)

NAMES = ("density", "nw", "loclin")


def _partitions(setup):
    return [build_partition(setup.grid.axes[k], setup.axis_bandwidths[k], setup.sorted_axes[k]) for k in range(setup.d)]


def _setup(n, d, p=0.2, seed=0, rotate=True, grid_size=None):
    x, y = generate_sample(n, d, seed)
    return prepare_grid(x, p, grid_size, rotate), x, y


def _max_rel(a, b):
    ok = np.isfinite(a) & np.isfinite(b) & (b != 0)
    return float(np.max(np.abs(a[ok] - b[ok]) / np.abs(b[ok]), initial=0.0))


def _brute_box(setup, j):
    """Points inside the bandwidth box of grid node ``j`` (flat index)."""
    z, h = setup.points()[j], setup.bandwidths()[j]
    x = setup.rotated
    return np.all((x >= z - h) & (x < z + h), axis=1)


class TestSweepSums:
    @pytest.mark.parametrize("d", [2, 3])
    @pytest.mark.parametrize("policy", ["plain", "compensated"])
    def test_level_invariant(self, d, policy):
        setup, _, y = _setup(400, d, 0.3, seed=d, grid_size=150)
        parts = _partitions(setup)
        keys = enumerate_moment_keys(d, "nw")
        box = precompute_box_sums(setup.rotated, y, parts, keys, policy)
        mono = monomial_values(setup.rotated, y, keys)
        x = setup.rotated
        rng = np.random.default_rng(d)
        for level, hi, lo in sweep_levels(box, parts, policy):
            table = hi if lo is None else hi + lo
            for _ in range(20):
                pos = [int(rng.integers(0, s)) for s in table.shape[:-1]]
                inside = np.ones(x.shape[0], dtype=bool)
                for k, part in enumerate(parts):
                    if k < level:
                        inside &= (x[:, k] >= part.lo[pos[k]]) & (x[:, k] < part.hi[pos[k]])
                    else:
                        t = part.thresholds
                        inside &= (x[:, k] >= t[pos[k]]) & (x[:, k] < t[pos[k] + 1])
                brute = np.array([math.fsum(mono[inside, q]) for q in range(len(keys))])
                scale = np.abs(mono[inside]).sum(axis=0) + 1e-300
                assert np.all(np.abs(table[tuple(pos)] - brute) <= 1e-10 * scale)

    @pytest.mark.parametrize("policy", ["plain", "compensated"])
    def test_one_dimension_matches_sliding_window(self, policy):
        setup, _, y = _setup(2000, 1, 0.15, seed=1)
        x = setup.rotated
        keys = enumerate_moment_keys(1, "loclin")
        parts = _partitions(setup)
        swept = sweep_sums(precompute_box_sums(x, y, parts, keys, policy), parts, policy)
        order = np.argsort(x[:, 0])
        vals = monomial_values(x[order], y[order], keys)
        z, h = setup.grid.axes[0], setup.axis_bandwidths[0]
        slid = window_sums(x[order, 0], vals, z - h, z + h, policy == "compensated")
        scale = np.abs(vals).sum(axis=0)
        assert np.all(np.abs(swept - slid) <= 1e-11 * (np.abs(slid) + scale))

    def test_figure_four_counts(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            x = rng.uniform(size=(4, 2))
            axes = [np.sort(x[:, k]) for k in range(2)]
            hs = [knn_bandwidth_1d(a, a, 2).h for a in axes]
            parts = [build_partition(axes[k], hs[k], axes[k]) for k in range(2)]
            counts = sweep_sums(precompute_box_sums(x, None, parts, [ONE]), parts)[:, 0]
            grid = EvalGrid(axes)
            z = grid.points()
            h = np.stack([m.ravel() for m in np.meshgrid(*hs, indexing="ij")], axis=1)
            brute = [np.sum(np.all((x >= z[j] - h[j]) & (x < z[j] + h[j]), axis=1)) for j in range(16)]
            np.testing.assert_array_equal(counts, brute)

    def test_full_domain_gives_global_sums(self):
        setup, _, y = _setup(300, 2, seed=2)
        x = setup.rotated
        keys = enumerate_moment_keys(2, "loclin")
        wide = []
        for k in range(2):
            z = setup.grid.axes[k]
            wide.append(build_partition(z, np.full(z.size, 100.0), setup.sorted_axes[k]))
        t = sweep_sums(precompute_box_sums(x, y, wide, keys, "compensated"), wide, "compensated")
        glob = [math.fsum(c) for c in monomial_values(x, y, keys).T]
        np.testing.assert_allclose(t, np.broadcast_to(glob, t.shape), rtol=1e-13, atol=1e-13)

    def test_visitor_in_lexicographic_order(self):
        setup, _, y = _setup(200, 2, seed=3, grid_size=30)
        parts = _partitions(setup)
        seen = []
        out = sweep_sums(precompute_box_sums(setup.rotated, y, parts, [ONE]), parts, visitor=lambda j, row: seen.append((j, row[0])))
        assert [j for j, _ in seen] == list(range(setup.grid.size))
        np.testing.assert_array_equal([c for _, c in seen], out[:, 0])

    @pytest.mark.parametrize("d", [1, 2, 3])
    @pytest.mark.parametrize("policy", ["plain", "compensated"])
    def test_streamed_equals_box_table(self, d, policy):
        setup, _, y = _setup(1500, d, 0.2, seed=10 + d)
        x = setup.rotated
        xn = (x - x.mean(axis=0)) / 2.0
        keys = enumerate_moment_keys(d, "loclin")
        parts = _partitions(setup)
        rh, rl = sweep_sums(precompute_box_sums(x, y, parts, keys, policy, monomial_inputs=xn), parts, policy, pairs=True)
        sh, sl = streamed_moment_sums(x, y, parts, keys, policy, monomial_inputs=xn)
        np.testing.assert_array_equal(sh[:, keys.index(ONE)], rh[:, keys.index(ONE)])
        if policy == "compensated":
            np.testing.assert_array_equal(sh + sl, rh + rl)
        else:
            assert sl is None
            np.testing.assert_allclose(sh, rh, rtol=1e-12, atol=1e-12 * np.abs(rh).max())

    def test_streamed_needs_outputs(self):
        setup, _, _ = _setup(100, 2)
        with pytest.raises(ValueError):
            streamed_moment_sums(setup.rotated, None, _partitions(setup), enumerate_moment_keys(2, "nw"))


class TestExpansion:
    def test_single_point_density(self):
        keys = enumerate_moment_keys(1, "kde")
        for n in (1, 7):
            out = expand_kernel_sums(np.array([[1.0, 0.0, 0.0]]), keys, [[0.0]], [[1.0]], n)
            assert out[ONE][0] == pytest.approx(0.75 / n, rel=1e-15)

    def test_point_on_face_contributes_zero(self):
        keys = enumerate_moment_keys(1, "kde")
        z, h = 0.3, 0.7
        xf = z + h
        out = expand_kernel_sums(np.array([[1.0, xf, xf * xf]]), keys, [[z]], [[h]], 1)
        assert abs(out[ONE][0]) <= 1e-15

    @pytest.mark.parametrize("d", [2, 3])
    def test_matches_naive_sums(self, d):
        setup, _, y = _setup(50, d, 0.5, seed=d)
        x, n = setup.rotated, 50
        keys = enumerate_moment_keys(d, "loclin")
        hi, lo = streamed_moment_sums(x, y, _partitions(setup), keys, "compensated")
        z, h = setup.points(), setup.bandwidths()
        sums = expand_kernel_sums(hi + lo, keys, z, h, n)
        assert ONE in sums and MomentKey((), 1) in sums
        for r, got in sums.items():
            rv = monomial_values(x, y, [r])[:, 0]
            for j in range(z.shape[0]):
                inside = _brute_box(setup, j)
                u = (x[inside] - z[j]) / h[j]
                terms = (1.0 - u**2).sum(axis=1) * rv[inside]
                pref = 3.0 / (d * 2.0 ** (d + 1) * n * np.prod(h[j]))
                ref = pref * math.fsum(terms)
                assert abs(got[j] - ref) <= 1e-10 * (pref * np.abs(terms).sum() + 1e-300)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_compiled_expansion_and_system(self, d):
        setup, _, y = _setup(800, d, 0.2, seed=d)
        x = setup.rotated
        keys = enumerate_moment_keys(d, "loclin")
        t, _ = streamed_moment_sums(x, y, _partitions(setup), keys, "plain")
        z, h = setup.points(), setup.bandwidths()
        ref = expand_kernel_sums(t, keys, z, h, x.shape[0])
        regs = list(ref)
        fast = expand_plain(t, expansion_columns(keys, regs, d), z, h, x.shape[0])
        for a, r in enumerate(regs):
            np.testing.assert_allclose(fast[:, a], ref[r], rtol=1e-14, atol=1e-14 * np.abs(ref[r]).max())
        a1, b1, m1, _ = local_linear_system(ref, z, h)
        a2, b2, m2 = system_plain(fast, *system_indices(regs, d), z, h)
        for u, v in ((a1, a2), (b1, b2), (m1, m2)):
            np.testing.assert_allclose(v, u, rtol=1e-12, atol=1e-12 * np.abs(u).max())


class TestAssembly:
    @pytest.mark.parametrize("d", [2, 3])
    @pytest.mark.parametrize("policy", ["plain", "compensated"])
    def test_affine_exact(self, d, policy):
        rng = np.random.default_rng(d)
        x = rng.normal(size=(3000, d))
        coef = rng.normal(size=d)
        y = 1.5 + x @ coef
        setup = prepare_grid(x, 0.2)
        res = fast_smooth(setup, y, policy=policy)
        pts = setup.frame.inverse(setup.points())
        lo, hi = np.quantile(x, 0.1, axis=0), np.quantile(x, 0.9, axis=0)
        interior = np.all((pts > lo) & (pts < hi), axis=1) & (res.status == STATUS_OK)
        assert interior.sum() > 50
        np.testing.assert_allclose(res.loclin[interior], 1.5 + pts[interior] @ coef, rtol=0, atol=1e-8)

    def test_empty_windows_flagged(self):
        t = np.linspace(-1, 1, 400)
        x = np.c_[t, -t + 1e-3 * np.sin(37 * t)]
        y = t**2
        setup = prepare_grid(x, 0.05, rotate=False)
        res = fast_smooth(setup, y)
        ref = reference_smooth(setup, y)
        empty = res.status == STATUS_EMPTY
        assert empty.any()
        np.testing.assert_array_equal(empty, ref.status == STATUS_EMPTY)
        np.testing.assert_array_equal(res.density[empty], 0.0)
        assert np.all(np.isnan(res.nw[empty])) and np.all(np.isnan(res.loclin[empty]))
        assert np.all(res.density >= 0)

    def test_zero_mass_sums(self):
        z = np.zeros((2, 2))
        h = np.ones((2, 2))
        regs = {r for r in enumerate_moment_keys(2, "loclin") if r.degree <= 2 and (r.q == 0 or r.degree <= 1)}
        sums = {r: np.zeros(2) for r in regs}
        res = assemble_smoothers(sums, z, h, np.zeros(2))
        np.testing.assert_array_equal(res.density, 0.0)
        np.testing.assert_array_equal(res.status, STATUS_EMPTY)

    @pytest.mark.parametrize("policy", ["plain", "compensated"])
    def test_two_dimensions_match_oracle(self, policy):
        setup, _, y = _setup(200, 2, 0.25, seed=5)
        res = fast_smooth(setup, y, policy=policy)
        ref = reference_smooth(setup, y)
        for name in NAMES:
            assert _max_rel(getattr(res, name), getattr(ref, name)) <= 1e-9, name
        np.testing.assert_array_equal(res.status, ref.status)

    def test_permutation_invariance(self):
        x, y = generate_sample(2000, 2, 7)
        perm = np.random.default_rng(0).permutation(2000)
        a = fast_smooth(prepare_grid(x, 0.15, rotate=False), y)
        b = fast_smooth(prepare_grid(x[perm], 0.15, rotate=False), y[perm])
        for name in NAMES:
            assert _max_rel(getattr(b, name), getattr(a, name)) <= 1e-10, name


class TestEndToEnd:
    @pytest.mark.parametrize("d", [1, 2, 3])
    @pytest.mark.parametrize("n", [500, 2000])
    @pytest.mark.parametrize("p", [0.15, 0.25])
    def test_oracle_equivalence(self, d, n, p):
        setup, _, y = _setup(n, d, p, seed=100 * d + n)
        ref = reference_smooth(setup, y)
        plain = relative_errors(fast_smooth(setup, y, policy="plain"), ref)
        stab = relative_errors(fast_smooth(setup, y, policy="compensated"), ref)
        assert plain.max() <= 1e-7
        assert stab.max() <= 1e-9
        assert plain.mean() <= 1e-11
