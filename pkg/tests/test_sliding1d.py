"""Univariate sliding-window smoothers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernsmooth.bandwidth import knn_bandwidth_1d
from kernsmooth.errors import MonotonicityViolation, NonPositiveBandwidth, UnsupportedFastKernel
from kernsmooth.kernels import FAST_KINDS, KernelKind
from kernsmooth.oracle import naive_smooth
from kernsmooth.sliding1d import (
    STATUS_EMPTY,
    STATUS_OK,
    STATUS_SINGULAR,
    SortedSample1D,
    WindowMoments,
    smooth1d,
    window_sums,
    window_update,
)


def _knn_problem(n, m, frac, seed):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.normal(size=n))
    y = np.sin(2 * x) + 0.3 * rng.normal(size=n)
    z = np.sort(rng.choice(x, m, replace=False))
    h = knn_bandwidth_1d(x, z, max(2, int(frac * n))).h
    return SortedSample1D(x, y), z, h


def _max_rel(a, b):
    ok = np.isfinite(a) & np.isfinite(b) & (b != 0)
    return float(np.max(np.abs(a[ok] - b[ok]) / np.abs(b[ok])))


class TestSortedSample:
    def test_rejects_unsorted(self):
        with pytest.raises(MonotonicityViolation):
            SortedSample1D([1.0, 0.0])

    def test_from_unsorted_keeps_pairs(self):
        s = SortedSample1D.from_unsorted([3.0, 1.0, 2.0], [30.0, 10.0, 20.0])
        np.testing.assert_array_equal(s.x, [1, 2, 3])
        np.testing.assert_array_equal(s.y, [10, 20, 30])

    def test_missing_y_is_zero(self):
        np.testing.assert_array_equal(SortedSample1D([0.0, 1.0]).y, 0.0)


class TestWindowUpdate:
    def test_membership_example(self):
        s = SortedSample1D(np.arange(1.0, 6.0))
        w = WindowMoments()
        w.update(s, 0.5, 3.5)
        assert w.total(0, 0) == 3 and w.total(1, 0) == 6
        w.update(s, 2.5, 5.5)
        assert w.total(0, 0) == 3 and w.total(1, 0) == 12

    def test_shift_adds_and_removes(self):
        s = SortedSample1D([1.0, 2.0, 3.0])
        w = window_update(WindowMoments(), s, 0.5, 2.5)
        assert (w.iL, w.iR, w.total(0, 0)) == (0, 2, 2)
        window_update(w, s, 1.5, 3.5)
        assert (w.iL, w.iR, w.total(0, 0)) == (1, 3, 2)
        assert w.total(1, 0) == 5

    def test_past_all_points_is_empty(self):
        s = SortedSample1D([1.0, 2.0, 3.0], [1.0, -2.0, 0.5])
        w = WindowMoments("compensated")
        w.update(s, 0.0, 2.5)
        w.update(s, 10.0, 11.0)
        np.testing.assert_allclose(w.table(), 0.0, atol=1e-15)

    def test_identical_bounds_no_change(self):
        s = SortedSample1D([1.0, 2.0, 3.0])
        w = WindowMoments().update(s, 0.5, 2.5)
        before = w.table().copy()
        w.update(s, 0.5, 2.5)
        np.testing.assert_array_equal(w.table(), before)

    def test_backwards_bounds_rejected(self):
        s = SortedSample1D([1.0, 2.0, 3.0])
        w = WindowMoments().update(s, 1.0, 2.0)
        with pytest.raises(MonotonicityViolation):
            w.update(s, 0.5, 2.5)

    @pytest.mark.parametrize("policy", ["plain", "compensated"])
    def test_window_invariant_every_step(self, policy):
        sample, z, h = _knn_problem(300, 60, 0.2, 11)
        w = WindowMoments(policy)
        x, y = sample.x, sample.y
        for zm, hm in zip(z, h):
            w.update(sample, zm - hm, zm + hm)
            inside = (x >= zm - hm) & (x < zm + hm)
            brute = np.array([[np.sum(x[inside] ** p1 * y[inside] ** p2) for p2 in range(2)] for p1 in range(5)])
            np.testing.assert_allclose(w.table(), brute, rtol=1e-10, atol=1e-10)

    def test_compiled_window_sums_match_literal(self):
        sample, z, h = _knn_problem(400, 80, 0.15, 12)
        vals = np.stack([sample.x**p * sample.y**q for p in range(5) for q in range(2)], axis=1)
        fast = window_sums(sample.x, vals, z - h, z + h, True)
        w = WindowMoments("compensated")
        for m in range(z.size):
            w.update(sample, z[m] - h[m], z[m] + h[m])
            np.testing.assert_allclose(fast[m], w.table().ravel(), rtol=1e-13, atol=1e-13)


class TestSmooth1dExamples:
    def test_single_point_density(self):
        res = smooth1d(SortedSample1D([0.0]), [0.0], [1.0])
        assert res.density[0] == 0.75
        assert res.status[0] == STATUS_SINGULAR

    def test_window_count_example(self):
        s = SortedSample1D(np.arange(1.0, 6.0))
        res = smooth1d(s, [2.0, 4.0], [1.5, 1.5], "rectangular", normalize=False)
        np.testing.assert_allclose(res.density, 3 * 0.5 / (5 * 1.5))

    @staticmethod
    def _affine(k):
        rng = np.random.default_rng(3)
        x = np.sort(rng.uniform(-2, 5, 500))
        z = np.linspace(-1, 4, 50)
        return SortedSample1D(x, 2.0 + 3.0 * x), z, knn_bandwidth_1d(x, z, k).h

    @pytest.mark.parametrize("kind", ["epanechnikov", "rectangular", "triangular", "biweight", "triweight"])
    @pytest.mark.parametrize("k", [5, 10, 40, 150])
    @pytest.mark.parametrize("policy", ["plain", "compensated"])
    def test_affine_exact_recentered(self, kind, k, policy):
        sample, z, h = self._affine(k)
        res = smooth1d(sample, z, h, kind, policy, recenter=True)
        np.testing.assert_allclose(res.loclin, 2.0 + 3.0 * z, rtol=0, atol=1e-8)
        assert np.all(res.status == STATUS_OK)

    @pytest.mark.parametrize("kind", ["epanechnikov", "rectangular", "triangular", "biweight"])
    def test_affine_exact_plain_global(self, kind):
        sample, z, h = self._affine(40)
        res = smooth1d(sample, z, h, kind, "plain")
        np.testing.assert_allclose(res.loclin, 2.0 + 3.0 * z, rtol=0, atol=1e-8)

    def test_recentering_tames_high_degree_kernels(self):
        sample, z, h = self._affine(5)
        glob = smooth1d(sample, z, h, "triweight", "plain", recenter=False)
        local = smooth1d(sample, z, h, "triweight", "plain", recenter=True)
        err_glob = np.nan_to_num(np.abs(glob.loclin - 2 - 3 * z), nan=np.inf)
        assert np.max(np.abs(local.loclin - 2 - 3 * z)) < 1e-8 < np.max(err_glob)

    def test_empty_window(self):
        res = smooth1d(SortedSample1D([0.0, 1.0], [1.0, 2.0]), [5.0], [0.5])
        assert res.density[0] == 0.0
        assert np.isnan(res.nw[0]) and np.isnan(res.loclin[0])
        assert res.status[0] == STATUS_EMPTY

    def test_singular_falls_back_to_nw(self):
        s = SortedSample1D([1.0, 1.0, 1.0, 9.0], [1.0, 2.0, 3.0, 0.0])
        res = smooth1d(s, [1.0], [0.5])
        assert res.status[0] == STATUS_SINGULAR
        assert res.loclin[0] == pytest.approx(2.0, rel=1e-14)
        assert res.loclin[0] == res.nw[0]

    def test_density_nonnegative(self):
        sample, z, h = _knn_problem(2000, 2000, 0.15, 5)
        for kind in FAST_KINDS:
            hh = h if kind not in (KernelKind.COSINE, KernelKind.LAPLACIAN) else np.full_like(h, 0.3)
            assert np.all(smooth1d(sample, z, hh, kind).density >= 0)


class TestSmooth1dErrors:
    def test_nonpositive_bandwidth(self):
        with pytest.raises(NonPositiveBandwidth):
            smooth1d(SortedSample1D([0.0, 1.0]), [0.0, 1.0], [1.0, 0.0])

    def test_unsorted_z(self):
        with pytest.raises(MonotonicityViolation):
            smooth1d(SortedSample1D([0.0, 1.0]), [1.0, 0.0], [1.0, 1.0])

    def test_nonmonotone_edges(self):
        with pytest.raises(MonotonicityViolation):
            smooth1d(SortedSample1D([0.0, 1.0]), [0.0, 0.1], [2.0, 0.1])

    @pytest.mark.parametrize("kind", ["cosine", "laplacian"])
    def test_balloon_rejected_for_constant_h_kernels(self, kind):
        with pytest.raises(UnsupportedFastKernel):
            smooth1d(SortedSample1D([0.0, 1.0, 2.0]), [0.0, 1.0], [1.0, 1.5], kind)

    def test_naive_only_kernel_rejected(self):
        with pytest.raises(UnsupportedFastKernel):
            smooth1d(SortedSample1D([0.0, 1.0]), [0.5], [1.0], "tricube")


class TestOracleEquivalence:
    @pytest.mark.parametrize("n", [200, 2000])
    @pytest.mark.parametrize("frac", [0.15, 0.25])
    def test_knn_epanechnikov(self, n, frac):
        sample, z, h = _knn_problem(n, n // 2, frac, n + int(100 * frac))
        ref = naive_smooth(sample.x, sample.y, z, h)
        for policy, tol in (("plain", 1e-9), ("compensated", 1e-11)):
            res = smooth1d(sample, z, h, "epanechnikov", policy)
            for name in ("density", "nw", "loclin"):
                assert _max_rel(getattr(res, name), getattr(ref, name)) <= tol, (policy, name)

    @pytest.mark.parametrize("kind", FAST_KINDS)
    def test_every_fast_kernel(self, kind):
        sample, z, h = _knn_problem(1000, 300, 0.2, kind.code)
        if not kind.finite_support or kind is KernelKind.COSINE:
            h = np.full_like(h, 0.4)
        ref = naive_smooth(sample.x, sample.y, z, h, kind)
        res = smooth1d(sample, z, h, kind, "compensated")
        for name in ("density", "nw", "loclin"):
            assert _max_rel(getattr(res, name), getattr(ref, name)) <= 1e-9, name


class TestShiftInvariance:
    @settings(max_examples=30, deadline=None)
    @given(c=st.floats(-50, 50), seed=st.integers(0, 2**16))
    def test_loclin_translates(self, c, seed):
        sample, z, _ = _knn_problem(300, 40, 0.2, seed)
        # A constant width keeps the shifted edges monotone after rounding.
        h = np.full_like(z, 0.5)
        base = smooth1d(sample, z, h)
        shifted = smooth1d(SortedSample1D(sample.x + c, sample.y), z + c, h)
        ok = base.status == STATUS_OK
        np.testing.assert_allclose(shifted.loclin[ok], base.loclin[ok], rtol=0, atol=1e-8)
