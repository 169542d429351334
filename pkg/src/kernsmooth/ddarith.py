"""Vectorized double-double arithmetic.

A value is an unevaluated pair ``hi + lo`` of float arrays with
``|lo| <= ulp(hi) / 2``, giving about 106 significant bits.  Only the
operations needed to combine running sums after compensated accumulation
are provided: the kernel expansion and the centering of local moments
cancel leading digits, and carrying the low parts through keeps those
steps from undoing the compensation.
"""

from __future__ import annotations

import numpy as np

_SPLIT = 134217729.0  # 2**27 + 1


def two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _split(a):
    t = _SPLIT * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


class DD:
    """Array of double-double numbers."""

    __slots__ = ("hi", "lo")
    # Make ``ndarray op DD`` defer to the reflected DD operator.
    __array_ufunc__ = None

    def __init__(self, hi, lo=None):
        self.hi = np.asarray(hi, dtype=float)
        self.lo = np.zeros_like(self.hi) if lo is None else np.asarray(lo, dtype=float)

    @classmethod
    def pair(cls, hi, lo):
        """Normalize an arbitrary pair whose exact sum is the value."""
        return cls(*two_sum(np.asarray(hi, dtype=float), np.asarray(lo, dtype=float)))

    def __float__(self):
        return float(self.hi + self.lo)

    def value(self) -> np.ndarray:
        return self.hi + self.lo

    def _coerce(self, other):
        return other if isinstance(other, DD) else DD(other)

    def __add__(self, other):
        o = self._coerce(other)
        s, e = two_sum(self.hi, o.hi)
        t, f = two_sum(self.lo, o.lo)
        e = e + t
        s, e = quick_two_sum(s, e)
        e = e + f
        return DD(*quick_two_sum(s, e))

    __radd__ = __add__

    def __neg__(self):
        return DD(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        p, e = two_prod(self.hi, o.hi)
        e = e + (self.hi * o.lo + self.lo * o.hi)
        return DD(*quick_two_sum(p, e))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        q1 = self.hi / o.hi
        r = self - o * q1
        q2 = r.hi / o.hi
        r = r - o * q2
        q3 = r.hi / o.hi
        return DD(*quick_two_sum(q1, q2)) + q3

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __getitem__(self, idx):
        return DD(self.hi[idx], self.lo[idx])
