"""Running-sum accumulators used by every fast-updating loop.

Two flavours share one small contract (``add``, ``subtract``, ``total``):

* :class:`PlainAccumulator` is ordinary left-to-right float summation.
* :class:`CompensatedAccumulator` computes the exact rounding error of every
  addition with the branch-on-magnitude two-sum (the Møller-Kahan update) and
  keeps the accumulated error in a separate cell that is folded back in by
  :meth:`~CompensatedAccumulator.total`.

The numba-compiled loops elsewhere in the package do not instantiate these
classes; they call :func:`comp_add` on plain ``(sum, error)`` float pairs,
which performs the identical arithmetic.
"""

from __future__ import annotations

from numba import njit

PLAIN = "plain"
COMPENSATED = "compensated"
POLICIES = (PLAIN, COMPENSATED)


def is_compensated(policy) -> bool:
    """Map a policy given as a string or a bool onto the compensation flag."""
    if isinstance(policy, bool):
        return policy
    if policy in (COMPENSATED, "on", "stable"):
        return True
    if policy in (PLAIN, "off"):
        return False
    raise ValueError(f"unknown accumulator policy {policy!r}")


@njit(cache=True, inline="always")
def comp_add(s, c, x):
    """Add ``x`` to the compensated pair ``(s, c)`` and return the new pair."""
    t = s + x
    if abs(s) > abs(x):
        c += (s - t) + x
    else:
        c += (x - t) + s
    return t, c


class PlainAccumulator:
    __slots__ = ("value",)

    compensated = False

    def __init__(self, value: float = 0.0):
        self.value = float(value)

    @property
    def compensation(self) -> float:
        return 0.0

    def add(self, x: float) -> "PlainAccumulator":
        self.value += x
        return self

    def subtract(self, x: float) -> "PlainAccumulator":
        return self.add(-x)

    def total(self) -> float:
        return self.value

    def __repr__(self):
        return f"PlainAccumulator({self.value!r})"


class CompensatedAccumulator:
    """Compensated running sum.

    ``value`` is the running float sum and ``compensation`` the accumulated
    rounding error of all additions so far; ``total()`` returns their sum.

    Examples
    --------
    >>> acc = CompensatedAccumulator()
    >>> for x in (1e16, 1.0, -1e16):
    ...     _ = acc.add(x)
    >>> acc.total()
    1.0
    """

    __slots__ = ("value", "compensation")

    compensated = True

    def __init__(self, value: float = 0.0):
        self.value = float(value)
        self.compensation = 0.0

    def add(self, x: float) -> "CompensatedAccumulator":
        x = float(x)
        t = self.value + x
        if abs(self.value) > abs(x):
            self.compensation += (self.value - t) + x
        else:
            self.compensation += (x - t) + self.value
        self.value = t
        return self

    def subtract(self, x: float) -> "CompensatedAccumulator":
        return self.add(-x)

    def total(self) -> float:
        return self.value + self.compensation

    def __repr__(self):
        return f"CompensatedAccumulator({self.value!r}, {self.compensation!r})"


def make_accumulator(policy=PLAIN):
    """Return a fresh accumulator for ``policy``."""
    if is_compensated(policy):
        return CompensatedAccumulator()
    return PlainAccumulator()


@njit(cache=True, inline="always")
def two_prod(a, b):
    """``a * b`` as an unevaluated sum ``(p, e)``, exact barring overflow and underflow."""
    p = a * b
    t = 134217729.0 * a
    ah = t - (t - a)
    al = a - ah
    t = 134217729.0 * b
    bh = t - (t - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(cache=True, inline="always")
def dd_mul(ah, al, bh, bl):
    """Double-double product of ``ah + al`` and ``bh + bl``."""
    p, e = two_prod(ah, bh)
    e += ah * bl + al * bh
    s = p + e
    return s, e - (s - p)
