"""Univariate smoothing kernels and their source/target separations.

All finite-support kernels use the half-open window ``-1 <= u < 1``, the same
convention as the sliding windows ``[z - h, z + h)`` of the fast path, so a
direct evaluation and a fast evaluation see exactly the same sample points.

A kernel is *fast-decomposable* when ``K((x - z) / h)`` splits into a finite
sum of products ``a(z, h) * f(x) * x**p`` restricted to an interval tied to
``z``.  Such sums can be maintained with running window sums over sorted
data; :func:`decompose` returns the terms of that split.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit
from scipy.special import comb, gamma

from .errors import UnsupportedFastKernel

__all__ = [
    "KernelKind",
    "SeparableTerm",
    "KernelDecomposition",
    "eval_kernel",
    "decompose",
    "eval_additive_kernel",
    "eval_product_kernel",
    "count_sweep_sums",
    "FAST_KINDS",
    "PIECES",
]

HCOSH_C = math.log(2.0 + math.sqrt(3.0))
HCOSH_NORM = 1.0 / (4.0 - 2.0 * math.sinh(HCOSH_C) / HCOSH_C)

# Interval selectors relative to the evaluation point z.
PIECES = ("window", "left", "right", "below", "above")


class KernelKind(enum.Enum):
    RECTANGULAR = "rectangular"
    TRIANGULAR = "triangular"
    EPANECHNIKOV = "epanechnikov"
    BIWEIGHT = "biweight"
    TRIWEIGHT = "triweight"
    TRICUBE = "tricube"
    COSINE = "cosine"
    HYPERBOLIC_COSINE = "hyperbolic_cosine"
    LAPLACIAN = "laplacian"
    SILVERMAN = "silverman"

    @classmethod
    def parse(cls, name) -> "KernelKind":
        """Accept a member or a case-insensitive name such as ``"epanechnikov"``."""
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_").replace(" ", "_")
        key = _ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown kernel {name!r}; expected one of {valid}") from None

    @property
    def code(self) -> int:
        return _CODES[self]

    @property
    def finite_support(self) -> bool:
        return self not in (KernelKind.LAPLACIAN, KernelKind.SILVERMAN)


_ALIASES = {
    "uniform": "rectangular",
    "parabolic": "epanechnikov",
    "quartic": "biweight",
    "hyperboliccosine": "hyperbolic_cosine",
    "cosh": "hyperbolic_cosine",
}
_CODES = {kind: i for i, kind in enumerate(KernelKind)}

# Symmetric beta kernels (1 - u^2)^alpha.
_BETA_ALPHA = {
    KernelKind.RECTANGULAR: 0,
    KernelKind.EPANECHNIKOV: 1,
    KernelKind.BIWEIGHT: 2,
    KernelKind.TRIWEIGHT: 3,
}

FAST_KINDS = (
    KernelKind.RECTANGULAR,
    KernelKind.TRIANGULAR,
    KernelKind.EPANECHNIKOV,
    KernelKind.BIWEIGHT,
    KernelKind.TRIWEIGHT,
    KernelKind.COSINE,
    KernelKind.LAPLACIAN,
)


def _beta_constant(alpha: int) -> float:
    return 1.0 / (2.0 ** (2 * alpha + 1) * gamma(alpha + 1) ** 2 / gamma(2 * alpha + 2))


@njit(cache=True)
def kernel_raw(code, u):
    """Kernel formula without the support indicator (numba, scalar)."""
    a = abs(u)
    if code == 0:
        return 0.5
    if code == 1:
        return 1.0 - a
    if code == 2:
        return 0.75 * (1.0 - u * u)
    if code == 3:
        v = 1.0 - u * u
        return 0.9375 * v * v
    if code == 4:
        v = 1.0 - u * u
        return 1.09375 * v * v * v
    if code == 5:
        v = 1.0 - a * a * a
        return (70.0 / 81.0) * v * v * v
    if code == 6:
        return 0.25 * np.pi * np.cos(0.5 * np.pi * u)
    if code == 7:
        return HCOSH_NORM * (2.0 - np.cosh(HCOSH_C * u))
    if code == 8:
        return 0.5 * np.exp(-a)
    s = a / np.sqrt(2.0)
    return 0.5 * np.exp(-s) * np.sin(s + 0.25 * np.pi)


def eval_kernel(kind, u):
    """Evaluate ``K(u)`` elementwise; finite-support kernels vanish off ``[-1, 1)``.

    >>> float(eval_kernel("epanechnikov", 0.5))
    0.5625
    """
    kind = KernelKind.parse(kind)
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    if kind in _BETA_ALPHA:
        val = _beta_constant(_BETA_ALPHA[kind]) * (1.0 - u * u) ** _BETA_ALPHA[kind]
    elif kind is KernelKind.TRIANGULAR:
        val = 1.0 - a
    elif kind is KernelKind.TRICUBE:
        val = (70.0 / 81.0) * (1.0 - a**3) ** 3
    elif kind is KernelKind.COSINE:
        val = 0.25 * np.pi * np.cos(0.5 * np.pi * u)
    elif kind is KernelKind.HYPERBOLIC_COSINE:
        val = HCOSH_NORM * (2.0 - np.cosh(HCOSH_C * u))
    elif kind is KernelKind.LAPLACIAN:
        return 0.5 * np.exp(-a)
    else:
        s = a / np.sqrt(2.0)
        return 0.5 * np.exp(-s) * np.sin(s + 0.25 * np.pi)
    inside = (u >= -1.0) & (u < 1.0)
    return np.where(inside, val, 0.0)


@dataclass(frozen=True)
class SeparableTerm:
    """One product ``target_factor(z, h) * sum_i source(x_i) * x_i**source_power``.

    ``source_factor`` names the function of ``x`` applied before summation:
    ``"one"``, ``"cos"``/``"sin"`` (of ``pi x / 2h``) or ``"exp_neg"``/``"exp_pos"``
    (``exp(-x/h)``, ``exp(x/h)``).  ``piece`` selects the summation interval.
    """

    target_factor: Callable
    source_power: int
    source_factor: str
    piece: str


@dataclass(frozen=True)
class KernelDecomposition:
    kind: KernelKind
    terms: tuple
    supports_balloon: bool

    @property
    def max_source_power(self) -> int:
        return max(t.source_power for t in self.terms)

    @property
    def polynomial_targets(self) -> bool:
        """True when every target factor is a polynomial in ``z`` and ``1/h``."""
        return all(t.source_factor == "one" for t in self.terms)

    @property
    def pieces(self) -> tuple:
        return tuple(sorted({t.piece for t in self.terms}, key=PIECES.index))

    def source_keys(self) -> tuple:
        """Distinct ``(piece, source_factor)`` pairs whose window sums are needed."""
        keys = {(t.piece, t.source_factor) for t in self.terms}
        return tuple(sorted(keys, key=lambda k: (PIECES.index(k[0]), k[1])))


def source_values(factor: str, x, h):
    """Evaluate a source factor at sample coordinates ``x`` for constant ``h``."""
    x = np.asarray(x, dtype=float)
    if factor == "one":
        return np.ones_like(x)
    if factor == "cos":
        return np.cos(0.5 * np.pi * x / h)
    if factor == "sin":
        return np.sin(0.5 * np.pi * x / h)
    if factor == "exp_neg":
        return np.exp(-x / h)
    if factor == "exp_pos":
        return np.exp(x / h)
    raise ValueError(f"unknown source factor {factor!r}")


def _beta_target(alpha: int, power: int):
    const = _beta_constant(alpha)
    # (1 - (x - z)^2 / h^2)^alpha expanded in powers of x.
    parts = []
    for a in range(alpha + 1):
        if 2 * a < power:
            continue
        parts.append((comb(alpha, a, exact=True) * (-1) ** a * comb(2 * a, power, exact=True), a))

    def factor(z, h):
        out = 0.0 * z
        for coef, a in parts:
            out = out + coef * _ipow(-z, 2 * a - power) / _ipow(h, 2 * a)
        return const * out

    return factor


# Target factors use only arithmetic operators so they also accept
# double-double arguments.
def _ipow(v, k: int):
    out = 1.0
    for _ in range(k):
        out = out * v
    return out


def _zh(z, h):
    return z / h


def _inv_h(z, h):
    return 0.0 * z + 1.0 / h


def _decompose_uncached(kind: KernelKind) -> KernelDecomposition:
    if kind in _BETA_ALPHA:
        alpha = _BETA_ALPHA[kind]
        terms = tuple(
            SeparableTerm(_beta_target(alpha, b), b, "one", "window") for b in range(2 * alpha + 1)
        )
        return KernelDecomposition(kind, terms, True)
    if kind is KernelKind.TRIANGULAR:
        # 1 - |x - z| / h, split at z into two linear pieces.
        terms = (
            SeparableTerm(lambda z, h: 1.0 + _zh(z, h), 0, "one", "right"),
            SeparableTerm(lambda z, h: -_inv_h(z, h), 1, "one", "right"),
            SeparableTerm(lambda z, h: 1.0 - _zh(z, h), 0, "one", "left"),
            SeparableTerm(_inv_h, 1, "one", "left"),
        )
        return KernelDecomposition(kind, terms, True)
    if kind is KernelKind.COSINE:
        q = 0.25 * np.pi
        terms = (
            SeparableTerm(lambda z, h: q * np.cos(0.5 * np.pi * np.asarray(z) / h), 0, "cos", "window"),
            SeparableTerm(lambda z, h: q * np.sin(0.5 * np.pi * np.asarray(z) / h), 0, "sin", "window"),
        )
        # The source factor depends on h, so h cannot vary with z.
        return KernelDecomposition(kind, terms, False)
    if kind is KernelKind.LAPLACIAN:
        terms = (
            SeparableTerm(lambda z, h: 0.5 * np.exp(np.asarray(z) / h), 0, "exp_neg", "above"),
            SeparableTerm(lambda z, h: 0.5 * np.exp(-np.asarray(z) / h), 0, "exp_pos", "below"),
        )
        return KernelDecomposition(kind, terms, False)
    raise UnsupportedFastKernel(
        f"kernel {kind.value!r} has no fast-updating decomposition; use the naive engine"
    )


_DECOMPOSITIONS: dict = {}


def decompose(kind) -> KernelDecomposition:
    """Return the separable fast-updating form of ``kind``.

    Raises
    ------
    UnsupportedFastKernel
        For tricube, Silverman and hyperbolic cosine, which are evaluated
        directly only.
    """
    kind = KernelKind.parse(kind)
    if kind not in _DECOMPOSITIONS:
        _DECOMPOSITIONS[kind] = _decompose_uncached(kind)
    return _DECOMPOSITIONS[kind]


def eval_additive_kernel(u):
    """Additive (averaged) multivariate Epanechnikov kernel on the last axis of ``u``.

    ``3 / (d 2**(d+1)) * sum_k (1 - u_k**2)`` inside the box ``[-1, 1)**d``.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        u = u[None]
    d = u.shape[-1]
    inside = np.all((u >= -1.0) & (u < 1.0), axis=-1)
    val = 3.0 / (d * 2.0 ** (d + 1)) * np.sum(1.0 - u * u, axis=-1)
    return np.where(inside, val, 0.0)


def eval_product_kernel(u, kind="epanechnikov"):
    """Product of univariate kernels along the last axis of ``u``."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        u = u[None]
    return np.prod(eval_kernel(kind, u), axis=-1)


def count_sweep_sums(form: str, d: int) -> int:
    """Number of tracked kernel-power sums per regression monomial.

    ``"product"`` expands to ``3**d`` sums, ``"average"`` to ``2 d + 1``.
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    if form == "product":
        return 3**d
    if form == "average":
        return 2 * d + 1
    raise ValueError(f"unknown multivariate kernel form {form!r}")
