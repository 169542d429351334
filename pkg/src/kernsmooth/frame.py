"""Principal-axis frame, rectilinear evaluation grid and multilinear interpolation.

The sample is rotated onto its principal axes so that an axis-aligned
evaluation grid follows the data.  Each grid axis takes its coordinates at
evenly spaced ranks of the sorted rotated sample, with more nodes along
axes of larger spread.  Estimates computed on the grid can be carried back
to arbitrary query points by multilinear interpolation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSample


@dataclass
class RotatedFrame:
    mean: np.ndarray
    rotation: np.ndarray
    singular_values: np.ndarray

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.rotation, np.eye(self.rotation.shape[0])))

    def transform(self, points) -> np.ndarray:
        """Coordinates of ``points`` (rows) along the principal axes."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_identity:
            return points.copy()
        return points @ self.rotation

    def inverse(self, coords) -> np.ndarray:
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        if self.is_identity:
            return coords.copy()
        return coords @ self.rotation.T


def _orient_columns(vecs):
    # Largest-magnitude entry of every column made positive.
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def fit_frame(inputs, rotate: bool = True) -> RotatedFrame:
    """Principal axes of the sample covariance.

    Parameters
    ----------
    inputs : (N, d) array_like
    rotate : bool
        When false the frame is the identity and the singular values are
        the per-axis standard deviations.

    Returns
    -------
    RotatedFrame
        ``singular_values`` are the standard deviations along the axes, in
        nonincreasing order when rotating.
    """
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if n < 2:
        raise DegenerateSample("at least two sample points are needed")
    mean = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    if not np.any(cov):
        raise DegenerateSample("sample covariance is identically zero")
    if not rotate:
        return RotatedFrame(mean, np.eye(d), np.sqrt(np.diag(cov)))
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    # Eigenvalues at rounding level of the largest are zero spread.
    vals[vals <= 8 * d * np.finfo(float).eps * vals[0]] = 0.0
    vecs = _orient_columns(vecs[:, order])
    return RotatedFrame(mean, vecs, np.sqrt(vals))


@dataclass
class EvalGrid:
    axes: list

    @property
    def sizes(self) -> tuple:
        return tuple(a.size for a in self.axes)

    @property
    def d(self) -> int:
        return len(self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.sizes))

    def points(self) -> np.ndarray:
        """All grid nodes as an ``(M, d)`` array in lexicographic order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def grid_sizes(target_m: int, singular_values) -> np.ndarray:
    """Per-axis node counts proportional to the singular values.

    Axes with zero spread get a single node.  The geometric-mean scaling is
    taken over the axes with positive spread, and the largest count is
    reduced until the product is at most ``1.1 * target_m``.
    """
    sig = np.asarray(singular_values, dtype=float)
    pos = sig > 0
    sizes = np.ones(sig.size, dtype=np.int64)
    if pos.any():
        gm = np.exp(np.mean(np.log(sig[pos])))
        base = float(target_m) ** (1.0 / pos.sum())
        sizes[pos] = np.maximum(1, np.rint(base * sig[pos] / gm)).astype(np.int64)
    while np.prod(sizes) > 1.1 * target_m and sizes.max() > 1:
        sizes[np.argmax(sizes)] -= 1
    return sizes


def axis_coordinates(sorted_values, m: int) -> np.ndarray:
    """``m`` coordinates at evenly spaced ranks of ``sorted_values``, duplicates removed."""
    v = np.asarray(sorted_values, dtype=float)
    n = v.size
    if m <= 1:
        return np.array([np.median(v)])
    j = np.arange(m)
    idx = np.floor(0.5 + (n - 1) * j / (m - 1)).astype(np.int64)
    return np.unique(v[idx])


def build_grid(rotated_inputs, target_m: int, singular_values) -> EvalGrid:
    """Rectilinear grid over rotated inputs with about ``target_m`` nodes.

    Examples
    --------
    >>> build_grid(np.arange(5.0)[:, None], 3, [1.0]).axes[0]
    array([0., 2., 4.])
    """
    if target_m < 1:
        raise ValueError("target_m must be at least 1")
    x = np.asarray(rotated_inputs, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    sizes = grid_sizes(target_m, singular_values)
    axes = [axis_coordinates(np.sort(x[:, k]), int(min(sizes[k], x.shape[0]))) for k in range(x.shape[1])]
    return EvalGrid(axes)


def interpolate(grid: EvalGrid, values, queries) -> np.ndarray:
    """Multilinear interpolation of grid ``values`` at ``queries``.

    ``values`` holds one number per node in lexicographic order (or is
    already shaped like the grid).  Queries outside the grid hull are
    clamped onto it.  Axes with a single node are constant along that axis.
    """
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    table = np.asarray(values, dtype=float).reshape(grid.sizes)
    lower, weight = [], []
    for k, axis in enumerate(grid.axes):
        if axis.size == 1:
            lower.append(np.zeros(q.shape[0], dtype=np.int64))
            weight.append(np.zeros(q.shape[0]))
            continue
        qk = np.clip(q[:, k], axis[0], axis[-1])
        i = np.clip(np.searchsorted(axis, qk, side="right") - 1, 0, axis.size - 2)
        lower.append(i)
        weight.append((qk - axis[i]) / (axis[i + 1] - axis[i]))
    out = np.zeros(q.shape[0])
    for corner in itertools.product((0, 1), repeat=grid.d):
        w = np.ones(q.shape[0])
        idx = []
        for k, bit in enumerate(corner):
            if grid.axes[k].size == 1:
                if bit:
                    w = w * 0.0
                idx.append(lower[k])
                continue
            w = w * (weight[k] if bit else 1.0 - weight[k])
            idx.append(lower[k] + bit)
        if not np.any(w):
            continue
        # Zero-weight corners must not spread NaN from empty nodes.
        with np.errstate(invalid="ignore"):
            out += np.where(w != 0.0, w * table[tuple(idx)], 0.0)
    return out
