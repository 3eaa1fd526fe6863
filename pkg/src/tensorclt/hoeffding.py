"""Averaging and Hoeffding projection operators on single and double tensors.

Subsets ``F`` of ``[s]`` are given as iterables of 1-based positions.  All
subset sums run in ascending bitmask order.
"""

from __future__ import annotations

from collections.abc import Iterable

import numpy as np

from .errors import DimensionError
from .tensor_core import dense_order, double_order


def _positions(F: Iterable[int], s: int) -> tuple[int, ...]:
    F = tuple(sorted({int(x) for x in F}))
    if any(not 1 <= x <= s for x in F):
        raise DimensionError(f"subset {F} is not contained in [1, {s}]")
    return F


def _subsets(s: int):
    for mask in range(1 << s):
        yield tuple(u + 1 for u in range(s) if mask >> u & 1)


def _avg_keep(a: np.ndarray, keep_axes: tuple[int, ...]) -> np.ndarray:
    drop = tuple(ax for ax in range(a.ndim) if ax not in keep_axes)
    return a.mean(axis=drop, keepdims=True) if drop else a


def project_single(a: np.ndarray, F: Iterable[int], mode: str = "avg") -> np.ndarray:
    """``S_F[a]`` (mode ``"sum"``) or ``A_F[a]`` (mode ``"avg"``) as a tensor over ``[n]^F``.

    Axes not in ``F`` are summed or averaged out; ``F = []`` gives an order-0 array.
    """
    a = np.asarray(a, dtype=float)
    s, _ = dense_order(a)
    F = _positions(F, s)
    drop = tuple(ax for ax in range(s) if ax + 1 not in F)
    if mode == "sum":
        return np.asarray(a.sum(axis=drop))
    if mode == "avg":
        return np.asarray(a.mean(axis=drop)) if drop else a.copy()
    raise ValueError(f"mode must be 'sum' or 'avg', got {mode!r}")


def hoeffding_single(a: np.ndarray) -> np.ndarray:
    """``H[a](i) = sum_F (-1)^{s-|F|} A_F[a](i|F)``; centering when ``s = 1``."""
    a = np.asarray(a, dtype=float)
    s, _ = dense_order(a)
    out = np.zeros_like(a)
    for F in _subsets(s):
        sign = -1.0 if (s - len(F)) % 2 else 1.0
        out = out + sign * _avg_keep(a, tuple(u - 1 for u in F))
    return out


def project_double(z: np.ndarray, F: Iterable[int], G: Iterable[int]) -> np.ndarray:
    """``A_{F,G}[z]`` over ``[n]^F x [n]^G``: average out first-group axes outside ``F``
    and second-group axes outside ``G``."""
    z = np.asarray(z, dtype=float)
    s, _ = double_order(z)
    F, G = _positions(F, s), _positions(G, s)
    keep = {u - 1 for u in F} | {s + u - 1 for u in G}
    drop = tuple(ax for ax in range(2 * s) if ax not in keep)
    return np.asarray(z.mean(axis=drop)) if drop else z.copy()


def hoeffding_double(z: np.ndarray) -> np.ndarray:
    """``H[z] = sum_{F,G} (-1)^{|F|+|G|} A_{F,G}[z]`` broadcast back to ``[n]^s x [n]^s``."""
    z = np.asarray(z, dtype=float)
    s, _ = double_order(z)
    out = np.zeros_like(z)
    for F in _subsets(s):
        for G in _subsets(s):
            sign = -1.0 if (len(F) + len(G)) % 2 else 1.0
            keep = tuple(u - 1 for u in F) + tuple(s + u - 1 for u in G)
            out = out + sign * _avg_keep(z, keep)
    return out


def default_tolerance(xi: np.ndarray) -> float:
    xi = np.asarray(xi)
    if xi.size == 0 or xi.ndim == 0:
        return 1e-9
    return 1e-9 * float(np.max(np.abs(xi))) * xi.shape[0]


def hoeffding_residual(xi: np.ndarray) -> float:
    """Largest absolute single-slot sum over all axes of a double tensor."""
    xi = np.asarray(xi, dtype=float)
    double_order(xi)
    if xi.ndim == 0:
        return 0.0
    return max(float(np.max(np.abs(xi.sum(axis=ax)))) for ax in range(xi.ndim))


def is_hoeffding(xi: np.ndarray, tol: float | None = None) -> bool:
    """True iff summing over any single slot, in either index group, gives zero within ``tol``.

    ``tol`` is an absolute threshold; by default ``1e-9 * max|xi| * n``.
    """
    if tol is None:
        tol = default_tolerance(xi)
    return hoeffding_residual(xi) <= tol
