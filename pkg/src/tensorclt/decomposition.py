"""Rewriting a Z-statistic as a weighted W-statistic, and the finite-population transform."""

from __future__ import annotations

import functools
import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DiagonalError, NotHoeffdingError, NotSymmetricError, RangeError, DimensionError
from .hoeffding import hoeffding_double, is_hoeffding
from .tensor_core import check_permutation, dense_order, double_order, injective_mask, injective_tuples


# -- weights ----------------------------------------------------------------

def mu_weight_printed(h: int, s: int, n: int) -> float:
    """``C(s,h) sum_f 2^{s-h-f} (-1)^f C(s-h,f) prod_{u=1}^f (n-s+u)/n``.

    Agrees with :func:`mu_weight` for ``h = 0`` only; kept for comparison.
    """
    if not 0 <= h < s <= n:
        raise RangeError(f"need 0 <= h < s <= n, got h={h}, s={s}, n={n}")
    total = 0.0
    ratio = 1.0
    for f in range(s - h + 1):
        if f:
            ratio *= (n - s + f) / n
        total += 2.0 ** (s - h - f) * (-1) ** f * math.comb(s - h, f) * ratio
    return math.comb(s, h) * total


@functools.lru_cache(maxsize=None)
def _mu_exact(h: int, s: int, n: int) -> Fraction:
    # Z_s - R_s expands over pairs (F, G) of subsets of [s].  Summing A_{F,G}[zeta_s]
    # over injective i, coordinates only in F may collide with coordinates only in G;
    # inclusion-exclusion over those partial matchings turns each collision into a
    # shared coordinate, so a matching of size m feeds Z_{|F & G| + m}.
    coef = Fraction(0)
    for a in range(s + 1):
        for b in range(s + 1):
            for c in range(max(0, a + b - s), min(a, b) + 1):
                m = h - c
                if (a, b) == (s, s) or m < 0 or m > min(a, b) - c:
                    continue
                pairs = math.comb(s, c) * math.comb(s - c, a - c) * math.comb(s - a, b - c)
                extensions = math.perm(n - (a + b - c), s - (a + b - c))
                matchings = math.comb(a - c, m) * math.comb(b - c, m) * math.factorial(m)
                coef -= (-1) ** (a + b + m) * pairs * matchings * Fraction(extensions, 1) / Fraction(n) ** (s - a - b + h)
    return coef * (-1) ** (s - h - 1)


def mu_weight(h: int, s: int, n: int) -> float:
    """Coefficient of ``n^{s-h} (-1)^{s-h-1} Z_h`` in the expansion of ``Z_s - R_s``.

    Computed exactly in rational arithmetic.  For ``h = 0`` this equals
    :func:`mu_weight_printed`; for ``h >= 1`` it also counts the collisions
    between coordinates that occur in only one of the two index groups.
    """
    if not 0 <= h < s <= n:
        raise RangeError(f"need 0 <= h < s <= n, got h={h}, s={s}, n={n}")
    return float(_mu_exact(h, s, n))


def increasing_chains(s: int, r: int):
    """All strictly increasing integer sequences starting at ``s`` and ending at ``r``."""
    if s == r:
        yield (s,)
        return
    for nxt in range(s + 1, r + 1):
        for tail in increasing_chains(nxt, r):
            yield (s,) + tail


@functools.lru_cache(maxsize=None)
def _w_exact(s: int, r: int, n: int) -> Fraction:
    if s == r:
        return Fraction(1)
    total = Fraction(0)
    for chain in increasing_chains(s, r):
        prod = Fraction(1)
        for a, b in zip(chain, chain[1:]):
            prod *= _mu_exact(a, b, n)
        total += (-1) ** len(chain) * prod
    return (-1) ** (r - s + 1) * total


def w_weight(s: int, r: int, n: int) -> float:
    """Signed sum over increasing chains from ``s`` to ``r`` of products of mu weights; ``w_{r,r} = 1``."""
    if not 0 <= s <= r <= n:
        raise RangeError(f"need 0 <= s <= r <= n, got s={s}, r={r}, n={n}")
    return float(_w_exact(s, r, n))


# -- A5 / A6 checks -----------------------------------------------------------

def _worst(diff: np.ndarray, n: int, r: int) -> tuple:
    flat = int(np.argmax(np.abs(diff)))
    idx = np.unravel_index(flat, diff.shape)
    return tuple(int(x) + 1 for x in idx[:r]), tuple(int(x) + 1 for x in idx[r:])


def check_symmetric_double(z: np.ndarray, tol: float | None = None) -> None:
    """Raise unless ``z`` is invariant under permuting axes within each index group."""
    r, n = double_order(z)
    scale = float(np.max(np.abs(z))) if z.size else 0.0
    tol = 1e-9 * scale if tol is None else tol
    for perm in itertools.permutations(range(r)):
        for axes in (list(perm) + list(range(r, 2 * r)), list(range(r)) + [r + x for x in perm]):
            diff = z - np.transpose(z, axes)
            if np.max(np.abs(diff)) > tol:
                i, p = _worst(diff, n, r)
                raise NotSymmetricError(f"not symmetric within index groups; worst at i={i}, p={p}", i=i, p=p)


def check_vanishing_diagonal(z: np.ndarray, tol: float | None = None) -> None:
    r, n = double_order(z)
    scale = float(np.max(np.abs(z))) if z.size else 0.0
    tol = 1e-9 * scale if tol is None else tol
    mask = injective_mask(n, r)
    support = mask.reshape(mask.shape + (1,) * r) & mask.reshape((1,) * r + mask.shape)
    off = np.where(support, 0.0, z)
    if off.size and np.max(np.abs(off)) > tol:
        i, p = _worst(off, n, r)
        raise DiagonalError(f"nonzero entry at non-injective index; worst at i={i}, p={p}", i=i, p=p)


def symmetrize_double(z: np.ndarray) -> np.ndarray:
    """Average over axis permutations within each group, then zero non-injective entries."""
    r, n = double_order(z)
    out = np.zeros_like(z, dtype=float)
    perms = list(itertools.permutations(range(r)))
    for a in perms:
        for b in perms:
            out += np.transpose(z, list(a) + [r + x for x in b])
    out /= len(perms) ** 2
    mask = injective_mask(n, r)
    return out * (mask.reshape(mask.shape + (1,) * r) & mask.reshape((1,) * r + mask.shape))


# -- statistics ---------------------------------------------------------------

def _all_indices(n: int, r: int) -> np.ndarray:
    return np.indices((n,) * r).reshape(r, -1).T


def _gather_sum(z: np.ndarray, rows: np.ndarray, perms: np.ndarray) -> np.ndarray:
    """``sum_{i in rows} z(i, pi o i)`` for each permutation in ``perms`` (shape ``(P, n)``)."""
    r, n = double_order(z)
    if rows.shape[0] == 0:
        return np.zeros(perms.shape[0])
    weights = n ** np.arange(r - 1, -1, -1)
    left = rows @ weights
    right = perms[:, rows] @ weights  # (P, T)
    flat = z.reshape(n**r, n**r)
    return flat[left[None, :], right].sum(axis=1)


def evaluate_z(z: np.ndarray, pi: Sequence[int]) -> float:
    """``Z = sum_{i in [n]^r} z(i, pi o i)`` with ``pi`` 0-based."""
    z = np.asarray(z, dtype=float)
    r, n = double_order(z)
    pi = check_permutation(pi, n)
    return float(_gather_sum(z, _all_indices(n, r), pi[None, :])[0])


def evaluate_w(components: Sequence[tuple[float, np.ndarray]], pi: Sequence[int]) -> float:
    """``sum_s weight_s * sum_{i injective} xi_s(i, pi o i)``."""
    total = 0.0
    for weight, xi in components:
        xi = np.asarray(xi, dtype=float)
        s, n = double_order(xi)
        p = check_permutation(pi, n)
        total += weight * float(_gather_sum(xi, injective_tuples(n, s), p[None, :])[0])
    return total


@dataclass(frozen=True)
class DecompositionResult:
    r: int
    n: int
    components: tuple[tuple[float, np.ndarray], ...]  # (n^{r-s} w_{s,r}, H[zeta_s]) for s = 1..r
    constant: float

    def evaluate(self, pi) -> float:
        return evaluate_w(self.components, pi) + self.constant

    def evaluate_many(self, perms: np.ndarray) -> np.ndarray:
        perms = np.asarray(perms, dtype=np.intp)
        out = np.full(perms.shape[0], self.constant)
        for weight, xi in self.components:
            s, n = double_order(xi)
            out += weight * _gather_sum(xi, injective_tuples(n, s), perms)
        return out


def decompose_z(z: np.ndarray, tol: float | None = None) -> DecompositionResult:
    z = np.asarray(z, dtype=float)
    r, n = double_order(z)
    if r < 1:
        raise DimensionError("decomposition needs order r >= 1")
    check_symmetric_double(z, tol)
    check_vanishing_diagonal(z, tol)
    comps = []
    for s in range(1, r + 1):
        trailing = tuple(range(s, r)) + tuple(range(r + s, 2 * r))
        zeta_s = z.mean(axis=trailing) if trailing else z
        comps.append((float(n) ** (r - s) * w_weight(s, r, n), hoeffding_double(zeta_s)))
    constant = float(n) ** r * w_weight(0, r, n) * float(z.mean())
    return DecompositionResult(r, n, tuple(comps), constant)


def verify_exhaustive(z: np.ndarray, result: DecompositionResult | None = None, block: int = 2048) -> dict:
    """Check ``Z = W + constant`` for every permutation; returns counts and worst relative error."""
    z = np.asarray(z, dtype=float)
    r, n = double_order(z)
    result = decompose_z(z) if result is None else result
    rows = _all_indices(n, r)
    worst, checked, failures = 0.0, 0, 0
    perms_iter = itertools.permutations(range(n))
    while True:
        chunk = list(itertools.islice(perms_iter, block))
        if not chunk:
            break
        perms = np.array(chunk, dtype=np.intp)
        zval = _gather_sum(z, rows, perms)
        wval = result.evaluate_many(perms)
        err = np.abs(zval - wval) / (1.0 + np.abs(zval))
        worst = max(worst, float(err.max()))
        failures += int(np.sum(err > 1e-9))
        checked += len(chunk)
    return {"permutations": checked, "failures": failures, "max_relative_error": worst}


# -- finite population statistics -----------------------------------------------

def alpha_coefficient(s: int, l: int, d: int) -> float:
    """Weight applied to first indices with ``l`` distinct entries in the order-``s`` component."""
    if not 1 <= l <= s:
        raise RangeError(f"need 1 <= l <= s, got l={l}, s={s}")
    value = 1.0 / math.factorial(s)
    for k in range(1, s - l + 1):
        value *= 1.0 - d / (s - k)
    return value


def _check_population_component(g: np.ndarray, s: int, n: int, tol: float) -> None:
    if np.shape(g) != (n,) * s:
        raise DimensionError(f"g_{s} must have shape {(n,) * s}, got {np.shape(g)}")
    for perm in itertools.permutations(range(s)):
        if np.max(np.abs(g - np.transpose(g, perm))) > tol:
            raise NotHoeffdingError(f"g_{s} is not symmetric")
    if s >= 2 and np.max(np.abs(np.where(injective_mask(n, s), 0.0, g))) > tol:
        raise NotHoeffdingError(f"g_{s} has a nonzero diagonal")
    if np.max(np.abs(g.sum(axis=-1))) > tol * n:
        raise NotHoeffdingError(f"g_{s} does not sum to zero along its last slot")


def finite_population_transform(g: Sequence[np.ndarray], n: int, tol: float = 1e-9) -> list[np.ndarray]:
    """Hoeffding components whose W-statistic equals ``T - E[T]`` for ``T = t(pi(1), ..., pi(d))``.

    ``g[s-1]`` is the order-``s`` piece of the centered kernel over ``[n]^s``.
    """
    d = len(g)
    if d < 1 or n < d:
        raise RangeError(f"need 1 <= d <= n, got d={d}, n={n}")
    out = []
    for s, gs in enumerate(g, start=1):
        gs = np.asarray(gs, dtype=float)
        scale = max(1.0, float(np.max(np.abs(gs)))) if gs.size else 1.0
        _check_population_component(gs, s, n, tol * scale)
        if s == 1:
            ind = (np.arange(n) < d).astype(float) - d / n
            out.append(np.multiply.outer(ind, gs))
            continue
        grid = np.indices((n,) * s)
        distinct = np.zeros((n,) * s, dtype=int)
        for v in range(d):
            distinct += np.any(grid == v, axis=0)
        inside = np.all(grid < d, axis=0)
        coef = np.zeros((n,) * s)
        for l in range(1, s + 1):
            coef[inside & (distinct == l)] = alpha_coefficient(s, l, d)
        out.append(np.multiply.outer(coef, gs))
    return out


def population_statistic(t: np.ndarray, pi: Sequence[int]) -> float:
    """``T = t(pi(1), ..., pi(d))`` with 0-based ``pi``."""
    d, n = dense_order(t)
    pi = check_permutation(pi, n)
    return float(np.asarray(t)[tuple(pi[:d])])


def check_components_hoeffding(components: Sequence[np.ndarray], tol: float | None = None) -> bool:
    return all(is_hoeffding(xi, tol) for xi in components)
