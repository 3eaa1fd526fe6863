"""Exact and sampled laws, distances to the normal law, and brute-force identity checks."""

from __future__ import annotations

import itertools
import math
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .coefficients import DeltaVector, gamma, variance_direct, variance_formula
from .decomposition import DecompositionResult, _gather_sum
from .errors import EmptyError, NotNormalizedError, RangeError, ScaleError
from .hoeffding import hoeffding_double
from .models import enumerate_exchangeable_pairs, transpose_compose
from .tensor_core import SymmetricCoefficients, double_order, injective_tuples

COLLAPSE_TOL = 1e-12
MAX_WSTAT_N = 8
SLICE_BUDGET = 200_000


def normal_cdf(x):
    """Standard normal CDF through the complementary error function."""
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(-float(x) / math.sqrt(2.0))
    flat = np.asarray(x, dtype=float).ravel()
    out = np.fromiter((math.erfc(-v / math.sqrt(2.0)) for v in flat), dtype=float, count=flat.size)
    return 0.5 * out.reshape(np.shape(x))


@dataclass(frozen=True)
class EmpiricalDistribution:
    """A finite law: sorted support ``values`` with ``probs`` summing to one.

    Exact laws carry integer ``counts`` over ``total`` outcomes; sample laws put
    mass ``1/m`` on each sorted sample.
    """

    values: np.ndarray
    probs: np.ndarray
    exact: bool = False
    counts: tuple[int, ...] | None = None
    total: int | None = None

    @classmethod
    def from_samples(cls, samples) -> EmpiricalDistribution:
        x = np.sort(np.asarray(samples, dtype=float).ravel())
        if x.size == 0:
            raise EmptyError("no samples")
        return cls(x, np.full(x.size, 1.0 / x.size), exact=False)

    @classmethod
    def from_counts(cls, values, counts, tol: float = COLLAPSE_TOL) -> EmpiricalDistribution:
        values = np.asarray(values, dtype=float).ravel()
        counts = np.asarray(counts, dtype=np.int64).ravel()
        if values.size == 0:
            raise EmptyError("empty support")
        order = np.argsort(values, kind="stable")
        values, counts = values[order], counts[order]
        support, mass = [values[0]], [int(counts[0])]
        for v, c in zip(values[1:], counts[1:]):
            if v - support[-1] <= tol:
                mass[-1] += int(c)
            else:
                support.append(v)
                mass.append(int(c))
        total = sum(mass)
        return cls(
            np.array(support),
            np.array(mass, dtype=float) / total,
            exact=True,
            counts=tuple(mass),
            total=total,
        )

    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    def variance(self) -> float:
        mu = self.mean()
        return float(np.dot((self.values - mu) ** 2, self.probs))

    def to_rows(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.probs.tolist()))


def kolmogorov_distance(dist: EmpiricalDistribution, mu: float = 0.0, sigma2: float = 1.0) -> float:
    """``sup_x |P(X <= x) - Phi((x - mu)/sigma)|``; exact for finite laws."""
    if sigma2 <= 0:
        raise RangeError("sigma2 must be positive")
    if dist.values.size == 0:
        raise EmptyError("empty distribution")
    phi = normal_cdf((dist.values - mu) / math.sqrt(sigma2))
    upper = np.cumsum(dist.probs)
    upper[-1] = 1.0
    lower = np.concatenate(([0.0], upper[:-1]))
    return float(max(np.max(np.abs(upper - phi)), np.max(np.abs(lower - phi))))


def levy_concentration(dist: EmpiricalDistribution, eps: float) -> float:
    """``sup_x P(x <= X <= x + eps)``; the supremum is attained with ``x`` on the support."""
    if eps < 0:
        raise RangeError("eps must be nonnegative")
    if dist.values.size == 0:
        raise EmptyError("empty distribution")
    cum = np.concatenate(([0.0], np.cumsum(dist.probs)))
    right = np.searchsorted(dist.values, dist.values + eps + COLLAPSE_TOL, side="right")
    left = np.arange(dist.values.size)
    return float(min(1.0, np.max(cum[right] - cum[left])))


def dkw_radius(M: int, confidence: float = 0.999) -> float:
    """Radius ``r`` with ``P(sup |F_M - F| > r) <= 1 - confidence``."""
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * M))


# -- exact laws ---------------------------------------------------------------

def _weighted(components) -> list[tuple[float, np.ndarray]]:
    if isinstance(components, DecompositionResult):
        return list(components.components)
    out = []
    for c in components:
        if isinstance(c, tuple):
            out.append((float(c[0]), np.asarray(c[1], dtype=float)))
        else:
            out.append((1.0, np.asarray(c, dtype=float)))
    return out


def wstat_values(components, perms: np.ndarray) -> np.ndarray:
    """W-statistic for each row of ``perms`` (0-based permutations)."""
    perms = np.asarray(perms, dtype=np.intp)
    out = np.zeros(perms.shape[0])
    for weight, xi in _weighted(components):
        s, n = double_order(xi)
        out += weight * _gather_sum(xi, injective_tuples(n, s), perms)
    return out


def exact_wstat_distribution(components, n: int, block: int = 5040) -> EmpiricalDistribution:
    if n > MAX_WSTAT_N:
        raise ScaleError(f"exact enumeration supports n <= {MAX_WSTAT_N}, got {n}")
    comps = _weighted(components)
    if not comps:
        return EmpiricalDistribution.from_counts([0.0], [math.factorial(n)])
    values = []
    it = itertools.permutations(range(n))
    while True:
        chunk = list(itertools.islice(it, block))
        if not chunk:
            break
        values.append(wstat_values(comps, np.array(chunk)))
    vals = np.concatenate(values)
    return EmpiricalDistribution.from_counts(vals, np.ones(vals.size, dtype=np.int64))


def simulate_wstat(components, M: int, seed: int, chunk_size: int = 10_000) -> np.ndarray:
    comps = _weighted(components)
    n = double_order(comps[0][1])[1]
    sizes = [chunk_size] * (M // chunk_size) + ([M % chunk_size] if M % chunk_size else [])
    parts = []
    for child, size in zip(np.random.SeedSequence(seed).spawn(len(sizes)), sizes):
        rng = np.random.default_rng(child)
        perms = rng.permuted(np.tile(np.arange(n), (size, 1)), axis=1)
        parts.append(wstat_values(comps, perms))
    return np.concatenate(parts)


def exact_slice_distribution(c: SymmetricCoefficients, k: int, budget: int = SLICE_BUDGET) -> EmpiricalDistribution:
    """Law of ``f(xi) = sum_F a_F prod_{i in F} xi_i`` for ``xi`` uniform on the ``k``-slice."""
    n = c.n
    if not 0 <= k <= n:
        raise RangeError(f"k={k} outside [0, {n}]")
    size = math.comb(n, k)
    if size > budget:
        raise ScaleError(f"C({n},{k}) = {size} exceeds budget {budget}")
    points = np.zeros((size, n), dtype=bool)
    for row, S in enumerate(itertools.combinations(range(n), k)):
        points[row, list(S)] = True
    f = np.zeros(size)
    for F, a in c.values.items():
        f += a * np.all(points[:, [x - 1 for x in F]], axis=1)
    return EmpiricalDistribution.from_counts(f, np.ones(size, dtype=np.int64))


def zero_inflated_sum_distribution(eps: float, k: int) -> EmpiricalDistribution:
    """Exact law of ``(X_1 + ... + X_k)/sqrt(k)`` for the zero-or-scaled-Rademacher mixture."""
    if not 0 < eps <= 0.5 or k < 1:
        raise RangeError("need 0 < eps <= 1/2 and k >= 1")
    # integer weights: scale probabilities by a common denominator to stay exact
    scale = 2**k
    denom = 10**12
    w_zero = round(eps * denom)
    values = [0.0]
    counts = [w_zero * scale]
    for j in range(k + 1):
        values.append((2 * j - k) / math.sqrt(k * (1 - eps)))
        counts.append((denom - w_zero) * math.comb(k, j))
    return EmpiricalDistribution.from_counts(values, counts)


# -- random Hoeffding tensors ------------------------------------------------------

def random_hoeffding(n: int, s: int, rng: np.random.Generator) -> np.ndarray:
    return hoeffding_double(rng.standard_normal((n,) * (2 * s)))


def normalize_first(xi1: np.ndarray) -> np.ndarray:
    """Rescale so that the sum of squares equals ``n - 1``."""
    n = xi1.shape[0]
    norm2 = float(np.sum(xi1**2))
    if norm2 == 0:
        raise NotNormalizedError("cannot normalize a zero tensor")
    return xi1 * math.sqrt((n - 1) / norm2)


# -- verification harnesses ------------------------------------------------------

def verify_pair(n: int) -> dict:
    """Integer-count checks that the transposition pair is built from independent, uniform pieces and is exchangeable."""
    if n > 6:
        raise ScaleError("pair enumeration supports n <= 6")
    joint_pi1_I = Counter()
    joint_pi2_I = Counter()
    pair = Counter()
    for pi1, i1, i2, pi2 in enumerate_exchangeable_pairs(n):
        a, b = tuple(pi1.tolist()), tuple(pi2.tolist())
        joint_pi1_I[(a, i1, i2)] += 1
        joint_pi2_I[(b, i1, i2)] += 1
        pair[(a, b)] += 1
    n_perm = math.factorial(n)
    cells = n_perm * n * n
    # independence with uniform marginals: every (perm, I1, I2) cell has the same count
    e1 = len(joint_pi1_I) == cells and set(joint_pi1_I.values()) == {1}
    e2 = len(joint_pi2_I) == cells and set(joint_pi2_I.values()) == {1}
    marg2 = Counter()
    for (b, _, _), c in joint_pi2_I.items():
        marg2[b] += c
    e3 = len(marg2) == n_perm and set(marg2.values()) == {n * n}
    e4 = all(pair[(a, b)] == pair[(b, a)] for (a, b) in pair)
    checks = {
        "pi1_independent_of_I": e1,
        "pi2_independent_of_I": e2,
        "pi2_uniform": e3,
        "pair_exchangeable": e4,
    }
    return {"n": n, "outcomes": cells, "checks": checks, "passed": all(checks.values())}


def _perm_rank_table(n: int):
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    index = {tuple(p): r for r, p in enumerate(perms.tolist())}
    return perms, index


def verify_identities(components: Sequence[np.ndarray], n: int | None = None, rel_tol: float = 1e-9) -> dict:
    """Exact enumeration of the exchangeable pair ``(Xi_s, Xi_s')`` for ``xi_1, ..., xi_d``."""
    comps = [np.asarray(x, dtype=float) for x in components]
    n = double_order(comps[0])[1] if n is None else n
    if n > 6:
        raise ScaleError("identity enumeration supports n <= 6")
    beta1 = float(np.sum(comps[0] ** 2))
    if abs(beta1 - (n - 1)) > 1e-9 * max(1, n - 1):
        raise NotNormalizedError(f"sum of squares of xi_1 is {beta1}, expected {n - 1}")
    perms, index = _perm_rank_table(n)
    # image of each permutation under every transposition (i1, i2)
    partner = np.empty((len(perms), n, n), dtype=np.intp)
    for r, p in enumerate(perms):
        for i1 in range(n):
            for i2 in range(n):
                partner[r, i1, i2] = index[tuple(transpose_compose(p, i1, i2).tolist())]
    checks = {}

    def close(a, b):
        return abs(a - b) <= rel_tol * max(1.0, abs(b))

    Xi = [_gather_sum(xi, injective_tuples(n, s), perms) for s, xi in enumerate(comps, start=1)]
    X1 = Xi[0]
    diff1 = X1[:, None, None] - X1[partner]
    lam = float(np.sum(np.abs(comps[0]) ** 3))
    mean_sq = float(np.mean(X1**2))
    cond = diff1.mean(axis=(1, 2))
    checks["mean_zero"] = {"value": float(X1.mean()), "target": 0.0, "passed": close(float(X1.mean()), 0.0)}
    checks["second_moment"] = {"value": mean_sq, "target": 1.0, "passed": close(mean_sq, 1.0)}
    worst = float(np.max(np.abs(cond - 2.0 / n * X1)))
    checks["conditional_drift"] = {"value": worst, "target": 0.0, "passed": worst <= rel_tol * max(1.0, float(np.max(np.abs(X1))))}
    m2 = float(np.mean(diff1**2))
    checks["pair_second_moment"] = {"value": m2, "target": 4.0 / n, "passed": close(m2, 4.0 / n)}
    m3 = float(np.mean(np.abs(diff1) ** 3))
    checks["pair_third_moment"] = {"value": m3, "bound": 64 * lam / n**2, "passed": m3 <= 64 * lam / n**2 * (1 + rel_tol)}
    for s in range(2, len(comps) + 1):
        Xs = Xi[s - 1]
        beta = float(np.sum(comps[s - 1] ** 2))
        const = math.exp(2 * s) * math.factorial(2 * s) ** 2
        v2 = float(np.mean(Xs**2))
        b2 = 2 * const * beta / n**s
        d2 = float(np.mean((Xs[:, None, None] - Xs[partner]) ** 2))
        bd = 24 * s**4 * const * beta / n ** (s + 1)
        checks[f"order{s}_second_moment"] = {"value": v2, "bound": b2, "passed": v2 <= b2 * (1 + rel_tol)}
        checks[f"order{s}_pair_second_moment"] = {"value": d2, "bound": bd, "passed": d2 <= bd * (1 + rel_tol)}
    return {
        "n": n,
        "d": len(comps),
        "Lambda": lam,
        "checks": checks,
        "passed": all(c["passed"] for c in checks.values()),
    }


def verify_gamma(rmax: int = 10) -> dict:
    rows = []
    for r in range(rmax + 1):
        for s in range(r + 1):
            a, b = gamma(s, r, "closed"), gamma(s, r, "recursive")
            rows.append({"s": s, "r": r, "closed": a, "recursive": b, "match": a == b})
    matches = sum(row["match"] for row in rows)
    return {"rmax": rmax, "pairs": len(rows), "matches": matches, "passed": matches == len(rows), "rows": rows}


def random_coefficients(n: int, d: int, rng: np.random.Generator, density: float = 1.0) -> SymmetricCoefficients:
    values = {}
    for F in itertools.combinations(range(1, n + 1), d):
        if rng.random() < density:
            values[F] = float(rng.standard_normal())
    return SymmetricCoefficients(n, d, values)


def verify_variance(instances: int = 100, seed: int = 0, max_d: int = 3, max_n: int = 8, rel_tol: float = 1e-10) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    failures = 0
    for _ in range(instances):
        d = int(rng.integers(1, max_d + 1))
        n = int(rng.integers(max(d, 2), max_n + 1))
        c = random_coefficients(n, d, rng)
        dv = DeltaVector(tuple(rng.uniform(-1, 1, size=d + 1)))
        a, b = variance_formula(c, dv), variance_direct(c, dv)
        err = abs(a - b) / max(abs(b), 1.0)
        worst = max(worst, err)
        failures += err > rel_tol
    return {"instances": instances, "seed": seed, "max_relative_error": worst, "failures": failures, "passed": failures == 0}
