"""Seminorms, the gamma constants, Sigma-from-delta and the variance formula."""

from __future__ import annotations

import functools
import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, RangeError, ScaleError
from .tensor_core import SymmetricCoefficients, injective_tuples

DEFAULT_BUDGET = 10**8
GAMMA_MAX_R = 20


@dataclass(frozen=True)
class SeminormProfile:
    d: int
    values: tuple[float, ...]  # index s = 0..d
    row_cubic: float


@dataclass(frozen=True)
class DeltaVector:
    delta: tuple[float, ...]  # delta_0..delta_d

    def __post_init__(self):
        object.__setattr__(self, "delta", tuple(float(x) for x in self.delta))
        if not self.delta:
            raise DimensionError("delta vector must have at least one entry")
        bad = [t for t, x in enumerate(self.delta) if abs(x) > 1.0 + 1e-12]
        if bad:
            warnings.warn(
                f"delta_t outside [-1, 1] for t in {bad}; such values cannot come from a normalized tensor",
                RuntimeWarning,
                stacklevel=3,
            )

    @property
    def d(self) -> int:
        return len(self.delta) - 1


@dataclass(frozen=True)
class SigmaVector:
    sigma: tuple[float, ...]

    @property
    def d(self) -> int:
        return len(self.sigma) - 1


def _as_delta(dv) -> DeltaVector:
    return dv if isinstance(dv, DeltaVector) else DeltaVector(tuple(dv))


# -- seminorms ----------------------------------------------------------

def _check_s(s: int, d: int) -> int:
    s = int(s)
    if not 0 <= s <= d:
        raise RangeError(f"s={s} outside [0, {d}]")
    return s


def seminorm(c: SymmetricCoefficients, s: int) -> float:
    s = _check_s(s, c.d)
    partial = c.theta.sum(axis=tuple(range(s, c.d))) if s < c.d else c.theta
    return float(np.sqrt(np.sum(np.square(partial))))


def set_seminorm(c: SymmetricCoefficients, s: int) -> float:
    s = _check_s(s, c.d)
    acc: dict[tuple[int, ...], float] = {}
    for F, val in c.values.items():
        for G in itertools.combinations(F, s):
            acc[G] = acc.get(G, 0.0) + val
    return math.sqrt(sum(v * v for v in acc.values()))


def row_cubic(c: SymmetricCoefficients) -> float:
    rows = c.theta.sum(axis=tuple(range(1, c.d)))
    return float(np.sum(np.abs(rows) ** 3))


def set_row_cubic(c: SymmetricCoefficients) -> float:
    """``sum_j |sum_{F containing j} a_F|^3``."""
    rows = np.zeros(c.n)
    for F, val in c.values.items():
        for j in F:
            rows[j - 1] += val
    return float(np.sum(np.abs(rows) ** 3))


def seminorm_profile(c: SymmetricCoefficients) -> SeminormProfile:
    return SeminormProfile(c.d, tuple(seminorm(c, s) for s in range(c.d + 1)), row_cubic(c))


def seminorm_from_set(d: int, s: int, set_value: float) -> float:
    """Convert a set-indexed seminorm of ``a`` to the tensor seminorm of its expansion ``theta_i = a_{Im(i)}``."""
    return math.factorial(d - s) * math.sqrt(math.factorial(s)) * set_value


# -- gamma --------------------------------------------------------------

def _check_sr(s: int, r: int) -> None:
    if not 0 <= s <= r:
        raise RangeError(f"need 0 <= s <= r, got s={s}, r={r}")
    if r > GAMMA_MAX_R:
        raise RangeError(f"r={r} exceeds the supported maximum {GAMMA_MAX_R}")


@functools.lru_cache(maxsize=None)
def _gamma_column(r: int) -> tuple[int, ...]:
    g = [0] * (r + 1)
    g[r] = 1
    for s in range(r, 0, -1):
        g[s - 1] = -sum(math.comb(x, s - 1) * g[x] for x in range(s, r + 1))
    return tuple(g)


def gamma(s: int, r: int, method: str = "closed") -> int:
    s, r = int(s), int(r)
    _check_sr(s, r)
    if method == "closed":
        return (-1) ** (r - s) * math.comb(r, s)
    if method == "recursive":
        return _gamma_column(r)[s]
    raise ValueError(f"unknown method {method!r}")


# -- variance -----------------------------------------------------------

def sigma_from_delta(dv) -> SigmaVector:
    delta = _as_delta(dv).delta
    out = []
    for s in range(len(delta)):
        out.append(sum(math.comb(s, t) * (-1) ** (s - t) * delta[t] for t in range(s + 1)))
    return SigmaVector(tuple(float(x) for x in out))


def variance_formula(c: SymmetricCoefficients, dv) -> float:
    dv = _as_delta(dv)
    if dv.d != c.d:
        raise DimensionError(f"delta has order {dv.d}, coefficients have order {c.d}")
    sig = sigma_from_delta(dv).sigma
    d = c.d
    return float(
        sum(math.comb(d, s) ** 2 * math.factorial(s) * sig[s] * seminorm(c, s) ** 2 for s in range(d + 1))
    )


def variance_direct(c: SymmetricCoefficients, dv, budget: int = DEFAULT_BUDGET) -> float:
    """Brute-force ``sum_{i,j injective} theta_i theta_j delta_{|Im i & Im j|}``."""
    dv = _as_delta(dv)
    if dv.d != c.d:
        raise DimensionError(f"delta has order {dv.d}, coefficients have order {c.d}")
    if c.n ** (2 * c.d) > budget:
        raise ScaleError(f"n^(2d) = {c.n ** (2 * c.d)} index pairs exceeds budget {budget}")
    idx = injective_tuples(c.n, c.d)
    vals = c.theta[tuple(idx.T)]
    keep = vals != 0
    idx, vals = idx[keep], vals[keep]
    delta = np.asarray(dv.delta)
    total = 0.0
    block = max(1, 2_000_000 // max(1, len(idx) * c.d * c.d))
    for start in range(0, len(idx), block):
        rows = idx[start : start + block]
        # injective rows: the number of equal entry pairs is the overlap size
        overlap = (rows[:, None, :, None] == idx[None, :, None, :]).sum(axis=(2, 3))
        total += float(vals[start : start + block] @ (delta[overlap] @ vals))
    return total
