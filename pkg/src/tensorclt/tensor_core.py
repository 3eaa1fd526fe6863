"""Index arithmetic, symmetric coefficient storage and the pair-equivalence relation.

Conventions
-----------
* Multi-indices passed to the functions in this module are 1-based tuples,
  ``i = (i_1, ..., i_s)`` with entries in ``1..n``.
* Dense tensors are plain ``numpy`` arrays of shape ``(n,) * s``; a doubly
  indexed tensor over ``[n]^s x [n]^s`` is an array of shape ``(n,) * (2 * s)``
  whose first ``s`` axes carry the first index group.  Array offsets are
  0-based, as usual.
* Permutations of ``[n]`` are 0-based integer arrays ``pi`` with
  ``pi[x] = pi(x)``; files use 1-based lists.
"""

from __future__ import annotations

import functools
import itertools
import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DimensionError, ParseError, PermutationError, RangeError, SpecError

MultiIndex = tuple[int, ...]
PairPartition = frozenset  # frozenset[frozenset[tuple[int, int]]]


def check_index(i: Sequence[int], n: int, length: int | None = None) -> MultiIndex:
    i = tuple(int(x) for x in i)
    if length is not None and len(i) != length:
        raise DimensionError(f"index {i} has length {len(i)}, expected {length}")
    for x in i:
        if not 1 <= x <= n:
            raise RangeError(f"index entry {x} outside [1, {n}]")
    return i


def is_injective(i: Sequence[int]) -> bool:
    return len(set(i)) == len(i)


@functools.lru_cache(maxsize=64)
def injective_tuples(n: int, s: int) -> np.ndarray:
    """All injective tuples in ``[n]^s`` as a read-only ``(T, s)`` array of 0-based offsets.

    Rows are in lexicographic order; for ``s = 0`` there is a single empty row.
    """
    rows = list(itertools.permutations(range(n), s))
    out = np.array(rows, dtype=np.intp).reshape(len(rows), s)
    out.setflags(write=False)
    return out


def injective_mask(n: int, s: int) -> np.ndarray:
    """Boolean array over ``[n]^s`` that is True exactly on injective indices."""
    mask = np.ones((n,) * s, dtype=bool)
    grids = np.indices((n,) * s) if s else []
    for a, b in itertools.combinations(range(s), 2):
        mask &= grids[a] != grids[b]
    return mask


def dense_order(a: np.ndarray) -> tuple[int, int]:
    """Return ``(s, n)`` for a dense tensor over ``[n]^s``."""
    a = np.asarray(a)
    if a.ndim == 0:
        return 0, 0
    n = a.shape[0]
    if any(m != n for m in a.shape):
        raise DimensionError(f"tensor shape {a.shape} is not of the form (n,)*s")
    return a.ndim, n


def double_order(z: np.ndarray) -> tuple[int, int]:
    """Return ``(s, n)`` for a doubly indexed tensor over ``[n]^s x [n]^s``."""
    z = np.asarray(z)
    if z.ndim % 2:
        raise DimensionError(f"doubly indexed tensor needs an even number of axes, got {z.ndim}")
    if z.ndim == 0:
        return 0, 0
    _, n = dense_order(z)
    return z.ndim // 2, n


def check_permutation(pi: Sequence[int], n: int | None = None) -> np.ndarray:
    """Validate a 0-based permutation array and return it as ``intp``."""
    pi = np.asarray(pi)
    if pi.ndim != 1 or (n is not None and pi.size != n):
        raise PermutationError(f"permutation must be a length-{n} vector")
    if not np.issubdtype(pi.dtype, np.integer):
        raise PermutationError("permutation entries must be integers")
    if not np.array_equal(np.sort(pi), np.arange(pi.size)):
        raise PermutationError(f"{pi.tolist()} is not a bijection of 0..{pi.size - 1}")
    return pi.astype(np.intp)


def _subset_key(key) -> tuple[int, ...]:
    if isinstance(key, str):
        try:
            parts = [int(tok) for tok in key.split(",") if tok.strip()]
        except ValueError as exc:
            raise SpecError(f"bad coefficient key {key!r}") from exc
    else:
        parts = [int(x) for x in key]
    return tuple(sorted(parts))


@dataclass(frozen=True)
class SymmetricCoefficients:
    """Set-indexed coefficients ``a_F`` for ``F`` a ``d``-subset of ``[n]``.

    The associated tensor ``theta`` over ``[n]^d`` is ``theta_i = a_{Im(i)}`` for
    injective ``i`` and ``0`` otherwise, so it is symmetric with vanishing
    diagonal by construction.  Absent keys mean ``a_F = 0``.
    """

    n: int
    d: int
    values: Mapping[tuple[int, ...], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.d < 1 or self.n < self.d:
            raise RangeError(f"need 1 <= d <= n, got n={self.n}, d={self.d}")
        clean: dict[tuple[int, ...], float] = {}
        for key, val in dict(self.values).items():
            F = _subset_key(key)
            if len(F) != self.d or len(set(F)) != self.d:
                raise DimensionError(f"key {key!r} is not a {self.d}-subset")
            check_index(F, self.n)
            val = float(val)
            if val != 0.0:
                clean[F] = clean.get(F, 0.0) + val
        object.__setattr__(self, "values", clean)

    def __getitem__(self, F) -> float:
        return self.values.get(_subset_key(F), 0.0)

    @cached_property
    def theta(self) -> np.ndarray:
        """Dense expansion over ``[n]^d`` (read-only)."""
        out = np.zeros((self.n,) * self.d)
        for F, val in self.values.items():
            for perm in itertools.permutations(F):
                out[tuple(x - 1 for x in perm)] = val
        out.setflags(write=False)
        return out

    def scaled(self, factor: float) -> SymmetricCoefficients:
        return SymmetricCoefficients(self.n, self.d, {F: factor * v for F, v in self.values.items()})

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "coefficients": {",".join(map(str, F)): v for F, v in sorted(self.values.items())},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> SymmetricCoefficients:
        unknown = set(data) - {"n", "d", "coefficients"}
        if unknown:
            raise SpecError(f"unknown keys in coefficient file: {sorted(unknown)}")
        try:
            return cls(int(data["n"]), int(data["d"]), dict(data.get("coefficients", {})))
        except KeyError as exc:
            raise SpecError(f"coefficient file missing {exc.args[0]!r}") from exc

    @classmethod
    def load(cls, path: str | Path) -> SymmetricCoefficients:
        return cls.from_dict(read_json(path))


def expand_symmetric(c: SymmetricCoefficients, i: Sequence[int]) -> float:
    """``theta_i`` for the expansion of ``c``: ``a_{Im(i)}`` if ``i`` is injective, else 0."""
    i = check_index(i, c.n, c.d)
    if not is_injective(i):
        return 0.0
    return c.values.get(tuple(sorted(i)), 0.0)


def pair_partition(i: Sequence[int], j: Sequence[int]) -> PairPartition:
    """Partition of the tagged positions ``{0,1} x [s]`` grouped by shared value.

    Position ``(0, u)`` stands for ``i(u)`` and ``(1, v)`` for ``j(v)``; positions
    are 1-based.  Two positions share a cell iff they carry the same value.
    """
    i, j = tuple(i), tuple(j)
    if len(i) != len(j):
        raise DimensionError(f"length mismatch: {len(i)} vs {len(j)}")
    cells: dict[int, set] = {}
    for u, x in enumerate(i, start=1):
        cells.setdefault(x, set()).add((0, u))
    for v, x in enumerate(j, start=1):
        cells.setdefault(x, set()).add((1, v))
    return frozenset(frozenset(c) for c in cells.values())


def pair_equivalent(i, j, p, q) -> bool:
    """True iff some permutation ``pi`` of ``[n]`` has ``p = pi o i`` and ``q = pi o j``."""
    lengths = {len(i), len(j), len(p), len(q)}
    if len(lengths) != 1:
        raise DimensionError(f"indices of different lengths {sorted(lengths)}")
    return pair_partition(i, j) == pair_partition(p, q)


# -- file helpers ------------------------------------------------------

def read_json(path: str | Path):
    from .errors import InputOutputError

    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputOutputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", line=exc.lineno, column=exc.colno) from exc


def double_tensor_from_dict(data: Mapping) -> np.ndarray:
    """Parse ``{"n": int, "s": int, "values": nested row-major array}``."""
    unknown = set(data) - {"n", "s", "values"}
    if unknown:
        raise SpecError(f"unknown keys in tensor file: {sorted(unknown)}")
    try:
        n, s = int(data["n"]), int(data["s"])
        values = np.asarray(data["values"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"malformed tensor file: {exc}") from exc
    if values.size != n ** (2 * s):
        raise DimensionError(f"expected {n ** (2 * s)} values, got {values.size}")
    return values.reshape((n,) * (2 * s))


def double_tensor_to_dict(z: np.ndarray) -> dict:
    s, n = double_order(z)
    return {"n": n, "s": s, "values": np.asarray(z).tolist()}


def factorial_ratio(n: int, k: int) -> int:
    """Falling factorial ``n (n-1) ... (n-k+1)``."""
    return math.perm(n, k) if 0 <= k <= n else 0
