"""Random tensor models, samplers, the exchangeable permutation pair and parameter estimators.

Sampling is batched: ``sample_batch`` returns an array of shape ``(B,) + (n,) * d``
and ``sample_tensor`` is the single-draw convenience wrapper.  Monte Carlo
estimation splits the ``M`` draws into fixed-size chunks, each driven by its
own child of ``numpy.random.SeedSequence(seed)``; results depend only on
``(seed, chunk_size)`` and not on the number of worker threads.
"""

from __future__ import annotations

import itertools
import math
import os
import warnings
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coefficients import DeltaVector, sigma_from_delta
from .errors import NotSymmetricError, RangeError, SmallNError, SpecError
from .tensor_core import injective_mask, read_json

KINDS = ("iid-function", "slice-product", "mixture", "zero-inflated-signs", "perturbed-balanced-signs")
DEFAULT_CHUNK = 10_000


# -- model specification ----------------------------------------------------

def _named_kernel(name: str, d: int) -> np.ndarray:
    grid = np.indices((2,) * d).sum(axis=0) if d else np.zeros(())
    if name == "product":
        signs = np.array([-1.0, 1.0])
        out = np.ones((2,) * d)
        for ax in range(d):
            shape = [1] * d
            shape[ax] = 2
            out = out * signs.reshape(shape)
        return out
    if name == "and":
        return (grid == d).astype(float)
    if name == "majority":
        return np.where(2 * grid > d, 1.0, np.where(2 * grid == d, 0.5, 0.0))
    raise SpecError(f"unknown kernel name {name!r}; expected product, and, majority")


@dataclass(frozen=True)
class ModelSpec:
    """A random tensor model.

    Payloads by kind:

    * ``iid-function``: ``{"probs": [...], "kernel": table | "product" | "and" | "majority",
      "normalize": bool}``.  The table is a symmetric array over ``alphabet^d``;
      named kernels use the binary alphabet ``{0, 1}``.
    * ``slice-product``: ``{"k": int}``; entries are centered products of a uniform
      point of the slice ``{x in {0,1}^n : sum x = k}``.
    * ``mixture``: ``{"weights": [...], "components": [{"kind", "payload"}, ...]}``.
    * ``zero-inflated-signs``: ``{"epsilon": float}`` (``d = 1``).
    * ``perturbed-balanced-signs``: ``{}`` (``d = 1``, ``n`` even, ``n >= 4``).
    """

    kind: str
    n: int
    d: int
    payload: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown model kind {self.kind!r}")
        if self.n < 1 or self.d < 1 or self.n < self.d:
            raise SpecError(f"need 1 <= d <= n, got n={self.n}, d={self.d}")
        object.__setattr__(self, "payload", dict(self.payload))
        getattr(self, "_validate_" + self.kind.replace("-", "_"))()

    # validators cache derived arrays on the instance
    def _validate_iid_function(self):
        p = self.payload
        try:
            probs = np.asarray(p["probs"], dtype=float)
            kernel = p["kernel"]
        except KeyError as exc:
            raise SpecError(f"iid-function payload missing {exc.args[0]!r}") from exc
        if probs.ndim != 1 or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise SpecError("probs must be a nonnegative vector summing to 1")
        table = _named_kernel(kernel, self.d) if isinstance(kernel, str) else np.asarray(kernel, dtype=float)
        if table.shape != (probs.size,) * self.d:
            raise SpecError(f"kernel shape {table.shape} does not match alphabet size {probs.size} and d={self.d}")
        for perm in itertools.permutations(range(self.d)):
            if not np.allclose(table, table.transpose(perm), atol=1e-12):
                raise NotSymmetricError("kernel table is not symmetric")
        mean = table
        for _ in range(self.d):
            mean = np.tensordot(mean, probs, axes=([0], [0]))
        mean = float(mean)
        second = table**2
        for _ in range(self.d):
            second = np.tensordot(second, probs, axes=([0], [0]))
        var = float(second) - mean**2
        scale = 1.0
        if p.get("normalize", False):
            if var <= 0:
                raise SpecError("cannot normalize a constant kernel")
            scale = 1.0 / math.sqrt(var)
        object.__setattr__(self, "_table", (table - mean) * scale)
        object.__setattr__(self, "_probs", probs)

    def _validate_slice_product(self):
        try:
            k = int(self.payload["k"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError("slice-product payload needs integer 'k'") from exc
        if not 0 <= k <= self.n:
            raise SpecError(f"k={k} outside [0, {self.n}]")

    def _validate_mixture(self):
        try:
            weights = np.asarray(self.payload["weights"], dtype=float)
            comps = self.payload["components"]
        except KeyError as exc:
            raise SpecError(f"mixture payload missing {exc.args[0]!r}") from exc
        if weights.ndim != 1 or weights.size != len(comps) or weights.size == 0:
            raise SpecError("mixture needs one weight per component")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise SpecError("mixture weights must be nonnegative and sum to 1")
        models = []
        for c in comps:
            if isinstance(c, ModelSpec):
                sub = c
            else:
                sub = ModelSpec(c.get("kind", ""), self.n, self.d, c.get("payload", {}))
            if (sub.n, sub.d) != (self.n, self.d):
                raise SpecError("mixture components must share n and d")
            models.append(sub)
        object.__setattr__(self, "_components", tuple(models))
        object.__setattr__(self, "_weights", weights)

    def _validate_zero_inflated_signs(self):
        if self.d != 1:
            raise SpecError("zero-inflated-signs is a vector model (d = 1)")
        eps = float(self.payload.get("epsilon", -1))
        if not 0 < eps <= 0.5:
            raise SpecError("epsilon must lie in (0, 1/2]")

    def _validate_perturbed_balanced_signs(self):
        if self.d != 1 or self.n % 2 or self.n < 4:
            raise SpecError("perturbed-balanced-signs needs d = 1 and an even n >= 4")

    def to_dict(self) -> dict:
        payload = dict(self.payload)
        if self.kind == "mixture":
            payload["components"] = [
                c.to_dict() if isinstance(c, ModelSpec) else c for c in self.payload["components"]
            ]
        return {"kind": self.kind, "n": self.n, "d": self.d, "payload": payload}

    @classmethod
    def from_dict(cls, data: Mapping) -> ModelSpec:
        unknown = set(data) - {"kind", "n", "d", "payload"}
        if unknown:
            raise SpecError(f"unknown keys in model file: {sorted(unknown)}")
        try:
            return cls(str(data["kind"]), int(data["n"]), int(data["d"]), data.get("payload", {}))
        except KeyError as exc:
            raise SpecError(f"model file missing {exc.args[0]!r}") from exc

    @classmethod
    def load(cls, path) -> ModelSpec:
        return cls.from_dict(read_json(path))


# -- samplers ---------------------------------------------------------------

def _uniform_slice(rng: np.random.Generator, size: int, n: int, k: int) -> np.ndarray:
    keys = rng.random((size, n))
    ranks = np.argsort(np.argsort(keys, axis=1), axis=1)
    return (ranks < k).astype(float)


def _outer_product_rows(xi: np.ndarray, d: int) -> np.ndarray:
    out = xi
    for _ in range(d - 1):
        out = out[..., None] * xi.reshape(xi.shape[:1] + (1,) * (out.ndim - 1) + xi.shape[1:])
    return out


def slice_moment(n: int, k: int, r: int) -> float:
    """``E[xi_1 ... xi_r]`` for a uniform point of the slice: ``k^(r) / n^(r)`` (falling factorials)."""
    if r > n:
        return 0.0
    return math.perm(k, r) / math.perm(n, r) if r <= k else 0.0


def sample_batch(m: ModelSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    n, d = m.n, m.d
    mask = injective_mask(n, d)
    if m.kind == "iid-function":
        xi = rng.choice(m._probs.size, size=(size, n), p=m._probs)
        idx = []
        for ax in range(d):
            shape = [size] + [1] * d
            shape[ax + 1] = n
            idx.append(xi.reshape(shape))
        return m._table[tuple(idx)] * mask
    if m.kind == "slice-product":
        k = int(m.payload["k"])
        xi = _uniform_slice(rng, size, n, k)
        return (_outer_product_rows(xi, d) - slice_moment(n, k, d)) * mask
    if m.kind == "mixture":
        which = rng.choice(len(m._components), size=size, p=m._weights)
        out = np.zeros((size,) + (n,) * d)
        for c, comp in enumerate(m._components):
            sel = np.flatnonzero(which == c)
            if sel.size:
                out[sel] = sample_batch(comp, rng, sel.size)
        return out
    if m.kind == "zero-inflated-signs":
        eps = float(m.payload["epsilon"])
        alive = rng.random(size) >= eps
        signs = rng.choice(np.array([-1.0, 1.0]), size=(size, n))
        return signs * alive[:, None] / math.sqrt(1.0 - eps)
    if m.kind == "perturbed-balanced-signs":
        half = np.zeros((size, n))
        half[:, : n // 2] = 1.0
        xi = 2.0 * rng.permuted(half, axis=1) - 1.0
        probs = np.full(n + 1, (n - 2) / (n * (n - 1)))
        probs[0] = 1.0 / (n - 1)
        probs /= probs.sum()
        event = rng.choice(n + 1, size=size, p=probs)
        e = np.zeros((size, n))
        e[event == 0] = 1.0
        rows = np.flatnonzero(event > 0)
        e[rows, event[rows] - 1] = -n / (n - 2)
        return (xi + e) / math.sqrt(1.0 + 2.0 / (n - 2))
    raise SpecError(f"unknown kind {m.kind!r}")  # pragma: no cover


def sample_tensor(m: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    return sample_batch(m, rng, 1)[0]


def sample_permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform 0-based permutation of ``range(n)`` (Fisher-Yates shuffle)."""
    if n < 1:
        raise RangeError("n must be positive")
    return rng.permutation(n)


@dataclass(frozen=True)
class PermutationPairSample:
    pi1: np.ndarray
    pi2: np.ndarray
    i1: int
    i2: int


def transpose_compose(pi: np.ndarray, i1: int, i2: int) -> np.ndarray:
    """``pi o t(i1, i2)``: swap the images of ``i1`` and ``i2`` (0-based)."""
    out = np.array(pi, copy=True)
    out[[i1, i2]] = out[[i2, i1]]
    return out


def sample_exchangeable_pair(n: int, rng: np.random.Generator) -> PermutationPairSample:
    if n < 2:
        raise RangeError("exchangeable pair needs n >= 2")
    i1, i2 = (int(x) for x in rng.integers(0, n, size=2))
    pi1 = sample_permutation(n, rng)
    return PermutationPairSample(pi1, transpose_compose(pi1, i1, i2), i1, i2)


def enumerate_exchangeable_pairs(n: int):
    """Yield every equally likely outcome ``(pi1, i1, i2, pi2)`` of the pair construction."""
    for p in itertools.permutations(range(n)):
        pi1 = np.array(p)
        for i1 in range(n):
            for i2 in range(n):
                yield pi1, i1, i2, transpose_compose(pi1, i1, i2)


# -- parameters ---------------------------------------------------------------

@dataclass(frozen=True)
class TensorParams:
    n: int
    d: int
    delta: tuple[float, ...]
    sigma: tuple[float, ...]
    osc: float
    pc: float | None
    B: float
    K3: float
    K4: float | None = None
    provenance: str = "exact"
    samples: int | None = None
    seed: int | None = None
    stderr: Mapping[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "d": self.d,
            "delta": list(self.delta),
            "sigma": list(self.sigma),
            "osc": self.osc,
            "pc": self.pc,
            "B": self.B,
            "K3": self.K3,
            "K4": self.K4,
            "provenance": self.provenance,
        }
        if self.provenance != "exact":
            out.update(samples=self.samples, seed=self.seed, stderr=dict(self.stderr))
        return out


def canonical_pair(d: int, s: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """0-based index pair whose product has expectation ``delta_s``."""
    first = tuple(range(d))
    second = tuple(range(s)) + tuple(range(d, 2 * d - s))
    return first, second


def pc_indices(d: int) -> tuple[tuple[int, ...], ...]:
    """The four 0-based multi-indices of the parallelepipedal product."""
    return (
        tuple(range(d)),
        (0,) + tuple(range(d, 2 * d - 1)),
        tuple(range(2 * d - 1, 3 * d - 1)),
        (2 * d - 1,) + tuple(range(3 * d - 1, 4 * d - 2)),
    )


def exact_slice_params(n: int, k: int, d: int) -> TensorParams:
    if d < 1 or n < 2 * d or not 0 <= k <= n:
        raise RangeError(f"need d >= 1, n >= 2d and 0 <= k <= n; got n={n}, k={k}, d={d}")
    m = [slice_moment(n, k, r) for r in range(4 * d + 1)]
    md = m[d]
    delta = tuple(m[2 * d - s] - md * md for s in range(d + 1))
    # row means are deterministic on the slice, so osc is a plain absolute value
    norm = float(n) ** (d - 1)
    y1 = (math.perm(k - 1, d - 1) if k >= 1 else 0) / norm - math.perm(n - 1, d - 1) * md / norm
    y0 = -math.perm(n - 1, d - 1) * md / norm
    q = (k * y1 * y1 + (n - k) * y0 * y0) / n
    osc = abs(q - delta[1])
    pc = None
    if n >= 4 * d - 2:
        sets = [set(ix) for ix in pc_indices(d)]
        e4 = 0.0
        for size in range(5):
            for J in itertools.combinations(range(4), size):
                union = set().union(*(sets[j] for j in J)) if J else set()
                e4 += (-md) ** (4 - size) * m[len(union)]
        pc = abs(e4 - delta[1] ** 2)
    K3 = md * (1 - md) ** 3 + (1 - md) * md**3
    K4 = md * (1 - md) ** 4 + (1 - md) * md**4
    return TensorParams(
        n=n,
        d=d,
        delta=delta,
        sigma=sigma_from_delta(DeltaVector(delta)).sigma,
        osc=osc,
        pc=pc,
        B=0.0,
        K3=K3,
        K4=K4,
    )


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("TENSORCLT_THREADS", "1")))
    except ValueError:
        return 1


def _chunk_statistics(m: ModelSpec, seed_seq: np.random.SeedSequence, size: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed_seq)
    X = sample_batch(m, rng, size)
    n, d = m.n, m.d
    first = (slice(None),) + tuple(range(d))
    a = X[first]
    stats = {"a": a}
    if n >= 2 * d:
        for s in range(d + 1):
            _, second = canonical_pair(d, s)
            stats[f"prod{s}"] = a * X[(slice(None),) + second]
    rows = X.reshape(size, n, -1).sum(axis=2) / float(n) ** (d - 1)
    stats["Q"] = np.mean(rows**2, axis=1)
    stats["G"] = X.reshape(size, -1).sum(axis=1) / float(n) ** d
    if n >= 4 * d - 2:
        P = np.ones(size)
        for ix in pc_indices(d):
            P = P * X[(slice(None),) + ix]
        stats["P"] = P
    return stats


def collect_statistics(m: ModelSpec, M: int, seed: int, chunk_size: int = DEFAULT_CHUNK) -> dict[str, np.ndarray]:
    """Per-sample canonical products for ``M`` draws, deterministic in ``(seed, chunk_size)``."""
    sizes = [chunk_size] * (M // chunk_size) + ([M % chunk_size] if M % chunk_size else [])
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    workers = min(_worker_count(), len(sizes))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda args: _chunk_statistics(m, *args), zip(children, sizes)))
    else:
        parts = [_chunk_statistics(m, c, s) for c, s in zip(children, sizes)]
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    M = values.size
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(M))


def estimate_params(m: ModelSpec, M: int, seed: int = 0, chunk_size: int = DEFAULT_CHUNK) -> TensorParams:
    """Monte Carlo estimates with delta-method standard errors for every field."""
    if M < 2:
        raise SpecError("need at least two samples")
    n, d = m.n, m.d
    if n < 2 * d:
        raise SmallNError(f"delta_0 needs n >= 2d = {2 * d}")
    if n < 4 * d - 2:
        raise SmallNError(f"pc needs n >= 4d - 2 = {4 * d - 2}")
    st = collect_statistics(m, M, seed, chunk_size)
    stderr: dict[str, float] = {}
    delta = []
    for s in range(d + 1):
        mu, se = _mean_se(st[f"prod{s}"])
        delta.append(mu)
        stderr[f"delta{s}"] = se
    with warnings.catch_warnings():
        # sampling noise can push delta_d slightly past 1
        warnings.simplefilter("ignore", RuntimeWarning)
        sigma = sigma_from_delta(DeltaVector(delta)).sigma
    for s in range(d + 1):
        infl = sum(math.comb(s, t) * (-1) ** (s - t) * st[f"prod{t}"] for t in range(s + 1))
        stderr[f"sigma{s}"] = _mean_se(infl)[1]

    d1, prod1 = delta[1], st["prod1"]
    dev = st["Q"] - d1
    osc = float(np.mean(np.abs(dev)))
    slope = float(np.mean(np.sign(dev)))
    stderr["osc"] = _mean_se(np.abs(dev) - slope * prod1)[1]

    raw_pc = float(np.mean(st["P"])) - d1 * d1
    pc = abs(raw_pc)
    stderr["pc"] = _mean_se(st["P"] - 2.0 * d1 * prod1)[1]

    B, stderr["B"] = _mean_se(st["G"] ** 2)
    K3, stderr["K3"] = _mean_se(np.abs(st["a"]) ** 3)
    K4, stderr["K4"] = _mean_se(st["a"] ** 4)
    return TensorParams(
        n=n,
        d=d,
        delta=tuple(delta),
        sigma=tuple(sigma),
        osc=osc,
        pc=pc,
        B=B,
        K3=K3,
        K4=K4,
        provenance="monte-carlo",
        samples=M,
        seed=seed,
        stderr=stderr,
    )
