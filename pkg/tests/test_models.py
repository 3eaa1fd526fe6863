import itertools
import math

import numpy as np
import pytest

from tensorclt.errors import NotSymmetricError, SmallNError, SpecError
from tensorclt.models import (
    ModelSpec,
    canonical_pair,
    collect_statistics,
    enumerate_exchangeable_pairs,
    estimate_params,
    exact_slice_params,
    pc_indices,
    sample_batch,
    sample_exchangeable_pair,
    sample_permutation,
    sample_tensor,
    slice_moment,
    transpose_compose,
)


def slice_tensors(n, k, d):
    """Every centered product tensor of the slice, with equal weights."""
    md = math.perm(k, d) / math.perm(n, d)
    out = []
    grid = np.indices((n,) * d)
    mask = np.ones((n,) * d, dtype=bool)
    for a, b in itertools.combinations(range(d), 2):
        mask &= grid[a] != grid[b]
    for S in itertools.combinations(range(n), k):
        xi = np.zeros(n)
        xi[list(S)] = 1.0
        prod = np.ones((n,) * d)
        for ax in range(d):
            prod = prod * xi[grid[ax]]
        out.append((prod - md) * mask)
    return np.array(out)


def test_model_validation():
    with pytest.raises(SpecError):
        ModelSpec("nope", 4, 1)
    with pytest.raises(SpecError):
        ModelSpec("slice-product", 4, 2, {"k": 9})
    with pytest.raises(SpecError):
        ModelSpec("iid-function", 4, 2, {"probs": [0.5, 0.6], "kernel": "product"})
    with pytest.raises(NotSymmetricError):
        ModelSpec("iid-function", 4, 2, {"probs": [0.5, 0.5], "kernel": [[0, 1], [0, 0]]})
    with pytest.raises(SpecError):
        ModelSpec("perturbed-balanced-signs", 5, 1)
    with pytest.raises(SpecError):
        ModelSpec.from_dict({"kind": "slice-product", "n": 4, "d": 1, "payload": {"k": 2}, "x": 1})


def test_model_round_trip(tmp_path):
    m = ModelSpec("mixture", 6, 2, {"weights": [0.5, 0.5], "components": [
        {"kind": "slice-product", "payload": {"k": 3}},
        {"kind": "iid-function", "payload": {"probs": [0.5, 0.5], "kernel": "and", "normalize": True}},
    ]})
    path = tmp_path / "m.json"
    import json
    path.write_text(json.dumps(m.to_dict()))
    assert ModelSpec.load(path).to_dict() == m.to_dict()


@pytest.mark.parametrize("spec", [
    ("iid-function", 5, 2, {"probs": [0.3, 0.7], "kernel": "majority"}),
    ("slice-product", 6, 3, {"k": 2}),
    ("zero-inflated-signs", 5, 1, {"epsilon": 0.2}),
    ("perturbed-balanced-signs", 6, 1, {}),
])
def test_samples_are_symmetric_with_zero_diagonal(rng, spec):
    m = ModelSpec(*spec)
    X = sample_batch(m, rng, 50)
    assert X.shape == (50,) + (m.n,) * m.d
    for perm in itertools.permutations(range(1, m.d + 1)):
        assert np.array_equal(X, X.transpose((0,) + perm))
    if m.d >= 2:
        assert np.all(X[:, 0, 0] == 0)
    assert sample_tensor(m, rng).shape == (m.n,) * m.d


def test_vector_examples_have_unit_variance(rng):
    for m in (ModelSpec("zero-inflated-signs", 6, 1, {"epsilon": 0.3}), ModelSpec("perturbed-balanced-signs", 8, 1)):
        X = sample_batch(m, rng, 200_000)
        assert np.mean(X[:, 0] ** 2) == pytest.approx(1.0, abs=0.02)
        assert np.mean(X[:, 0]) == pytest.approx(0.0, abs=0.02)


def test_iid_normalized_kernel(rng):
    m = ModelSpec("iid-function", 6, 2, {"probs": [0.2, 0.8], "kernel": "and", "normalize": True})
    X = sample_batch(m, rng, 100_000)
    assert np.mean(X[:, 0, 1]) == pytest.approx(0.0, abs=0.02)
    assert np.mean(X[:, 0, 1] ** 2) == pytest.approx(1.0, abs=0.03)


def test_slice_moment():
    assert slice_moment(6, 3, 2) == pytest.approx(3 * 2 / (6 * 5))
    assert slice_moment(6, 1, 2) == 0.0


@pytest.mark.parametrize("n,k,d", [(4, 2, 1), (6, 2, 1), (6, 3, 2), (8, 3, 2), (8, 5, 2), (10, 4, 3)])
def test_exact_slice_params_against_enumeration(n, k, d):
    X = slice_tensors(n, k, d)
    p = exact_slice_params(n, k, d)
    for s in range(d + 1):
        i, j = canonical_pair(d, s)
        assert p.delta[s] == pytest.approx(np.mean(X[(slice(None),) + i] * X[(slice(None),) + j]), abs=1e-14)
    rows = X.reshape(len(X), n, -1).sum(axis=2) / n ** (d - 1)
    assert p.osc == pytest.approx(np.mean(np.abs(np.mean(rows**2, axis=1) - p.delta[1])), abs=1e-14)
    if n >= 4 * d - 2:
        P = np.ones(len(X))
        for ix in pc_indices(d):
            P = P * X[(slice(None),) + ix]
        assert p.pc == pytest.approx(abs(np.mean(P) - p.delta[1] ** 2), abs=1e-14)
    a = X[(slice(None),) + tuple(range(d))]
    assert p.K3 == pytest.approx(np.mean(np.abs(a) ** 3))
    assert p.K4 == pytest.approx(np.mean(a**4))
    assert p.B == pytest.approx(np.mean((X.reshape(len(X), -1).sum(axis=1) / n**d) ** 2), abs=1e-14)


def test_small_slice_example():
    p = exact_slice_params(4, 2, 1)
    assert p.delta[0] == pytest.approx(-1 / 12)
    assert p.delta[1] == pytest.approx(0.25)
    assert p.osc == pytest.approx(0.0)


def test_pc_index_shape():
    assert pc_indices(2) == ((0, 1), (0, 2), (3, 4), (3, 5))
    assert canonical_pair(3, 1) == ((0, 1, 2), (0, 3, 4))


def test_permutation_sampler_uniform(rng):
    counts = {}
    for _ in range(24_000):
        key = tuple(sample_permutation(4, rng).tolist())
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 24
    assert max(abs(c - 1000) for c in counts.values()) < 200


def test_transpose_compose():
    pi = np.array([2, 0, 1, 3])
    out = transpose_compose(pi, 0, 3)
    assert out.tolist() == [3, 0, 1, 2]
    assert transpose_compose(pi, 1, 1).tolist() == pi.tolist()
    for x in range(4):
        t = {0: 3, 3: 0}.get(x, x)
        assert out[x] == pi[t]


def test_exchangeable_pair_sampler(rng):
    pair = sample_exchangeable_pair(5, rng)
    assert np.array_equal(pair.pi2, transpose_compose(pair.pi1, pair.i1, pair.i2))
    assert sum(1 for _ in enumerate_exchangeable_pairs(3)) == 6 * 9


def test_statistics_do_not_depend_on_thread_count(monkeypatch):
    m = ModelSpec("slice-product", 8, 2, {"k": 4})
    monkeypatch.setenv("TENSORCLT_THREADS", "1")
    one = collect_statistics(m, 25_000, seed=5, chunk_size=4_000)
    monkeypatch.setenv("TENSORCLT_THREADS", "4")
    four = collect_statistics(m, 25_000, seed=5, chunk_size=4_000)
    assert one.keys() == four.keys()
    for key in one:
        assert np.array_equal(one[key], four[key])


def test_estimator_requires_room():
    with pytest.raises(SmallNError):
        estimate_params(ModelSpec("slice-product", 5, 2, {"k": 2}), 100, seed=0)


def test_estimator_reports_stderr():
    p = estimate_params(ModelSpec("slice-product", 6, 1, {"k": 3}), 5_000, seed=1)
    assert p.provenance == "monte-carlo" and p.samples == 5_000
    for key in ("delta0", "delta1", "sigma0", "sigma1", "osc", "pc", "B", "K3", "K4"):
        assert p.stderr[key] >= 0
