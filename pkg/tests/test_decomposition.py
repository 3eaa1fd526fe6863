import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorclt.decomposition import (
    alpha_coefficient,
    check_symmetric_double,
    check_vanishing_diagonal,
    decompose_z,
    evaluate_w,
    evaluate_z,
    finite_population_transform,
    increasing_chains,
    mu_weight,
    mu_weight_printed,
    population_statistic,
    symmetrize_double,
    verify_exhaustive,
    w_weight,
)
from tensorclt.empirics import wstat_values
from tensorclt.errors import DiagonalError, NotHoeffdingError, NotSymmetricError, RangeError
from tensorclt.hoeffding import is_hoeffding


def loop_z(z, pi):
    r = z.ndim // 2
    n = z.shape[0]
    total = 0.0
    for i in itertools.product(range(n), repeat=r):
        total += z[i + tuple(pi[x] for x in i)]
    return total


def test_mu_printed_and_exact_agree_at_h0():
    for s in range(1, 5):
        for n in range(s, s + 6):
            assert mu_weight(0, s, n) == pytest.approx(mu_weight_printed(0, s, n), rel=1e-14)
    assert mu_weight(0, 2, 5) == pytest.approx(1 + 3 / 5)


@pytest.mark.parametrize("n", [4, 5, 7, 11])
def test_mu_closed_values(n):
    # values obtained independently by regressing Z_s - R_s on Z_h over random tensors
    assert mu_weight(1, 2, n) == pytest.approx(2 + 4 / n, rel=1e-14)
    assert mu_weight(2, 3, n) == pytest.approx(3 + 12 / n, rel=1e-14)


def test_mu_weight_ranges():
    with pytest.raises(RangeError):
        mu_weight(2, 2, 5)
    with pytest.raises(RangeError):
        mu_weight_printed(0, 6, 5)


def test_increasing_chains_count():
    for s in range(4):
        for r in range(s, 6):
            chains = list(increasing_chains(s, r))
            assert len(chains) == (1 if r == s else 2 ** (r - s - 1))
            assert all(c[0] == s and c[-1] == r for c in chains)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_w_weights_approach_binomials(r):
    for n in (6**r * r * r, 2 * 6**r * r * r):
        for s in range(r + 1):
            assert abs(w_weight(s, r, n) - math.comb(r, s)) <= r**3 * 18**r * math.factorial(r) / n


def test_w_weight_top_is_one():
    assert w_weight(3, 3, 7) == 1.0


def test_symmetry_and_diagonal_checks(rng):
    n = 4
    z = rng.standard_normal((n,) * 4)
    with pytest.raises(NotSymmetricError):
        check_symmetric_double(z)
    good = symmetrize_double(z)
    check_symmetric_double(good)
    check_vanishing_diagonal(good)
    bad = good.copy()
    bad[0, 0, 1, 2] = 1.0
    with pytest.raises((DiagonalError, NotSymmetricError)):
        decompose_z(bad)
    diag = np.zeros((n,) * 4)
    diag[0, 0, 1, 1] = 1.0
    with pytest.raises(DiagonalError):
        check_vanishing_diagonal(diag)


def test_evaluate_z_matches_loops(rng):
    z = rng.standard_normal((4,) * 4)
    pi = rng.permutation(4)
    assert evaluate_z(z, pi) == pytest.approx(loop_z(z, pi))


@pytest.mark.parametrize("r,n", [(1, 5), (2, 5), (2, 6), (3, 5)])
def test_decomposition_identity(rng, r, n):
    z = symmetrize_double(rng.standard_normal((n,) * (2 * r)))
    res = decompose_z(z)
    assert len(res.components) == r
    for _, xi in res.components:
        assert is_hoeffding(xi)
    report = verify_exhaustive(z, res)
    assert report["permutations"] == math.factorial(n)
    assert report["failures"] == 0
    assert report["max_relative_error"] < 1e-9
    pi = rng.permutation(n)
    assert res.evaluate(pi) == pytest.approx(loop_z(z, pi), rel=1e-9, abs=1e-9)
    assert res.evaluate(pi) == pytest.approx(evaluate_w(res.components, pi) + res.constant)


def test_printed_mu_breaks_the_identity(rng, monkeypatch):
    """Swapping in the printed mu weights makes the order-2 identity fail."""
    import tensorclt.decomposition as dec
    from fractions import Fraction

    n = 5
    z = symmetrize_double(rng.standard_normal((n,) * 4))
    assert verify_exhaustive(z)["failures"] == 0
    dec._w_exact.cache_clear()
    monkeypatch.setattr(dec, "_mu_exact", lambda h, s, n: Fraction(mu_weight_printed(h, s, n)))
    try:
        assert verify_exhaustive(z)["failures"] > 0
    finally:
        dec._w_exact.cache_clear()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([(1, 4), (2, 4), (2, 5)]))
def test_decomposition_identity_property(seed, rn):
    r, n = rn
    z = symmetrize_double(np.random.default_rng(seed).standard_normal((n,) * (2 * r)))
    assert verify_exhaustive(z)["failures"] == 0


def test_alpha_coefficient_values():
    assert alpha_coefficient(2, 2, 3) == pytest.approx(0.5)
    assert alpha_coefficient(2, 1, 3) == pytest.approx(0.5 * (1 - 3))
    with pytest.raises(RangeError):
        alpha_coefficient(2, 3, 3)


def pieces_order_two(t):
    n = t.shape[0]
    off = ~np.eye(n, dtype=bool)
    mu = t[off].mean()
    g1 = (n - 1) / (n - 2) * (t.sum(axis=1) / (n - 1) - mu)
    g2 = (t - mu - g1[:, None] - g1[None, :]) * off
    return mu, g1, g2


@pytest.mark.parametrize("n", [4, 5, 6])
def test_finite_population_transform_reproduces_statistic(rng, n):
    t = rng.standard_normal((n, n))
    t = t + t.T
    np.fill_diagonal(t, 0.0)
    mu, g1, g2 = pieces_order_two(t)
    comps = finite_population_transform([g1, g2], n)
    for xi in comps:
        assert is_hoeffding(xi)
    perms = np.array(list(itertools.permutations(range(n))))
    W = wstat_values(comps, perms)
    T = np.array([population_statistic(t, p) for p in perms])
    assert np.max(np.abs(W - (T - mu))) < 1e-12


def test_finite_population_transform_order_one(rng):
    n = 5
    g = rng.standard_normal(n)
    g -= g.mean()
    (xi,) = finite_population_transform([g], n)
    pi = rng.permutation(n)
    assert evaluate_w([(1.0, xi)], pi) == pytest.approx(g[pi[0]])


def test_finite_population_rejects_uncentered(rng):
    with pytest.raises(NotHoeffdingError):
        finite_population_transform([rng.standard_normal(5) + 1.0], 5)
