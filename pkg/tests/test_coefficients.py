import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorclt.coefficients import (
    DeltaVector,
    gamma,
    row_cubic,
    seminorm,
    seminorm_from_set,
    seminorm_profile,
    set_row_cubic,
    set_seminorm,
    sigma_from_delta,
    variance_direct,
    variance_formula,
)
from tensorclt.errors import DimensionError, RangeError, ScaleError
from tensorclt.models import exact_slice_params
from tensorclt.tensor_core import SymmetricCoefficients


def random_coeffs(rng, n, d, density=0.7):
    vals = {F: float(rng.standard_normal()) for F in itertools.combinations(range(1, n + 1), d)
            if rng.random() < density}
    return SymmetricCoefficients(n, d, vals)


def loop_seminorm(theta, s):
    """Square root of the sum over i in [n]^s of (sum over the trailing d-s slots)^2."""
    d = theta.ndim
    n = theta.shape[0]
    total = 0.0
    for head in itertools.product(range(n), repeat=s):
        acc = sum(theta[head + tail] for tail in itertools.product(range(n), repeat=d - s))
        total += acc * acc
    return math.sqrt(total)


def test_two_term_polynomial_example():
    c = SymmetricCoefficients(6, 2, {"1,2": 1.0, "3,4": 1.0})
    assert set_seminorm(c, 0) == pytest.approx(2.0)
    assert set_seminorm(c, 1) == pytest.approx(2.0)
    assert set_seminorm(c, 2) == pytest.approx(math.sqrt(2.0))
    assert set_row_cubic(c) == pytest.approx(4.0)


@pytest.mark.parametrize("n,d", [(5, 1), (5, 2), (5, 3), (6, 3)])
def test_seminorm_matches_loops(rng, n, d):
    c = random_coeffs(rng, n, d)
    for s in range(d + 1):
        assert seminorm(c, s) == pytest.approx(loop_seminorm(c.theta, s), rel=1e-12)


@pytest.mark.parametrize("n,d", [(5, 1), (6, 2), (6, 3), (7, 3)])
def test_set_and_tensor_seminorms_are_related(rng, n, d):
    c = random_coeffs(rng, n, d)
    for s in range(d + 1):
        assert seminorm(c, s) == pytest.approx(seminorm_from_set(d, s, set_seminorm(c, s)), rel=1e-12)
    assert row_cubic(c) == pytest.approx(math.factorial(d - 1) ** 3 * set_row_cubic(c), rel=1e-12)


def test_seminorm_profile_and_ranges(rng):
    c = random_coeffs(rng, 5, 2)
    prof = seminorm_profile(c)
    assert prof.d == 2 and len(prof.values) == 3
    assert prof.values[2] == pytest.approx(np.linalg.norm(c.theta))
    with pytest.raises(RangeError):
        seminorm(c, 3)


def test_gamma_small_values():
    assert [gamma(s, 3) for s in range(4)] == [-1, 3, -3, 1]
    assert all(gamma(s, r) == gamma(s, r, "recursive") for r in range(15) for s in range(r + 1))
    with pytest.raises(RangeError):
        gamma(2, 1)
    with pytest.raises(RangeError):
        gamma(0, 21)


def test_gamma_defining_relation():
    # sum_{x=s}^{r} C(x, s) gamma_{x,r} = 1 if s == r else 0
    for r in range(10):
        for s in range(r + 1):
            total = sum(math.comb(x, s) * gamma(x, r) for x in range(s, r + 1))
            assert total == (1 if s == r else 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=6))
def test_sigma_inverts_to_delta(delta):
    sig = sigma_from_delta(DeltaVector(tuple(delta))).sigma
    for t in range(len(delta)):
        back = sum(math.comb(t, s) * sig[s] for s in range(t + 1))
        assert back == pytest.approx(delta[t], abs=1e-12)


def test_delta_outside_unit_interval_warns():
    with pytest.warns(RuntimeWarning):
        DeltaVector((0.0, 2.0))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(0, 5), st.integers(0, 2**32 - 1))
def test_variance_formula_matches_direct_sum(d, extra, seed):
    r = np.random.default_rng(seed)
    n = max(d, 2) + extra
    c = random_coeffs(r, n, d)
    dv = DeltaVector(tuple(r.uniform(-1, 1, d + 1)))
    direct = variance_direct(c, dv)
    assert variance_formula(c, dv) == pytest.approx(direct, rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("n,k,d", [(6, 3, 1), (6, 2, 2), (7, 3, 2), (8, 5, 2)])
def test_variance_formula_against_slice_enumeration(rng, n, k, d):
    """Second moment of <theta, X> over every point of the slice, X the centered product tensor."""
    c = random_coeffs(rng, n, d)
    params = exact_slice_params(n, k, d)
    md = math.perm(k, d) / math.perm(n, d)
    second = 0.0
    count = 0
    for S in itertools.combinations(range(n), k):
        xi = np.zeros(n)
        xi[list(S)] = 1.0
        value = 0.0
        for F, a in c.values.items():
            prod = np.prod([xi[x - 1] for x in F])
            value += math.factorial(d) * a * (prod - md)
        second += value * value
        count += 1
    assert variance_formula(c, DeltaVector(params.delta)) == pytest.approx(second / count, rel=1e-10, abs=1e-12)


def test_variance_checks_orders_and_budget(rng):
    c = random_coeffs(rng, 5, 2)
    with pytest.raises(DimensionError):
        variance_formula(c, (0.0, 1.0))
    with pytest.raises(ScaleError):
        variance_direct(c, (0.0, 0.5, 1.0), budget=10)
