import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import stepdown_bruteforce
from stepdown_slope.exceptions import DimensionError, DomainError
from stepdown_slope.sequences import lambda_fdp, lambda_kfwer
from stepdown_slope.special import std_normal_isf
from stepdown_slope.stepdown import (
    fdp_thresholds,
    kfwer_thresholds,
    stepdown_select,
    two_sided_p,
)


def test_kfwer_threshold_examples():
    a = kfwer_thresholds(10, 2, 0.1)
    expect = [0.02, 0.02] + [0.2 / (12 - i) for i in range(3, 11)]
    np.testing.assert_allclose(a, expect, rtol=1e-15)
    assert kfwer_thresholds(6, 6, 0.1)[-1] == pytest.approx(0.1)
    np.testing.assert_allclose(kfwer_thresholds(8, 1, 0.05),
                               [0.05 / (9 - i) for i in range(1, 9)])
    with pytest.raises(DomainError):
        kfwer_thresholds(5, 6, 0.1)


def test_fdp_threshold_examples():
    a = fdp_thresholds(10, 0.1, 0.1)
    assert a[0] == pytest.approx(0.01)
    assert a[9] == pytest.approx(0.1)
    # tiny gamma: floor is always 0, giving the k = 1 thresholds
    np.testing.assert_allclose(fdp_thresholds(20, 1e-6, 0.1), kfwer_thresholds(20, 1, 0.1))


@pytest.mark.parametrize("m,k,gamma", [(30, 3, 0.1), (200, 5, 0.2), (7, 7, 0.5)])
def test_thresholds_match_lambda_sequences(m, k, gamma):
    # the penalty weights are the two-sided normal quantiles of the thresholds
    np.testing.assert_allclose(std_normal_isf(kfwer_thresholds(m, k, 0.1) / 2),
                               lambda_kfwer(m, k, 0.1).weights, rtol=1e-13)
    np.testing.assert_allclose(std_normal_isf(fdp_thresholds(m, gamma, 0.1) / 2),
                               lambda_fdp(m, gamma, 0.1).weights, rtol=1e-13)


def test_select_examples():
    assert stepdown_select(np.ones(5), kfwer_thresholds(5, 1, 0.1)).size == 0
    np.testing.assert_array_equal(stepdown_select([0.001, 0.5], [0.01, 0.02]), [0])
    np.testing.assert_array_equal(stepdown_select([0.5, 0.001, 0.002], [0.01, 0.02, 0.03]),
                                  [1, 2])
    # stops at the first failure even when a later p-value would pass
    np.testing.assert_array_equal(stepdown_select([0.001, 0.05, 0.0011], [0.002, 0.003, 0.01]),
                                  [0, 2])
    np.testing.assert_array_equal(stepdown_select([0.001, 0.05, 0.011], [0.002, 0.01, 1.0]),
                                  [0])
    with pytest.raises(DimensionError):
        stepdown_select([0.1, 0.2], [0.1])
    with pytest.raises(DomainError):
        stepdown_select([1.2], [0.1])


def test_select_keeps_tie_groups_whole():
    # p_(2) == p_(3); the prefix would end between them, so both are dropped
    out = stepdown_select([0.001, 0.01, 0.01], [0.05, 0.02, 0.005])
    np.testing.assert_array_equal(out, [0])


@st.composite
def pvals_and_thresholds(draw):
    m = draw(st.integers(1, 12))
    grid = st.sampled_from([0.0, 0.001, 0.01, 0.02, 0.05, 0.1, 0.3, 1.0])
    p = draw(st.lists(st.one_of(st.floats(0, 1), grid), min_size=m, max_size=m))
    a = sorted(draw(st.lists(st.one_of(st.floats(0, 1), grid), min_size=m, max_size=m)))
    return np.array(p), np.array(a)


@given(pvals_and_thresholds())
def test_select_matches_brute_force_prefix(pa):
    p, a = pa
    sel = stepdown_select(p, a)
    r = stepdown_bruteforce(p, a)
    ps = np.sort(p)
    if 0 < r < p.size and ps[r - 1] == ps[r]:
        # tie group straddles the cut: the whole group is withheld
        r = int(np.searchsorted(ps, ps[r], side="left"))
    assert sel.size == r
    assert np.all(np.diff(sel) > 0)
    # exactly the r smallest p-values are rejected
    if r:
        assert p[sel].max() <= ps[r - 1]
        rest = np.setdiff1d(np.arange(p.size), sel)
        assert rest.size == 0 or p[rest].min() >= ps[r - 1]


def test_select_random_instances_against_brute_force(rng):
    for _ in range(200):
        m = int(rng.integers(1, 13))
        p = rng.uniform(size=m) ** 3
        a = np.sort(rng.uniform(0, 0.3, size=m))
        assert stepdown_select(p, a).size == stepdown_bruteforce(p, a)


def test_two_sided_p():
    assert two_sided_p(0.0) == 1.0
    assert two_sided_p(1.95996 * 3.0, 3.0) == pytest.approx(0.05, abs=1e-5)
    z = np.linspace(-10, 10, 101)
    p = two_sided_p(z)
    assert np.all(np.diff(p[z >= 0]) < 0)
    np.testing.assert_array_equal(p, two_sided_p(-z))
    assert two_sided_p(30.0) > 0.0  # no underflow from 1 - Phi
    with pytest.raises(DomainError):
        two_sided_p(1.0, 0.0)
