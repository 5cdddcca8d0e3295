import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stepdown_slope.exceptions import ConditioningError, DomainError
from stepdown_slope.sequences import (
    SequenceSpec,
    gaussian_correction,
    lambda_bh,
    lambda_fdp,
    lambda_kfwer,
    monte_carlo_correction,
    wishart_weight,
)
from stepdown_slope.sorted_l1 import LambdaSequence
from stepdown_slope.special import std_normal_quantile as qnorm

probs = st.floats(0.001, 0.999)


def _non_increasing(seq):
    w = seq.weights
    return np.all(np.diff(w) <= 0) and np.all(w >= 0)


# ---- base sequences


def test_bh_examples():
    assert lambda_bh(1, 0.5).weights[0] == pytest.approx(0.67449, abs=1e-4)
    w = lambda_bh(4, 0.2).weights
    np.testing.assert_allclose(w, [qnorm(1 - 0.025 * i) for i in range(1, 5)], rtol=1e-13)
    np.testing.assert_allclose(lambda_bh(50, 0.1, 2.0).weights, 2 * lambda_bh(50, 0.1).weights)
    assert lambda_bh(3, 0.1).provenance == "BH"


def test_kfwer_examples():
    w = lambda_kfwer(10, 2, 0.1).weights
    assert w[0] == w[1] == pytest.approx(qnorm(1 - 0.2 / 20))
    # i = 10: k*alpha / (2 (m + k - i)) = 0.2 / 4
    assert w[9] == pytest.approx(qnorm(0.95), abs=1e-12)
    np.testing.assert_allclose(lambda_kfwer(7, 7, 0.1).weights, qnorm(1 - 0.1 / 2))
    with pytest.raises(DomainError):
        lambda_kfwer(5, 6, 0.1)


def test_fdp_examples():
    w = lambda_fdp(10, 0.1, 0.1).weights
    assert w[0] == pytest.approx(qnorm(1 - 0.1 / 20))
    assert w[9] == pytest.approx(1.64485, abs=1e-5)
    big = lambda_fdp(1000, 0.1, 0.1)
    assert big.diagnostics["flattened"] == 0
    assert _non_increasing(big)


def test_fdp_floor_is_exact_at_integer_products():
    # gamma*i = 0.3*10 is 2.9999999999999996 in binary; the floor must still be 3
    m = 30
    w = lambda_fdp(m, 0.3, 0.1).weights
    assert w[9] == pytest.approx(qnorm(1 - 4 * 0.1 / (2 * (m + 4 - 10))))


@given(st.integers(1, 400), probs, probs, st.integers(1, 400))
def test_all_generators_non_increasing(m, a, b, k):
    k = min(k, m)
    for seq in (lambda_bh(m, a), lambda_kfwer(m, k, a), lambda_fdp(m, b, a)):
        assert isinstance(seq, LambdaSequence)
        assert _non_increasing(seq)


def test_fdp_raw_sequence_never_needs_flattening():
    # the tail probability grows both between and across floor jumps
    for m in (1, 7, 100, 1000):
        for gamma in (0.01, 0.1, 0.5, 0.9):
            assert lambda_fdp(m, gamma, 0.1).diagnostics["flattened"] == 0


def test_sequence_spec():
    spec = SequenceSpec(m=20, alpha=0.05, q=0.1, gamma=0.2, k=3)
    np.testing.assert_array_equal(spec.kfwer().weights, lambda_kfwer(20, 3, 0.05).weights)
    np.testing.assert_array_equal(spec.fdp().weights, lambda_fdp(20, 0.2, 0.05).weights)
    with pytest.raises(DomainError):
        SequenceSpec(m=5, k=6)
    with pytest.raises(DomainError):
        SequenceSpec(m=5, alpha=1.0)


# ---- Wishart weight and analytic correction


def test_wishart_weight():
    assert wishart_weight(0, 2) == 1.0
    assert wishart_weight(10, 5000) == 1 / 4989
    assert wishart_weight(5, 10**9) * 10**9 == pytest.approx(1.0, rel=1e-8)
    with pytest.raises(DomainError):
        wishart_weight(3, 4)


def test_gaussian_correction_recursion():
    base = lambda_bh(50, 0.1)
    raw = gaussian_correction(base, 300).diagnostics["raw"]
    b = base.weights
    assert raw[0] == b[0]
    assert raw[1] == pytest.approx(b[1] * math.sqrt(1 + wishart_weight(1, 300) * b[0] ** 2))
    for i in range(2, 10):
        expect = b[i] * math.sqrt(1 + wishart_weight(i, 300) * np.sum(raw[:i] ** 2))
        assert raw[i] == pytest.approx(expect, rel=1e-14)


def test_gaussian_correction_limits():
    base = lambda_kfwer(100, 3, 0.1)
    same = gaussian_correction(base, 10, weight=lambda s, n: 0.0)
    np.testing.assert_array_equal(same.weights, base.weights)
    huge = gaussian_correction(base, 10**12)
    np.testing.assert_allclose(huge.weights, base.weights, rtol=1e-6)


def test_gaussian_correction_truncates_after_minimum():
    # m = 2n: the raw sequence turns upward and everything past k_star is flat
    out = gaussian_correction(lambda_bh(200, 0.1), 100)
    raw = out.diagnostics["raw"]
    k_star = out.diagnostics["k_star"]
    assert k_star == int(np.argmin(raw)) + 1
    assert np.any(np.diff(raw[k_star - 1:]) > 0)
    assert np.all(out.weights[k_star - 1:] == raw[k_star - 1])
    assert out.provenance == "corrected"
    assert _non_increasing(out)


def test_gaussian_correction_typical_shape():
    out = gaussian_correction(lambda_bh(2000, 0.1), 1000)
    k_star = out.diagnostics["k_star"]
    assert 1 < k_star < 2000
    w = out.weights
    assert np.all(w[:k_star] >= lambda_bh(2000, 0.1).weights[:k_star] - 1e-12)


def test_gaussian_correction_still_decreasing_raises():
    # with n tiny the correction stops before the raw sequence turns
    with pytest.raises(DomainError):
        gaussian_correction(lambda_bh(50, 0.1), 3, weight=lambda s, n: wishart_weight(s, n) * 0)


@given(st.integers(20, 300), st.integers(5, 2000), probs)
def test_corrected_sequences_non_increasing(m, n, q):
    try:
        out = gaussian_correction(lambda_bh(m, q), n)
    except DomainError:
        return
    assert _non_increasing(out)


# ---- Monte Carlo correction


def _gauss_design(gen, n, m):
    X = gen.standard_normal((n, m)) / math.sqrt(n)
    return X / np.linalg.norm(X, axis=0)


def test_mc_first_entry_and_validation():
    gen = np.random.default_rng(1)
    X = _gauss_design(gen, 200, 20)
    base = lambda_bh(20, 0.1)
    out = monte_carlo_correction(base, X, 200, gen, patience=None)
    assert out.weights[0] == base.weights[0]
    assert out.diagnostics["correction"][0] == 0.0
    assert _non_increasing(out)
    with pytest.raises(DomainError):
        monte_carlo_correction(base, X, 50, gen)
    with pytest.raises(DomainError):
        monte_carlo_correction(base, 2 * X, 200, gen)


def test_mc_agrees_with_wishart_on_average_over_designs():
    # for a single fixed design the estimate carries design-specific bias of
    # ~10%; averaged over independent designs it targets the analytic term
    n, m, designs, reps = 500, 50, 8, 300
    base = lambda_bh(m, 0.1)
    analytic = gaussian_correction(base, n, weight=wishart_weight)
    raw_a = analytic.diagnostics["raw"]
    idx = np.arange(1, 40)
    ratios = []
    for d in range(designs):
        gen = np.random.default_rng(100 + d)
        X = _gauss_design(gen, n, m)
        out = monte_carlo_correction(base, X, reps, gen, patience=None)
        corr = out.diagnostics["correction"][idx]
        # analytic term for the same prefix the MC estimate conditioned on
        prefix = out.diagnostics["raw"]
        expect = np.array([wishart_weight(i, n) * np.sum(prefix[:i] ** 2) for i in idx])
        ratios.append(corr / expect)
    ratios = np.array(ratios)
    mean = ratios.mean(axis=0)
    se = ratios.std(axis=0, ddof=1) / math.sqrt(designs)
    assert np.all(np.abs(mean - 1) <= 3 * se + 0.02)
    assert np.all(np.diff(raw_a) != 0)


def test_mc_standard_error_shrinks_with_replicates():
    gen = np.random.default_rng(5)
    X = _gauss_design(gen, 300, 30)
    base = lambda_bh(30, 0.1)
    se1 = monte_carlo_correction(base, X, 400, np.random.default_rng(6),
                                 patience=None).diagnostics["correction_se"][1:]
    se2 = monte_carlo_correction(base, X, 1600, np.random.default_rng(7),
                                 patience=None).diagnostics["correction_se"][1:]
    ratio = np.median(se1 / se2)
    assert 1.6 <= ratio <= 2.5  # 4x replicates halve the standard error


def test_mc_patience_stops_early():
    gen = np.random.default_rng(11)
    X = _gauss_design(gen, 100, 200)
    out = monte_carlo_correction(lambda_bh(200, 0.1), X, 100, gen, patience=5)
    assert out.diagnostics["computed"] < 200
    assert _non_increasing(out)


def test_mc_conditioning_error_on_duplicate_columns():
    gen = np.random.default_rng(3)
    col = gen.normal(size=30)
    X = np.tile((col / np.linalg.norm(col))[:, None], (1, 10))
    # zero tail keeps the raw sequence at its minimum, so |S| = 2 must raise
    base = LambdaSequence(np.r_[1.0, np.zeros(9)])
    with pytest.raises(ConditioningError):
        monte_carlo_correction(base, X, 100, gen, patience=None)
