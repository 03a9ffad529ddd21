from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import brute_holm, brute_iqm, brute_mwu, brute_permutation, iqm_standard_error

from edgebench.stats import (
    bootstrap_ci_iqm,
    ena,
    holm_bonferroni,
    iqm,
    mann_whitney_two_sided,
    permutation_one_sided,
    policy_arm_lower_bound,
    significance_marker,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_ena_examples():
    assert ena(246.0, 246.0, 500.0).value == 0.0
    assert ena(500.0, 246.0, 500.0).value == 1.0
    s = ena(250.4, 246.0, 500.0)
    assert s.value == pytest.approx(4.4 / 254.0, abs=1e-15)
    assert str(s.value).startswith("0.01732")
    assert (s.j, s.j_exp, s.j_ref) == (250.4, 246.0, 500.0)


def test_ena_rejects_degenerate_reference():
    with pytest.raises(ValueError):
        ena(1.0, 2.0, 2.0)


@settings(max_examples=200, deadline=None)
@given(j=st.floats(-1e3, 1e3), j_exp=st.floats(-1e3, 1e3), gap=st.floats(1e-2, 1e3),
       c=st.floats(1e-2, 1e2), d=st.floats(-1e3, 1e3))
def test_ena_affine_invariance(j, j_exp, gap, c, d):
    j_ref = j_exp + gap
    a = ena(j, j_exp, j_ref).value
    b = ena(c * j + d, c * j_exp + d, c * j_ref + d).value
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a)) * 1e3


def test_iqm_examples():
    assert iqm([1, 2, 3, 4, 5, 6, 7, 8]) == 4.5
    assert iqm([3.25] * 9) == 3.25
    x = np.random.default_rng(0).normal(size=100)
    assert iqm(x) == pytest.approx(brute_iqm(x), abs=1e-14)
    with pytest.raises(ValueError):
        iqm([1, 2, 3])


@settings(max_examples=200, deadline=None)
@given(x=st.lists(finite, min_size=4, max_size=40))
def test_iqm_bounded_and_matches_oracle(x):
    v = iqm(x)
    assert min(x) - 1e-9 <= v <= max(x) + 1e-9
    assert v == pytest.approx(brute_iqm(x), rel=1e-9, abs=1e-6)


def test_bootstrap_examples():
    assert bootstrap_ci_iqm([2.0] * 10) == (2.0, 2.0)
    x = np.random.default_rng(1).normal(size=30)
    assert bootstrap_ci_iqm(x) == bootstrap_ci_iqm(x)
    lo, hi = bootstrap_ci_iqm(x)
    assert lo <= iqm(x) <= hi


def test_bootstrap_width_matches_asymptotics():
    rng = np.random.default_rng(2)
    widths = []
    for r in range(1000):
        lo, hi = bootstrap_ci_iqm(rng.normal(size=100), n_resamples=1000, seed=r)
        widths.append(hi - lo)
    expected = iqm_standard_error(100) * 2 * 1.96
    assert abs(np.mean(widths) / expected - 1) < 0.30


def test_mwu_examples():
    u, p = mann_whitney_two_sided([1, 2], [3, 4])
    assert u == 0.0 and p == pytest.approx(2 / 6)
    assert mann_whitney_two_sided([1, 2, 3], [1, 2, 3])[1] == 1.0
    with pytest.raises(ValueError):
        mann_whitney_two_sided([], [1.0])


def test_mwu_asymptotic_close_to_exact_at_n15():
    rng = np.random.default_rng(3)
    for _ in range(20):
        x, y = rng.normal(size=15), rng.normal(0.4, size=15)
        pe = mann_whitney_two_sided(x, y, "exact")[1]
        pa = mann_whitney_two_sided(x, y, "asymptotic")[1]
        assert abs(pe - pa) < 0.01


@settings(max_examples=100, deadline=None)
@given(x=st.lists(st.integers(0, 5), min_size=1, max_size=6), y=st.lists(st.integers(0, 5), min_size=1, max_size=6))
def test_mwu_exact_matches_enumeration_with_ties(x, y):
    u, p = mann_whitney_two_sided(x, y, "exact")
    u_o, p_o = brute_mwu(x, y)
    assert u == u_o
    assert p == pytest.approx(p_o, abs=1e-12)
    assert 0.0 < p <= 1.0


def test_holm_examples():
    assert holm_bonferroni([0.01]).tolist() == [0.01]
    assert np.allclose(holm_bonferroni([0.01] * 5), [0.05] * 5)
    with pytest.raises(ValueError):
        holm_bonferroni([0.5, 1.2])


@settings(max_examples=200, deadline=None)
@given(p=st.lists(st.floats(0, 1), min_size=1, max_size=12))
def test_holm_properties(p):
    adj = holm_bonferroni(p)
    assert np.all(adj >= np.array(p) - 1e-15)
    assert np.allclose(adj, brute_holm(p), atol=1e-15)
    order = np.argsort(p, kind="stable")
    assert np.all(np.diff(adj[order]) >= -1e-15)


def test_permutation_examples():
    rng = np.random.default_rng(4)
    ps = []
    for _ in range(100):
        a = rng.normal(size=10)
        ps.append(permutation_one_sided(a, a.copy(), "less", n_shuffles=2000, rng=rng, mode="monte_carlo"))
    assert min(ps) >= 0.4
    a, b = np.arange(50.0), np.arange(50.0) + 1000
    assert permutation_one_sided(a, b, "less", rng=0) == 1 / (1 + 100_000)
    with pytest.raises(ValueError):
        permutation_one_sided(a, b, None)


def test_permutation_monte_carlo_matches_enumeration_n3():
    rng = np.random.default_rng(5)
    for _ in range(5):
        a, b = rng.normal(size=3), rng.normal(0.5, size=3)
        exact = brute_permutation(a, b, "less")
        n = 20_000
        mc = permutation_one_sided(a, b, "less", n_shuffles=n, rng=rng, mode="monte_carlo")
        # binomial Monte-Carlo error plus the smoothing offset
        bound = 4 * np.sqrt(exact * (1 - exact) / n) + 1 / (1 + n)
        assert abs(mc - exact) <= bound


@settings(max_examples=60, deadline=None)
@given(a=st.lists(st.integers(-5, 5), min_size=1, max_size=6), b=st.lists(st.integers(-5, 5), min_size=1, max_size=6),
       direction=st.sampled_from(["less", "greater"]))
def test_permutation_exact_matches_enumeration(a, b, direction):
    p = permutation_one_sided(a, b, direction, mode="exact")
    assert p == pytest.approx(brute_permutation(a, b, direction), abs=1e-12)
    assert 0.0 < p <= 1.0


def test_pure_functions():
    x, y = np.arange(8.0), np.arange(8.0)[::-1] * 1.5
    assert permutation_one_sided(x, y, "less", n_shuffles=500, rng=3, mode="monte_carlo") == \
        permutation_one_sided(x, y, "less", n_shuffles=500, rng=3, mode="monte_carlo")
    assert mann_whitney_two_sided(x, y) == mann_whitney_two_sided(x, y)


def test_markers():
    assert [significance_marker(p) for p in (0.2, 0.04, 0.009, 0.0009, 0.05, 0.01, 0.001)] == \
        ["", "*", "**", "***", "", "*", "**"]


def test_policy_arm_lower_bound_is_binomial_quantile():
    from scipy import stats

    lb = policy_arm_lower_bound(1000, 0.2, 0.99, n_windows=50)
    assert lb == int(stats.binom.ppf(0.01 / 50, 1000, 0.8))
    assert stats.binom.cdf(lb - 1, 1000, 0.8) < 0.01 / 50


def test_enumeration_counts():
    assert len(list(itertools.combinations(range(6), 3))) == 20
