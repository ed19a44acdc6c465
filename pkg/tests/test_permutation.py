import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadperm import Mode, Strategy, make_design, permutation_cdf, run_mrqap, run_qap
from dyadperm.exceptions import BudgetWarning, EmptyReplicatesError
from dyadperm.permutation import (
    MRQAPContext,
    QAPContext,
    permutation_mode,
    two_sided_pvalue,
    upper_pvalue,
)
from dyadperm.rng import PermutationStream
from oracles import all_permutations, ols_oracle, permute, qap_oracle, residual_matrix, sym


@pytest.mark.parametrize("t, expected", [(0.5, 0.0), (3.0, 1.0), (2.0, 2 / 3), (2.5, 2 / 3)])
def test_permutation_cdf(t, expected):
    assert permutation_cdf([1.0, 2.0, 3.0], t) == pytest.approx(expected)


def test_empty_replicates():
    for f in (lambda: permutation_cdf([], 0.0), lambda: two_sided_pvalue(1.0, []), lambda: upper_pvalue(1.0, [])):
        with pytest.raises(EmptyReplicatesError):
            f()


def test_literal_formula_matches_cdf_form():
    reps = np.array([-3.0, -2.0, -1.0, 0.5, 2.0, 2.0, 4.0])
    for w in (2.0, -2.0, 0.7, 5.0):
        lhs = two_sided_pvalue(w, reps, ties="literal")
        rhs = 1 - permutation_cdf(reps, abs(w)) + permutation_cdf(reps, -abs(w))
        assert lhs == pytest.approx(rhs)
    # +|W| ties are dropped by the literal formula, -|W| ties are kept
    assert two_sided_pvalue(2.0, reps, ties="literal") == pytest.approx(3 / 7)
    assert two_sided_pvalue(2.0, reps, ties="inclusive") == pytest.approx(5 / 7)


def test_add_one_and_upper():
    reps = np.arange(10.0)
    assert two_sided_pvalue(100.0, reps, add_one=True) == pytest.approx(1 / 11)
    assert upper_pvalue(7.0, reps) == pytest.approx(0.3)
    assert upper_pvalue(7.0, reps, add_one=True) == pytest.approx(4 / 11)


@pytest.mark.parametrize("n, reps, mode", [(4, 10, Mode.EXACT), (8, 999, Mode.EXACT), (9, 999, Mode.MONTE_CARLO), (9, 400_000, Mode.EXACT)])
def test_mode_threshold(n, reps, mode):
    assert permutation_mode(n, reps) is mode


def test_exact_support_n4(rng):
    a, b = sym(rng, 4), sym(rng, 4)
    r = run_qap(a, b, "plain", n_reps=5)
    assert r.mode is Mode.EXACT and r.n_reps == 24 and r.replicates.size == 24
    assert r.pvalue * 24 == pytest.approx(round(r.pvalue * 24))
    assert 0 < r.pvalue <= 1
    assert r.replicates[0] == r.observed


@pytest.mark.parametrize("statistic", ["plain", "studentized"])
def test_qap_exact_matches_bruteforce(rng, statistic):
    n = 5
    a, b = sym(rng, n), sym(rng, n)
    r = run_qap(a, b, statistic, n_reps=10)
    k = 0 if statistic == "plain" else 1
    expected = []
    for pi in all_permutations(n):
        rho, stud, _ = qap_oracle(permute(a, pi), b, "plain")
        expected.append(math.sqrt(n) * rho if k == 0 else stud)
    np.testing.assert_allclose(r.replicates, expected, rtol=1e-12, atol=1e-12)


def _strategy_oracle(a, b_list, c_list, strategy, pi):
    if strategy == "a":
        return ols_oracle(permute(a, pi), b_list + c_list, len(b_list))[3]
    if strategy == "b":
        return ols_oracle(a, [permute(b, pi) for b in b_list] + c_list, len(b_list))[3]
    if strategy == "eps-b":
        eb = [residual_matrix(b, c_list) for b in b_list]
        return ols_oracle(a, [permute(e, pi) for e in eb] + c_list, len(b_list))[3]
    e = residual_matrix(a, c_list)
    return ols_oracle(permute(e, pi), b_list + c_list, len(b_list))[3]


@pytest.mark.parametrize("strategy", ["a", "b", "eps-b", "eps"])
def test_mrqap_exact_matches_refit_oracle(rng, strategy):
    n = 5
    a, b, c = sym(rng, n), sym(rng, n), sym(rng, n)
    r = run_mrqap(make_design(a, [b], [c]), strategy, "wald", n_reps=10)
    assert r.mode is Mode.EXACT and r.replicates.size == 120
    expected = [_strategy_oracle(a, [b], [c], strategy, pi) for pi in all_permutations(n)]
    np.testing.assert_allclose(r.replicates, expected, rtol=1e-8)


@pytest.mark.parametrize("strategy", list(Strategy))
def test_mrqap_monte_carlo_matches_refits(rng, strategy):
    n = 11
    a, b1, b2, c = (sym(rng, n) for _ in range(4))
    ctx = MRQAPContext(make_design(a, [b1, b2], [c]), strategy, "plain")
    perms = PermutationStream(4).block(n, 0, 6)
    got = ctx.evaluate(perms)["wald"]
    expected = [_strategy_oracle(a, [b1, b2], [c], strategy.value, pi) for pi in perms]
    np.testing.assert_allclose(got, expected, rtol=1e-9)


def test_observed_identical_across_strategies(rng):
    d = make_design(sym(rng, 10), [sym(rng, 10)], [sym(rng, 10), sym(rng, 10)])
    for stat in ("wald", "coef"):
        vals = {s: run_mrqap(d, s, stat, n_reps=100, seed=1).observed for s in Strategy}
        assert len(set(vals.values())) == 1


@pytest.mark.parametrize("strategy", ["a", "b"])
def test_identity_replicate_equals_observed(rng, strategy):
    d = make_design(sym(rng, 6), [sym(rng, 6)], [sym(rng, 6)])
    r = run_mrqap(d, strategy, n_reps=10)
    assert r.mode is Mode.EXACT
    assert r.replicates[0] == r.observed


def test_exact_pvalue_invariants(rng):
    d = make_design(sym(rng, 6), [sym(rng, 6)], [sym(rng, 6)])
    for s in Strategy:
        r = run_mrqap(d, s, n_reps=10)
        assert r.n_reps == math.factorial(6) and 0 < r.pvalue <= 1
        assert r.alternative == "greater"
        assert r.seed is None


def test_coef_statistic_alternatives(rng):
    a = sym(rng, 12)
    one = run_mrqap(make_design(a, [sym(rng, 12)]), "b", "coef", n_reps=200, seed=3)
    two = run_mrqap(make_design(a, [sym(rng, 12), sym(rng, 12)]), "b", "coef", n_reps=200, seed=3)
    assert one.alternative == "two-sided"
    assert two.alternative == "greater" and np.all(two.replicates >= 0)


def test_single_focal_wald_tracks_studentized_qap(rng):
    n = 30
    a, b = sym(rng, n), sym(rng, n)
    w = run_mrqap(make_design(a, [b]), "b", "wald", n_reps=300, seed=5)
    q = run_qap(a, b, "studentized", n_reps=300, seed=5)
    assert w.observed == pytest.approx(q.observed**2, rel=0.05, abs=0.05)
    assert abs(w.pvalue - q.pvalue) < 0.1


def test_determinism_and_seed_sensitivity(pair):
    a, b = pair
    r1 = run_qap(a, b, n_reps=300, seed=42)
    r2 = run_qap(a, b, n_reps=300, seed=42)
    r3 = run_qap(a, b, n_reps=300, seed=43)
    assert r1 == r2
    assert r1.replicates.tobytes() == r2.replicates.tobytes()
    assert not np.array_equal(r1.replicates, r3.replicates)
    assert r1.rng_algorithm == PermutationStream.algorithm


def test_monte_carlo_pvalue_floor(rng):
    b = sym(rng, 25)
    a = b + 0.01 * sym(rng, 25)
    r = run_qap(a, b, n_reps=199, seed=0)
    assert r.mode is Mode.MONTE_CARLO
    assert r.pvalue == pytest.approx(1 / 200)


def test_budget_warning(pair):
    with pytest.warns(BudgetWarning):
        run_qap(*pair, n_reps=50)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        run_qap(*pair, n_reps=100)


def test_rejects_bad_arguments(pair):
    with pytest.raises(ValueError):
        run_qap(*pair, statistic="wald")
    with pytest.raises(ValueError):
        run_qap(*pair, n_reps=0)
    with pytest.raises(ValueError):
        run_qap(*pair, ties="midrank")


def test_eta2_constant_across_focal_permutations(rng):
    n = 15
    a, b = sym(rng, n), sym(rng, n)
    ctx = QAPContext(a, b)
    perms = PermutationStream(1).block(n, 0, 20)
    rows = ctx.rowsums(perms)
    stats = ctx.statistics(rows)
    eta1 = ctx.factor * np.sum((rows / (n - 1)) ** 2, axis=1)
    # studentized = sqrt(n) phi0 / (2 sqrt(eta1)); only eta1 varies beyond phi0
    phi0 = rows.sum(axis=1) / (n * (n - 1) - 1)
    np.testing.assert_allclose(stats["studentized"], math.sqrt(n) * phi0 / (2 * np.sqrt(eta1)), rtol=1e-12)
    for k in range(3):
        rho, stud, _ = qap_oracle(permute(a, perms[k]), b, "sen")
        assert stats["plain"][k] == pytest.approx(math.sqrt(n) * rho, rel=1e-10)
        assert stats["studentized"][k] == pytest.approx(stud, rel=1e-10)


def test_monte_carlo_error_scales_with_budget(rng):
    n = 30
    a, b = sym(rng, n), sym(rng, n)
    ctx = QAPContext(a, b)
    obs = ctx.observed()["studentized"]
    budgets = (150, 300)
    variances = []
    for reps in budgets:
        ps = []
        for s in range(400):
            perms = PermutationStream(s, index=reps).block(n, 0, reps)
            ps.append(two_sided_pvalue(obs, ctx.evaluate(perms)["studentized"], add_one=True))
        variances.append(np.var(ps))
    assert variances[0] / variances[1] == pytest.approx(2.0, rel=0.2)


@settings(max_examples=25, deadline=None)
@given(st.integers(4, 7), st.integers(0, 2**32 - 1), st.sampled_from(["plain", "studentized"]))
def test_pvalue_in_unit_interval(n, seed, statistic):
    rng = np.random.default_rng(seed)
    r = run_qap(sym(rng, n), sym(rng, n), statistic, n_reps=100, seed=seed)
    assert 0 < r.pvalue <= 1
    assert np.all(np.isfinite(r.replicates))
    if r.mode is Mode.EXACT:
        assert r.replicates.size == math.factorial(n)
        assert np.any(r.replicates == r.observed)
