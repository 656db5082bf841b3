from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from gaussmia.analysis.bounds import (
    condition_gaussian,
    d_star,
    gaussian_kl,
    informed_tv_bound,
    known_cov_blocks,
    known_cov_bounds,
    known_cov_kl_upper,
)
from gaussmia.analysis.evaluation import evaluate_attack, evaluate_attacks, report_from_counts, wilson_interval
from gaussmia.analysis.theory import CHECK_IDS, norm_four_power_forms, run_theory_check
from gaussmia.attacks import AttackOutcome, Membership
from gaussmia.challenges import identity_population, standard_generator
from gaussmia.errors import EvaluationError, FactorizationError, InvalidParameter
from gaussmia.gaussians import RngStream
from gaussmia.roster import make_attack

GEN = standard_generator(identity_population(5), 4, 3, 0.2)


# --- evaluation -----------------------------------------------------------------


def test_always_in():
    rep = evaluate_attack(make_attack("always-in"), GEN, 50, RngStream(0))
    assert (rep.tpr, rep.fpr, rep.advantage) == (1.0, 1.0, 0.0)
    assert rep.trials == 50


def test_coin_advantage_near_zero():
    trials = 10_000
    rep = evaluate_attack(make_attack("coin"), standard_generator(identity_population(2), 1, 0, 0.0), trials, RngStream(1))
    assert abs(rep.advantage) <= 3 * math.sqrt(1 / (2 * trials))


def test_thread_count_does_not_change_report():
    attacks = {name: make_attack(name) for name in ("informed-np", "known-cov", "coin", "sufficient-stat")}
    one = evaluate_attacks(attacks, GEN, 200, RngStream(2), threads=1)
    eight = evaluate_attacks(attacks, GEN, 200, RngStream(2), threads=8)
    for name in attacks:
        assert dataclasses.replace(one[name], wall_ms=0) == dataclasses.replace(eight[name], wall_ms=0)


def test_attack_errors_carry_context():
    def broken(view, rng):
        raise ValueError("boom")

    with pytest.raises(EvaluationError, match=r"attack 'attack' failed \(trial 0, arm IN\): boom"):
        evaluate_attack(broken, GEN, 3, RngStream(0))


def test_evaluation_preconditions():
    with pytest.raises(InvalidParameter):
        evaluate_attack(make_attack("coin"), GEN, 0, RngStream(0))
    with pytest.raises(InvalidParameter):
        evaluate_attack(make_attack("coin"), GEN, 3, RngStream(0), threads=0)


def test_attacks_see_both_arms():
    seen = []

    def spy(view, rng):
        seen.append(view.target.copy())
        return AttackOutcome(0.0, Membership.OUT, 1.0)

    evaluate_attack(spy, GEN, 7, RngStream(0))
    assert len(seen) == 14


def test_wilson_matches_statsmodels_style_formula():
    lo, hi = wilson_interval(30, 100)
    # reference values for the Wilson score interval at 30/100
    assert lo == pytest.approx(0.2189, abs=1e-4)
    assert hi == pytest.approx(0.3958, abs=1e-4)


@settings(max_examples=200)
@given(trials=st.integers(1, 5000), data=st.data())
def test_report_invariants(trials, data):
    a = data.draw(st.integers(0, trials))
    b = data.draw(st.integers(0, trials))
    rep = report_from_counts(a, b, trials)
    assert 0 <= rep.tpr <= 1 and 0 <= rep.fpr <= 1
    assert rep.ci_low <= rep.advantage <= rep.ci_high
    assert rep.advantage == pytest.approx(rep.tpr - rep.fpr)


# --- closed forms ---------------------------------------------------------------


def test_d_star_examples():
    assert d_star(100, 0.1) == pytest.approx(200)
    assert d_star(7, 0.0) == 7
    assert d_star(30, 0.3) == pytest.approx(111)
    with pytest.raises(InvalidParameter):
        d_star(0, 0.1)


def test_informed_tv_examples():
    assert informed_tv_bound(100, 50, 0.1) == pytest.approx(0.5)
    assert informed_tv_bound(10, 0, 0.3) == 0.0
    assert informed_tv_bound(30, 111, 0.3) == pytest.approx(1.0)


def test_known_cov_bounds_example():
    rep = known_cov_bounds(100, 9, 105, 0.0)
    assert rep.tv_bound == pytest.approx(math.sqrt(105 / 262.5), rel=1e-12)
    assert rep.tv_bound == pytest.approx(0.63246, abs=1e-5)
    assert rep.d_star == 100


def test_known_cov_bounds_preconditions():
    with pytest.raises(InvalidParameter):
        known_cov_bounds(3, 5, 10, 0.1)
    with pytest.raises(InvalidParameter):
        known_cov_bounds(10, 1, 10, 0.1)


def test_known_cov_tv_increasing_in_m():
    # the n^2/(4(m+1)) term shrinks with m, so more aux data loosens the bound
    values = [known_cov_bounds(20, m, 30, 0.2).tv_bound for m in range(2, 60)]
    assert all(b > a for a, b in zip(values, values[1:]))


def joint_covs(n, m, d, rho):
    in_blk, out_blk = known_cov_blocks(n, m, rho)
    return np.kron(in_blk, np.eye(d)), np.kron(out_blk, np.eye(d))


def test_known_cov_blocks_against_simulation():
    # The blocks are the covariance of (target - aux mean, release - aux mean)
    # when the aux mean pools m + 1 points; simulate that at d = 1.
    n, pooled, rho, trials = 6, 4, 0.5, 200_000
    gen = np.random.default_rng(0)
    x = gen.standard_normal((trials, n + 1 + pooled))
    z = gen.standard_normal(trials)
    aux_mean = x[:, n + 1 :].mean(axis=1)
    release = x[:, 1 : n + 1].mean(axis=1) + rho * z - aux_mean
    in_blk, out_blk = known_cov_blocks(n, pooled - 1, rho)
    emp_in = np.cov(np.vstack([x[:, 1] - aux_mean, release]))
    emp_out = np.cov(np.vstack([x[:, 0] - aux_mean, release]))
    np.testing.assert_allclose(emp_in, in_blk, atol=0.02)
    np.testing.assert_allclose(emp_out, out_blk, atol=0.02)


@pytest.mark.parametrize("n", [4, 9, 33, 64])
@pytest.mark.parametrize("m", [2, 7, 64])
@pytest.mark.parametrize("rho", [0.0, 0.1, 0.5, 1.0])
def test_kl_exact_matches_generic_kl(n, m, rho):
    for d in (1, 5, 20):
        cov_in, cov_out = joint_covs(n, m, d, rho)
        oracle = gaussian_kl(np.zeros(2 * d), cov_in, np.zeros(2 * d), cov_out)
        got = known_cov_bounds(n, m, d, rho).kl_exact
        assert abs(got - oracle) <= 1e-8 * oracle


def test_kl_exact_nonnegative_and_below_upper_bound_grid():
    for n in range(4, 65, 5):
        for m in range(2, 65, 7):
            for rho in (0.0, 0.1, 0.5, 1.0):
                for d in (1, 8, 32):
                    rep = known_cov_bounds(n, m, d, rho)
                    assert rep.kl_exact >= 0
                    assert rep.kl_exact <= known_cov_kl_upper(n, m, d, rho) * (1 + 1e-12)


def test_gaussian_kl_examples():
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert gaussian_kl([1.0, 2.0], cov, [1.0, 2.0], cov) == pytest.approx(0.0, abs=1e-14)
    assert gaussian_kl([0.0], [[1.0]], [1.0], [[1.0]]) == pytest.approx(0.5)
    assert gaussian_kl([0.0], [[2.0]], [0.0], [[1.0]]) == pytest.approx(0.5 * (1 - math.log(2)), abs=1e-12)
    assert gaussian_kl([0.0], [[2.0]], [0.0], [[1.0]]) == pytest.approx(0.15343, abs=1e-5)


def test_gaussian_kl_rejects_singular():
    with pytest.raises(FactorizationError):
        gaussian_kl([0.0, 0.0], np.eye(2), [0.0, 0.0], np.zeros((2, 2)))


def test_gaussian_kl_against_mc():
    gen = np.random.default_rng(3)
    mu1, mu2 = np.array([0.2, -0.1]), np.array([0.0, 0.4])
    c1, c2 = np.array([[1.0, 0.3], [0.3, 0.7]]), np.array([[1.4, -0.2], [-0.2, 1.0]])
    x = gen.multivariate_normal(mu1, c1, 400_000)
    llr = stats.multivariate_normal(mu1, c1).logpdf(x) - stats.multivariate_normal(mu2, c2).logpdf(x)
    se = llr.std() / math.sqrt(x.shape[0])
    assert abs(llr.mean() - gaussian_kl(mu1, c1, mu2, c2)) <= 5 * se


def test_condition_gaussian_bivariate():
    mean, cov = condition_gaussian([1.0, 2.0], [[2.0, 0.8], [0.8, 1.0]], [1], [3.0])
    assert mean[0] == pytest.approx(1.0 + 0.8 * 1.0)
    assert cov[0, 0] == pytest.approx(2.0 - 0.64)


# --- theory checks ----------------------------------------------------------------


def test_tc2_example():
    e1 = np.array([1.0, 0.0, 0.0])
    res = run_theory_check("TC2", {"v1": e1, "v2": e1, "gamma": 1.0})
    assert res.predicted == pytest.approx(3.0)
    assert res.measured == pytest.approx(3.0)
    assert res.passed


def test_tc3_forms_at_origin():
    forms = norm_four_power_forms(1, 0.0)
    assert forms["exponent d/2+2"] == pytest.approx(3.0)
    assert forms["exponent d/2+3"] == pytest.approx(6.0)
    res = run_theory_check("TC3", {"d": 1, "s": 0.0}, rng=RngStream(0))
    assert abs(res.measured - 3.0) <= res.tolerance
    assert res.details["matches"] == {"exponent d/2+2": True, "exponent d/2+3": False}


def test_tc3_forms_closed_form_against_quadrature():
    # E|Z|^4 e^{-s|Z|^2} with |Z|^2 ~ chi2(d), by direct integration
    from scipy import integrate

    for d, s in ((1, 0.0), (4, 0.5), (10, 1.0), (3, 2.0)):
        val = integrate.quad(lambda t: t * t * math.exp(-s * t) * stats.chi2(d).pdf(t), 0, np.inf)[0]
        assert norm_four_power_forms(d, s)["exponent d/2+2"] == pytest.approx(val, rel=1e-8)


def test_tc1_identity_example():
    res = run_theory_check("TC1", {"d": 10, "n": 10, "rho": 0.0}, rng=RngStream(1))
    assert res.predicted == pytest.approx(1.0)
    assert res.passed


@pytest.mark.parametrize("check", ["TC2", "TC6", "TC8"])
def test_exact_checks_over_random_draws(check):
    res = run_theory_check(check, trials=100, rng=RngStream(5))
    err = abs(res.measured - res.predicted) / abs(res.predicted) if check == "TC2" else res.measured
    assert err <= 1e-8 and res.passed


def test_tc6_fixed_example():
    res = run_theory_check("TC6", {"m": 3, "d": 1, "sigma": 2.0, "y": [1.0, 2.0, 0.5]})
    assert res.passed


def test_tc8_fixed_example():
    res = run_theory_check("TC8", {"a": 1.0, "b": 2.0, "c": 0.7})
    assert res.passed


def test_tc4_tc5_parameter_validation():
    with pytest.raises(InvalidParameter):
        run_theory_check("TC4", {"k": 4})
    with pytest.raises(InvalidParameter):
        run_theory_check("TC5", {"k": 3})
    with pytest.raises(InvalidParameter):
        run_theory_check("TC99")


def test_tc5_quadrature_against_mc():
    from gaussmia.analysis.theory import chi2_shift_scale_kls

    k, a, r = 10, 1.0, 0.1
    fwd, rev = chi2_shift_scale_kls(k, a, r)
    gen = np.random.default_rng(0)
    y = gen.chisquare(k, 400_000)
    chi = stats.chi2(k)
    x = a + (1 + r) * y
    llr = chi.logpdf(y) - math.log1p(r) - chi.logpdf(x)
    assert abs(llr.mean() - rev) <= 5 * llr.std() / math.sqrt(y.size)
    x = a + y
    llr = chi.logpdf(y) - (chi.logpdf(x / (1 + r)) - math.log1p(r))
    assert abs(llr.mean() - fwd) <= 5 * llr.std() / math.sqrt(y.size)


def test_tv_histogram_estimator_on_known_pair():
    from gaussmia.analysis.theory import histogram_tv

    gen = np.random.default_rng(1)
    a = gen.standard_normal(200_000)
    b = gen.standard_normal(200_000) + 0.5
    exact = 2 * stats.norm.cdf(0.25) - 1
    assert abs(histogram_tv(a, b) - exact) <= 3 * math.sqrt(400 / 200_000)


def test_all_check_ids_run():
    assert CHECK_IDS == tuple(f"TC{i}" for i in range(1, 10))
