import math

import numpy as np
import pytest
from scipy import optimize

from bsplan import FailureRates, InputError, IntervalData, SamplingPlan
from bsplan.mle import (allocate_cause_rates, equal_interval_rate_mle, estimate_reliability, fit_total_rate,
                        is_degenerate, log_likelihood, score_g)
from bsplan.model import enumerate_outcomes

from conftest import table8_data
from oracles import mle_total_equal

PLAN = SamplingPlan.equal(4, 0.3, 3)


@pytest.mark.parametrize("row, r_hat", [(0, 0.971), (1, 0.973), (2, 0.860), (3, 0.753), (4, 0.693), (5, 0.693)])
def test_table8_reliability(row, r_hat):
    assert estimate_reliability(PLAN, table8_data(row), 0.1) == pytest.approx(r_hat, abs=1e-3)


@pytest.mark.parametrize("row, nu", [
    (0, -math.log(1 - 1 / 12) / 0.3),
    (1, 1 / 3.6),
    (4, math.log(3) / 0.3),
])
def test_closed_forms(row, nu):
    assert fit_total_rate(PLAN, table8_data(row)).total == pytest.approx(nu, rel=1e-12)


def test_fallback_flag():
    est = fit_total_rate(PLAN, table8_data(1))
    assert est.used_fallback and not est.unbounded


def test_allocation_row3():
    est = fit_total_rate(PLAN, table8_data(2))
    assert est.total == pytest.approx(1.5066, abs=1e-4)
    assert est.per_cause == pytest.approx((1.1300, 0.3767), abs=1e-4)


def test_allocation_maximizes_full_likelihood():
    d = table8_data(2)
    est = fit_total_rate(PLAN, d)
    res = optimize.minimize(lambda x: -log_likelihood(FailureRates(np.exp(x)), PLAN, d), np.zeros(2),
                            method="Nelder-Mead", options=dict(xatol=1e-10, fatol=1e-14, maxiter=4000))
    np.testing.assert_allclose(np.exp(res.x), est.per_cause, rtol=1e-5)


@pytest.mark.parametrize("counts, total, expected", [
    ([[2, 2]], 2.0, [1.0, 1.0]),
    ([[3]], 0.8, [0.8]),
])
def test_allocation_simple(counts, total, expected):
    assert allocate_cause_rates(total, IntervalData(counts, 5)) == pytest.approx(expected)


def test_allocation_needs_failures():
    with pytest.raises(InputError):
        allocate_cause_rates(1.0, IntervalData([[0, 0]], 3))


def test_reliability_at_zero():
    assert estimate_reliability(PLAN, table8_data(3), 0.0) == 1.0


class TestScore:
    def test_zero_at_closed_form(self):
        for d in enumerate_outcomes(PLAN, 2):
            if d.total == 0 or is_degenerate(PLAN, d):
                continue
            nu = fit_total_rate(PLAN, d).total
            assert abs(score_g(nu, PLAN, d)) < 1e-9 * PLAN.n * PLAN.tau_k

    def test_limit_signs(self):
        d = table8_data(3)
        assert score_g(1e-8, PLAN, d) < 0 < score_g(1e8, PLAN, d)

    def test_monotone(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 8))
            plan = SamplingPlan(n, np.cumsum(rng.uniform(0.05, 1.0, size=3)))
            d = IntervalData(rng.multinomial(n, [0.3, 0.2, 0.2, 0.3])[:3, None], n)
            if d.total == 0:
                continue
            a, b = np.sort(rng.uniform(0.01, 10, size=2))
            assert score_g(b, plan, d) > score_g(a, plan, d)

    def test_no_failures(self):
        with pytest.raises(InputError):
            score_g(1.0, PLAN, IntervalData(np.zeros((3, 2)), 4))


class TestBisection:
    def test_unequal_matches_numeric_max(self, rng):
        plan = SamplingPlan(6, [0.2, 0.5, 1.4])
        for _ in range(30):
            d = IntervalData(rng.multinomial(6, [0.2, 0.2, 0.2, 0.4])[:3, None], 6)
            if d.total == 0 or is_degenerate(plan, d):
                continue
            nu = fit_total_rate(plan, d).total
            ref = optimize.minimize_scalar(lambda x: -log_likelihood(FailureRates([x]), plan, d),
                                           bounds=(1e-6, 100), method="bounded", options=dict(xatol=1e-12))
            assert nu == pytest.approx(ref.x, rel=1e-6)

    def test_equal_plan_bisection_agrees(self, rng):
        # perturb the equal plan imperceptibly so the bisection path is taken
        bumped = SamplingPlan(4, [0.3, 0.6, 0.9 + 1e-13])
        for d in list(enumerate_outcomes(PLAN, 2))[::7]:
            if d.total == 0 or is_degenerate(PLAN, d):
                continue
            assert fit_total_rate(bumped, d).total == pytest.approx(fit_total_rate(PLAN, d).total, rel=1e-9)


def test_degenerate_is_unbounded():
    d = IntervalData([[3, 1], [0, 0], [0, 0]], 4)
    est = fit_total_rate(PLAN, d)
    assert est.unbounded and math.isinf(est.total)
    assert estimate_reliability(PLAN, d, 0.1) == 0.0


def test_vectorized_matches_oracle():
    outs = list(enumerate_outcomes(PLAN, 2))
    tot = np.array([o.per_interval for o in outs])
    nu = equal_interval_rate_mle(4, 3, 0.3, tot.sum(axis=1), tot @ np.arange(1, 4))
    ref = np.array([mle_total_equal(4, 0.3, 3, o.counts) for o in outs])
    np.testing.assert_allclose(nu, ref, rtol=1e-12)


def test_sample_size_mismatch():
    with pytest.raises(InputError):
        fit_total_rate(PLAN, IntervalData(np.zeros((3, 2)), 5))
