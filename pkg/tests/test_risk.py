import math

import numpy as np
import pytest

from bsplan import DecisionRule, InputError, SamplingPlan
from bsplan.prior import expected_acceptance_cost
from bsplan.risk import (acceptance_probability, approx_bayes_risk, approx_bayes_risk_quad, bayes_risk,
                         complete_data_penalty, expected_all_failed_prob, expected_counts, no_sampling_risk,
                         penalty_engine, penalty_exact, penalty_mc)

from oracles import expected_counts_oracle

# Full enumeration of (4, 0.30, 3) with scipy quadrature per outcome (tests/oracles.py).
ORACLE = dict(penalty=-8.394727195163947, p_accept=0.4888324103141328, e_failures=3.3369444590697546,
              e_duration=0.7401285727025328, e_inspections=2.4670952423417765, risk=33.908257015648424)
REL = DecisionRule.reliability(0.76)
BAYES = DecisionRule.bayes()


def _identity(report, plan, costs):
    return (costs.c_reject + plan.n * (costs.c_sample - costs.salvage) + costs.c_time * report.e_duration
            + costs.c_inspect * report.e_inspections + costs.salvage * report.e_failures + report.penalty_r1)


class TestAllFailed:
    def test_oracle_value(self, prior1):
        plan = SamplingPlan.equal(4, 0.3, 3)
        assert expected_all_failed_prob(plan, prior1, 1) == pytest.approx(0.137368, abs=1e-6)

    def test_mc(self, prior1, rng):
        nu = rng.gamma(2.8, 1.0, size=1_000_000)
        vals = (1 - np.exp(-nu * 0.3)) ** 4
        got = expected_all_failed_prob(SamplingPlan.equal(4, 0.3, 3), prior1, 1)
        assert abs(got - vals.mean()) < 3 * vals.std() / 1000

    def test_single_unit(self, prior1):
        plan = SamplingPlan(1, [0.2, 0.7])
        assert expected_all_failed_prob(plan, prior1, 2) == pytest.approx(1 - (1 / 1.7) ** 2.8, rel=1e-13)

    def test_far_epoch(self, prior1):
        assert expected_all_failed_prob(SamplingPlan(3, [1e6]), prior1, 1) == pytest.approx(1.0, abs=1e-6)

    def test_quadrature_path(self, prior1, rng):
        plan = SamplingPlan.equal(60, 2.0, 2)
        nu = rng.gamma(2.8, 1.0, size=1_000_000)
        vals = (1 - np.exp(-nu * 2.0)) ** 60
        assert abs(expected_all_failed_prob(plan, prior1, 1) - vals.mean()) < 3 * vals.std() / 1000

    @pytest.mark.parametrize("i", [0, 4])
    def test_index_range(self, prior1, i):
        with pytest.raises(InputError):
            expected_all_failed_prob(SamplingPlan.equal(4, 0.3, 3), prior1, i)


class TestCounts:
    def test_table1(self, prior1, plan_opt):
        c = expected_counts(plan_opt, prior1)
        assert c["e_failures"] == pytest.approx(ORACLE["e_failures"], rel=1e-12)
        assert c["e_inspections"] == pytest.approx(ORACLE["e_inspections"], rel=1e-9)
        assert c["e_duration"] == pytest.approx(ORACLE["e_duration"], rel=1e-9)

    @pytest.mark.parametrize("n, h, k", [(4, 0.3, 3), (7, 0.14, 2), (13, 0.1, 5), (2, 1.0, 4)])
    def test_duration_is_spacing_times_inspections(self, prior1, n, h, k):
        c = expected_counts(SamplingPlan.equal(n, h, k), prior1)
        assert c["e_duration"] == pytest.approx(h * c["e_inspections"], rel=1e-12)

    def test_unequal_vs_oracle(self, prior1):
        epochs = [0.15, 0.5, 0.6, 1.3]
        ed, et, em = expected_counts_oracle(2.8, 1.0, 5, np.array(epochs))
        c = expected_counts(SamplingPlan(5, epochs), prior1)
        assert (c["e_failures"], c["e_duration"], c["e_inspections"]) == pytest.approx((ed, et, em), rel=1e-9)

    def test_single_inspection(self, prior1):
        c = expected_counts(SamplingPlan(6, [0.8]), prior1)
        assert c["e_inspections"] == 1.0 and c["e_duration"] == pytest.approx(0.8)


class TestPenalty:
    @pytest.mark.parametrize("rule", [REL, BAYES], ids=["reliability", "bayes"])
    def test_exact_matches_oracle(self, rule, prior1, costs1, plan_opt):
        assert penalty_exact(plan_opt, rule, prior1, costs1) == pytest.approx(ORACLE["penalty"], rel=1e-9)
        assert penalty_engine(plan_opt, rule, prior1, costs1) == pytest.approx(ORACLE["penalty"], rel=1e-9)

    def test_back_solved_from_published_risk(self, prior1, costs1, plan_opt):
        rest = 40 + 4 * 0.25 + 0.3 * 0.740 + 0.1 * 2.467 + 0.25 * 3.337
        assert penalty_exact(plan_opt, REL, prior1, costs1) == pytest.approx(33.90826 - rest, abs=2e-3)

    @pytest.mark.parametrize("rule", [REL, BAYES], ids=["reliability", "bayes"])
    def test_mc_agreement(self, rule, prior1, costs1, plan_opt):
        est, se = penalty_mc(plan_opt, rule, prior1, costs1, 100_000, 2, return_se=True)
        assert abs(est - ORACLE["penalty"]) < 3 * se

    def test_unequal_paths_agree(self, prior1, costs1):
        plan = SamplingPlan(3, [0.2, 0.45, 1.0])
        rule = DecisionRule.reliability(0.8)
        exact = penalty_exact(plan, rule, prior1, costs1)
        assert penalty_engine(plan, rule, prior1, costs1) == pytest.approx(exact, rel=1e-8)
        est, se = penalty_mc(plan, rule, prior1, costs1, 100_000, 5, return_se=True)
        assert abs(est - exact) < 3 * se

    def test_empty_acceptance_set(self, prior1, costs1, plan_opt):
        never = DecisionRule.reliability(1.0)
        assert penalty_exact(plan_opt, never, prior1, costs1) == 0.0
        assert penalty_mc(plan_opt, never, prior1, costs1, 100, 0) == 0.0

    def test_zero_draws(self, prior1, costs1, plan_opt):
        with pytest.raises(InputError):
            penalty_mc(plan_opt, REL, prior1, costs1, 0)

    def test_complete_data_bound(self, prior1, costs1):
        for n, h, k in [(1, 0.3, 1), (4, 0.3, 3), (4, 0.05, 5), (7, 0.14, 2)]:
            bound = complete_data_penalty(n, prior1, costs1)
            assert bound <= penalty_engine(SamplingPlan.equal(n, h, k), BAYES, prior1, costs1) + 1e-12


class TestAcceptance:
    @pytest.mark.parametrize("rule", [REL, BAYES], ids=["reliability", "bayes"])
    def test_table1(self, rule, prior1, costs1, plan_opt):
        assert acceptance_probability(plan_opt, rule, prior1, costs1) == pytest.approx(ORACLE["p_accept"], rel=1e-9)

    def test_accept_everything(self, prior1, costs1, plan_opt):
        assert acceptance_probability(plan_opt, BAYES, prior1, costs1.replace(c_reject=1e9)) == pytest.approx(1.0)


class TestBayesRisk:
    @pytest.mark.parametrize("rule", [REL, BAYES], ids=["reliability", "bayes"])
    def test_table1(self, rule, prior1, costs1, plan_opt):
        rep = bayes_risk(plan_opt, rule, prior1, costs1)
        assert rep.total_risk == pytest.approx(ORACLE["risk"], rel=1e-10)
        assert rep.total_risk == pytest.approx(33.90826, abs=1e-5)

    def test_table2_cr30(self, prior1, costs1):
        rep = bayes_risk(SamplingPlan.equal(3, 0.41, 3), DecisionRule.reliability(0.80), prior1,
                         costs1.replace(c_reject=30.0))
        assert rep.total_risk == pytest.approx(28.07, abs=0.01)

    @pytest.mark.parametrize("plan, rule", [
        (SamplingPlan.equal(4, 0.3, 3), REL),
        (SamplingPlan(5, [0.1, 0.5, 0.55]), BAYES),
        (SamplingPlan.equal(30, 0.05, 2), DecisionRule.reliability(0.7)),
    ])
    def test_decomposition(self, plan, rule, prior1, costs1):
        rep = bayes_risk(plan, rule, prior1, costs1)
        assert rep.total_risk == pytest.approx(_identity(rep, plan, costs1), abs=1e-9)
        assert math.fsum(v for _, v in rep.decomposition) == pytest.approx(rep.total_risk, abs=1e-12)

    @pytest.mark.parametrize("c_reject", [20.0, 40.0, 90.0])
    def test_no_sampling(self, c_reject, prior1, costs1):
        c = costs1.replace(c_reject=c_reject)
        rep = bayes_risk(SamplingPlan.no_sampling(), BAYES, prior1, c)
        assert rep.total_risk == pytest.approx(min(expected_acceptance_cost(prior1, c), c_reject), rel=1e-14)
        assert rep.total_risk == no_sampling_risk(prior1, c)


class TestApprox:
    def test_table7_plan(self, prior1, costs2):
        plan = SamplingPlan.equal(13, 0.102, 5)
        quad = approx_bayes_risk_quad(plan, 0.761, prior1, costs2)
        est, se = approx_bayes_risk(plan, 0.761, prior1, costs2, 100_000, 4, return_se=True)
        assert abs(est - quad) < 3 * se
        # the published 31.4662 is a single Monte Carlo estimate; the expectation lies 0.059 above it
        assert quad == pytest.approx(31.52543, abs=1e-4)

    def test_never_accept_limit(self, prior1, costs2):
        # The normal approximation keeps some acceptance mass for very reliable
        # lots even at r0 = 1, so the fixed costs are approached from below.
        plan = SamplingPlan.equal(13, 0.1, 5)
        c = expected_counts(plan, prior1)
        common = 40 + 13 * 0.05 + 0.3 * c["e_duration"] + 0.1 * c["e_failures"]
        gaps = [common - approx_bayes_risk_quad(plan, r0, prior1, costs2) for r0 in (0.9, 0.97, 0.99, 1.0)]
        assert all(a > b > 0 for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 0.2 * gaps[0]

    def test_large_sample_close_to_exact(self, prior1, costs1):
        plan = SamplingPlan.equal(200, 0.1, 2)
        exact = bayes_risk(plan, DecisionRule.reliability(0.76), prior1, costs1).total_risk
        assert approx_bayes_risk(plan, 0.76, prior1, costs1, 100_000, 6) == pytest.approx(exact, rel=0.01)

    @pytest.mark.parametrize("kwargs", [dict(n_draws=0), dict(r0=1.5)])
    def test_invalid(self, kwargs, prior1, costs2):
        args = dict(r0=0.7, n_draws=10)
        args.update(kwargs)
        with pytest.raises(InputError):
            approx_bayes_risk(SamplingPlan.equal(3, 0.1, 2), args["r0"], prior1, costs2, args["n_draws"])
