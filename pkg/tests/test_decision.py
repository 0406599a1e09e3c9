import math

import numpy as np
import pytest

from bsplan import DecisionRule, InputError, IntervalData, SamplingPlan, Verdict
from bsplan.costs import acceptance_cost
from bsplan.decision import (bayes_rule, no_sampling_decision, phi, posterior_expected_cost,
                             posterior_expected_cost_mc, posterior_expected_cost_quad, reliability_rule)
from bsplan.mle import estimate_reliability
from bsplan.model import enumerate_outcomes
from bsplan.prior import outcome_integral, posterior_moments_closed

from conftest import table8_data
from oracles import outcome_terms

# Posterior expected acceptance cost of the six Table-8 data sets, from the
# scipy quadrature oracle (tests/oracles.py::outcome_terms, cost / mass).
PHI_ORACLE = [8.439417827908072, 6.063416954083852, 22.21889003560306,
              42.53097369234177, 55.89792018992761, 53.15544982592999]
VERDICTS = ["accept", "accept", "accept", "reject", "reject", "reject"]


@pytest.fixture(scope="module")
def outcomes():
    return list(enumerate_outcomes(SamplingPlan.equal(4, 0.3, 3), 2))


class TestRule:
    def test_constructors(self):
        assert DecisionRule.reliability(0.76).r0 == 0.76
        assert DecisionRule.bayes().r0 is None

    @pytest.mark.parametrize("kind, r0", [("reliability", None), ("reliability", 1.5), ("bayes", 0.5), ("other", None)])
    def test_invalid(self, kind, r0):
        with pytest.raises(InputError):
            DecisionRule(kind, r0)


class TestAcceptanceCost:
    def test_hand_value(self, costs1):
        assert acceptance_cost(costs1, [1.0, 1.0]) == pytest.approx(22.0)

    def test_zero_rates(self, costs1):
        assert acceptance_cost(costs1, [1e-300, 1e-300]) == pytest.approx(2.0)

    def test_vectorized(self, costs1, rng):
        nu = rng.gamma(2, 1, size=(5, 2))
        np.testing.assert_allclose(acceptance_cost(costs1, nu), [acceptance_cost(costs1, r) for r in nu])


class TestPhi:
    @pytest.mark.parametrize("row", range(6))
    def test_table8_oracle(self, row, prior1, costs1, plan_opt):
        assert posterior_expected_cost(plan_opt, table8_data(row), prior1, costs1) == pytest.approx(
            PHI_ORACLE[row], rel=1e-9)

    @pytest.mark.parametrize("row, published", [(0, 8.439), (1, 6.063), (2, 22.219), (3, 42.531), (4, 55.898),
                                                 (5, 53.155)])
    def test_table8_published(self, row, published, prior1, costs1, plan_opt):
        assert phi(plan_opt, table8_data(row), prior1, costs1) == pytest.approx(published, abs=0.01)

    def test_live_oracle(self, prior1, costs1, plan_opt):
        d = table8_data(3)
        mass, cost = outcome_terms(2.8, 1.0, (1.5, 1.8), (2.0, (4.0, 4.0), [[4, 4], [0, 4]]),
                                   np.array(plan_opt.epochs), 4, d.counts)
        assert outcome_integral(plan_opt, d, prior1) == pytest.approx(mass, rel=1e-9)
        assert posterior_expected_cost(plan_opt, d, prior1, costs1) == pytest.approx(cost / mass, rel=1e-9)

    def test_three_routes_agree(self, prior1, costs1, plan_opt, outcomes):
        for d in outcomes[::5]:
            closed = posterior_expected_cost(plan_opt, d, prior1, costs1)
            assert posterior_moments_closed(plan_opt, d, prior1, costs1) == pytest.approx(closed, rel=1e-9)
            assert posterior_expected_cost_quad(plan_opt, d, prior1, costs1) == pytest.approx(closed, rel=1e-9)

    def test_mc_all_outcomes(self, prior1, costs1, plan_opt, outcomes):
        rng = np.random.default_rng(0)
        for d in outcomes:
            est, se = posterior_expected_cost_mc(plan_opt, d, prior1, costs1, 100_000, rng, return_se=True)
            assert abs(est - posterior_expected_cost(plan_opt, d, prior1, costs1)) < 3 * se

    def test_mc_constant_cost(self, prior1, costs1, plan_opt):
        c = costs1.replace(c_lin=(0, 0), c_quad=np.zeros((2, 2)))
        assert posterior_expected_cost_mc(plan_opt, table8_data(0), prior1, c, 1000, 1) == pytest.approx(2.0)

    def test_mc_deterministic(self, prior1, costs1, plan_opt):
        a = posterior_expected_cost_mc(plan_opt, table8_data(0), prior1, costs1, 5000, 7)
        assert a == posterior_expected_cost_mc(plan_opt, table8_data(0), prior1, costs1, 5000, 7)

    def test_unequal_plan(self, prior1, costs1):
        plan = SamplingPlan(3, [0.2, 0.7])
        d = IntervalData([[1, 0], [0, 1]], 3)
        est, se = posterior_expected_cost_mc(plan, d, prior1, costs1, 200_000, 3, return_se=True)
        assert abs(est - phi(plan, d, prior1, costs1)) < 3 * se

    def test_large_sample_falls_back(self, prior1, costs1):
        plan = SamplingPlan.equal(60, 0.2, 2)
        d = IntervalData([[20, 15], [5, 5]], 60)
        assert np.isfinite(phi(plan, d, prior1, costs1))


class TestVerdicts:
    @pytest.mark.parametrize("row", range(6))
    def test_table8(self, row, prior1, costs1, plan_opt):
        d = table8_data(row)
        assert bayes_rule(plan_opt, d, prior1, costs1).value == VERDICTS[row]
        assert reliability_rule(plan_opt, d, 0.1, 0.76).value == VERDICTS[row]

    def test_reliability_tie_rejects(self, plan_opt):
        d = table8_data(3)
        r = estimate_reliability(plan_opt, d, 0.1)
        assert reliability_rule(plan_opt, d, 0.1, r) is Verdict.REJECT

    def test_bayes_tie_accepts(self, prior1, costs1, plan_opt):
        d = table8_data(3)
        c = costs1.replace(c_reject=phi(plan_opt, d, prior1, costs1))
        assert bayes_rule(plan_opt, d, prior1, c) is Verdict.ACCEPT

    def test_flip_optimality(self, prior1, costs1, plan_opt, outcomes):
        """Flipping any single verdict can only raise the accepted-set penalty."""
        for d in outcomes:
            contribution = outcome_integral(plan_opt, d, prior1) * (phi(plan_opt, d, prior1, costs1) - costs1.c_reject)
            accepted = bayes_rule(plan_opt, d, prior1, costs1) is Verdict.ACCEPT
            change_if_flipped = -contribution if accepted else contribution
            assert change_if_flipped >= 0

    def test_rules_agree_on_all_outcomes(self, prior1, costs1, plan_opt, outcomes):
        for d in outcomes:
            assert bayes_rule(plan_opt, d, prior1, costs1) == reliability_rule(plan_opt, d, 0.1, 0.76)


class TestNoSampling:
    @pytest.mark.parametrize("c_reject, verdict, risk", [(20.0, Verdict.REJECT, 20.0),
                                                         (90.0, Verdict.ACCEPT, 47.6619)])
    def test_table2_extremes(self, c_reject, verdict, risk, prior1, costs1):
        v, r = no_sampling_decision(prior1, costs1.replace(c_reject=c_reject))
        assert v is verdict
        assert r == pytest.approx(risk, abs=1e-4)

    def test_tie_accepts(self, prior1, costs1):
        from bsplan.prior import expected_acceptance_cost
        eh = expected_acceptance_cost(prior1, costs1)
        assert no_sampling_decision(prior1, costs1.replace(c_reject=eh))[0] is Verdict.ACCEPT
