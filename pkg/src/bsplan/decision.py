"""Lot disposition rules: the reliability-threshold rule and the Bayes rule."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .costs import CostModel, acceptance_cost, cost_polynomial
from .errors import InputError, NumericalInstabilityError, WeightUnderflowError
from .mle import estimate_reliability
from .model import IntervalData, SamplingPlan
from .prior import (MAX_STABLE_FAILURES, PriorSpec, RateQuadrature, _expansion_terms, _stable_sum,
                    expected_acceptance_cost, log_total_rate_likelihood, outcome_log_pmf_batch,
                    quadrature_posterior_moments, sample_prior)

__all__ = [
    "CostModel", "DecisionRule", "Verdict", "acceptance_cost", "reliability_rule",
    "posterior_expected_cost", "posterior_expected_cost_mc", "posterior_expected_cost_quad",
    "bayes_rule", "no_sampling_decision",
]


class Verdict(str, enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


@dataclass(frozen=True)
class DecisionRule:
    """Either accept when the estimated reliability exceeds ``r0``, or the Bayes rule."""

    kind: str
    r0: float | None = None

    def __post_init__(self):
        if self.kind == "reliability":
            if self.r0 is None or not 0.0 <= float(self.r0) <= 1.0:
                raise InputError(f"reliability rule needs a threshold in [0, 1], got {self.r0}")
            object.__setattr__(self, "r0", float(self.r0))
        elif self.kind == "bayes":
            if self.r0 is not None:
                raise InputError("the Bayes rule takes no threshold")
        else:
            raise InputError(f"unknown rule kind {self.kind!r}")

    @classmethod
    def reliability(cls, r0: float) -> "DecisionRule":
        return cls("reliability", r0)

    @classmethod
    def bayes(cls) -> "DecisionRule":
        return cls("bayes")


def reliability_rule(plan: SamplingPlan, data: IntervalData, t0: float, r0: float) -> Verdict:
    """Accept iff the estimated reliability at ``t0`` is strictly above ``r0``."""
    return Verdict.ACCEPT if estimate_reliability(plan, data, t0) > r0 else Verdict.REJECT


def _rate_moments_closed(plan: SamplingPlan, data: IntervalData, prior: PriorSpec):
    """Posterior mean and second moment of the total rate from alternating sums."""
    d = data.padded(plan.k)
    dt = d.total
    if dt > MAX_STABLE_FAILURES:
        raise NumericalInstabilityError(f"{dt} failures exceed the closed-form limit {MAX_STABLE_FAILURES}")
    dm = d.per_interval
    base = float(plan.boundaries[:-1] @ dm) + plan.tau_k * (plan.n - dt)
    shifts, logc, signs = _expansion_terms(plan, dm)
    keep = np.isfinite(logc)
    shifts, logc, signs = shifts[keep], logc[keep], signs[keep]
    rate = np.log(prior.eta + base + shifts)
    sums = [_stable_sum(logc + gammaln(prior.alpha + r) - (prior.alpha + r) * rate, signs) for r in range(3)]
    return sums[1] / sums[0], sums[2] / sums[0]


def posterior_expected_cost(plan: SamplingPlan, data: IntervalData, prior: PriorSpec,
                            costs: CostModel) -> float:
    """Posterior mean of the acceptance cost in closed form.

    The cause fractions have a Dirichlet(dir_alphas + per-cause counts)
    posterior independent of the total rate, whose moments come from
    alternating binomial sums.  Raises NumericalInstabilityError beyond
    MAX_STABLE_FAILURES failures.
    """
    d = data.padded(plan.k)
    if d.J != prior.J or costs.J != prior.J:
        raise InputError("data, prior and costs must have the same number of causes")
    m1, m2 = _rate_moments_closed(plan, d, prior)
    c0, lin, quad = cost_polynomial(costs, np.asarray(prior.dir_alphas) + d.per_cause)
    return float(c0 + lin * m1 + quad * m2)


def posterior_expected_cost_quad(plan: SamplingPlan, data: IntervalData, prior: PriorSpec,
                                 costs: CostModel, quad: RateQuadrature | None = None) -> float:
    """Posterior mean of the acceptance cost by quadrature over the total rate."""
    from .mle import fit_total_rate

    d = data.padded(plan.k)
    if quad is None:
        est = fit_total_rate(plan, d)
        quad = RateQuadrature.for_prior(prior, plan.n, centers=[est.total])
    loglik = log_total_rate_likelihood(quad.nodes, plan, d.per_interval)
    _, m1, m2 = quadrature_posterior_moments(quad, loglik)
    c0, lin, qc = cost_polynomial(costs, np.asarray(prior.dir_alphas) + d.per_cause)
    return float(c0 + lin * m1[0] + qc * m2[0])


def posterior_expected_cost_mc(plan: SamplingPlan, data: IntervalData, prior: PriorSpec,
                               costs: CostModel, n_draws: int = 100_000, rng=None,
                               return_se: bool = False):
    """Self-normalized importance estimate of the posterior mean acceptance cost.

    Prior draws are weighted by their likelihood; works for any inspection
    epochs.  With ``return_se`` the delta-method standard error is returned too.
    """
    if n_draws < 1:
        raise InputError("n_draws must be >= 1")
    draws = sample_prior(prior, rng, n_draws)
    logw = outcome_log_pmf_batch(draws, plan, data)
    top = np.max(logw)
    if not np.isfinite(top):
        raise WeightUnderflowError("likelihood is zero for every prior draw")
    w = np.exp(logw - top)
    h = acceptance_cost(costs, draws)
    est = float(np.sum(w * h) / np.sum(w))
    if not return_se:
        return est
    se = math.sqrt(float(np.sum(w ** 2 * (h - est) ** 2))) / float(np.sum(w))
    return est, se


def phi(plan: SamplingPlan, data: IntervalData, prior: PriorSpec, costs: CostModel) -> float:
    """Posterior expected acceptance cost, closed form with a quadrature fallback."""
    try:
        return posterior_expected_cost(plan, data, prior, costs)
    except NumericalInstabilityError:
        return posterior_expected_cost_quad(plan, data, prior, costs)


def bayes_rule(plan: SamplingPlan, data: IntervalData, prior: PriorSpec, costs: CostModel) -> Verdict:
    """Accept iff the posterior expected acceptance cost does not exceed the rejection cost."""
    return Verdict.ACCEPT if phi(plan, data, prior, costs) <= costs.c_reject else Verdict.REJECT


def no_sampling_decision(prior: PriorSpec, costs: CostModel) -> tuple[Verdict, float]:
    """Decision and risk when the lot is judged on the prior alone."""
    eh = expected_acceptance_cost(prior, costs)
    if eh <= costs.c_reject:
        return Verdict.ACCEPT, eh
    return Verdict.REJECT, costs.c_reject
