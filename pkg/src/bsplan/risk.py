"""Bayes risk of a sampling plan under a decision rule.

The risk is

    C_r + n (C_s - r_s) + C_tau E[tau] + C_I E[M] + r_s E[D_t] + R1,

where R1 sums ``E[(h(nu) - C_r) P(d | nu)]`` over the outcomes ``d`` that the
rule accepts.  Three routes to R1 are offered: per-outcome closed forms
(:func:`penalty_exact`), the grouped quadrature engine used by
:func:`bayes_risk`, and plain Monte Carlo (:func:`penalty_mc`).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import norm

from .asymptotics import total_rate_delta_sd
from .costs import CostModel, acceptance_cost, cost_polynomial
from .decision import DecisionRule
from .errors import InputError, NumericalInstabilityError, SingularInformationError
from .evaluator import (PlanEvaluator, RiskReport, assemble_report, expected_counts as _expected_counts,
                        no_sampling_report)
from .mle import estimate_reliability
from .model import DEFAULT_ENUMERATION_CAP, SamplingPlan, enumerate_outcomes
from .prior import (MAX_STABLE_FAILURES, PriorSpec, RateQuadrature, _moment_exps, _stable_sum,
                    expected_acceptance_cost, outcome_integral, sample_prior)

__all__ = [
    "RiskReport", "expected_all_failed_prob", "expected_counts", "acceptance_probability",
    "penalty_exact", "penalty_mc", "bayes_risk", "approx_bayes_risk", "approx_bayes_risk_quad",
]

MAX_DROPPED_FRACTION = 0.01


def expected_all_failed_prob(plan: SamplingPlan, prior: PriorSpec, i: int) -> float:
    """Prior probability that all ``n`` units have failed by the ``i``-th inspection.

    ``i`` counts inspections from 1.  Uses the binomial expansion
    ``sum_j C(n, j) (-1)**j (eta / (eta + j tau_i))**alpha`` and falls back to
    quadrature over the total rate when the sum cancels.
    """
    if plan.is_no_sampling:
        raise InputError("the no-sampling plan has no inspections")
    if not 1 <= i <= plan.k:
        raise InputError(f"inspection index must lie in 1..{plan.k}, got {i}")
    n = plan.n
    tau = plan.epochs[i - 1]
    if n <= MAX_STABLE_FAILURES:
        j = np.arange(n + 1)
        logc = gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1)
        logs = logc + prior.alpha * (math.log(prior.eta) - np.log(prior.eta + j * tau))
        try:
            return min(1.0, max(0.0, _stable_sum(logs, np.where(j % 2 == 0, 1.0, -1.0))))
        except NumericalInstabilityError:
            pass
    quad = RateQuadrature.for_prior(prior, n)
    with np.errstate(divide="ignore"):
        lf = n * np.log(-np.expm1(-quad.nodes * tau))
    return float(np.exp(logsumexp(lf + quad.log_weights)))


def expected_counts(plan: SamplingPlan, prior: PriorSpec) -> dict:
    """Expected failures, test duration and number of inspections.

    The test stops at the first inspection that finds every unit failed.
    """
    ed, et, em = _expected_counts(plan, prior)
    return {"e_failures": ed, "e_duration": et, "e_inspections": em}


def _accepts(rule: DecisionRule, plan, data, prior, costs) -> bool:
    if rule.kind == "reliability":
        return estimate_reliability(plan, data, costs.t0) > rule.r0
    from .decision import phi
    return phi(plan, data, prior, costs) <= costs.c_reject


def _engine_penalty(ev: PlanEvaluator, rule: DecisionRule):
    if rule.kind == "reliability":
        return ev.reliability_penalty(rule.r0)
    return ev.bayes_penalty()


def acceptance_probability(plan: SamplingPlan, rule: DecisionRule, prior: PriorSpec, costs: CostModel,
                           cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """Prior-predictive probability that the rule accepts the lot."""
    if plan.is_no_sampling:
        return no_sampling_report(prior, costs).p_accept
    return _engine_penalty(PlanEvaluator(plan, prior, costs, cap=cap), rule)[1]


def penalty_exact(plan: SamplingPlan, rule: DecisionRule, prior: PriorSpec, costs: CostModel,
                  cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """R1 summed outcome by outcome with closed-form prior integrals.

    Every outcome (interval by cause counts) is enumerated; the rule's verdict
    is computed from the data, and each accepted outcome contributes
    ``E[h(nu) P(d|nu)] - C_r E[P(d|nu)]``.  Plans with outcomes whose closed form
    is unstable are evaluated by the quadrature engine instead.
    """
    if plan.is_no_sampling:
        return no_sampling_report(prior, costs).penalty_r1
    if plan.n > MAX_STABLE_FAILURES:
        return penalty_engine(plan, rule, prior, costs)
    monomials = list(_moment_exps(prior.J))
    terms = []
    try:
        for d in enumerate_outcomes(plan, prior.J, cap):
            if not _accepts(rule, plan, d, prior, costs):
                continue
            mass = outcome_integral(plan, d, prior)
            terms.append(-costs.c_reject * mass)
            for get, l in monomials:
                coef = get(costs)
                if coef != 0:
                    terms.append(coef * outcome_integral(plan, d, prior, 0.0, l))
    except NumericalInstabilityError:
        return penalty_engine(plan, rule, prior, costs)
    return math.fsum(terms)


def penalty_engine(plan: SamplingPlan, rule: DecisionRule, prior: PriorSpec, costs: CostModel,
                   cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """R1 from outcome states grouped by sufficient statistics, by quadrature."""
    if plan.is_no_sampling:
        return no_sampling_report(prior, costs).penalty_r1
    return _engine_penalty(PlanEvaluator(plan, prior, costs, cap=cap), rule)[0]


def _accept_prob_given_rates(ev: PlanEvaluator, rule: DecisionRule, rates: np.ndarray) -> np.ndarray:
    """Sampling probability of acceptance at each row of cause rates."""
    nu = rates.sum(axis=1)
    logp = ev.log_state_given_rate(nu)                  # (S, N)
    if rule.kind == "reliability":
        acc = ev.r_hat > rule.r0
        if not acc.any():
            return np.zeros(len(nu))
        return np.exp(logsumexp(logp[acc], axis=0))
    frac = rates / nu[:, None]
    out = np.zeros(len(nu))
    cr = ev.costs.c_reject
    for dt, (sel, comps, _, phi) in ev.bayes_acceptance_table().items():
        accept = (phi <= cr).astype(float)              # (S_dt, C)
        if not accept.any():
            continue
        logmult = (gammaln(dt + 1) - gammaln(comps + 1).sum(axis=1))[None, :] \
            + np.where(comps[None, :, :] > 0, comps[None, :, :] * np.log(frac[:, None, :]), 0.0).sum(axis=2)
        state = np.exp(logp[sel]).T                     # (N, S_dt)
        out += np.einsum("ns,sc,nc->n", state, accept, np.exp(logmult))
    return out


def penalty_mc(plan: SamplingPlan, rule: DecisionRule, prior: PriorSpec, costs: CostModel,
               n_draws: int, rng=None, return_se: bool = False):
    """Monte Carlo estimate of R1 from prior draws.

    Averages ``(h(nu) - C_r) P(accept | nu)`` over draws, with the acceptance
    probability summed exactly over outcomes.
    """
    if n_draws < 1:
        raise InputError("n_draws must be >= 1")
    rng = np.random.default_rng(rng)
    if plan.is_no_sampling:
        h = acceptance_cost(costs, sample_prior(prior, rng, n_draws))
        vals = (h - costs.c_reject) * float(no_sampling_report(prior, costs).p_accept)
    else:
        ev = PlanEvaluator(plan, prior, costs)
        draws = sample_prior(prior, rng, n_draws)
        vals = np.empty(n_draws)
        for start in range(0, n_draws, 8192):
            chunk = draws[start:start + 8192]
            pa = _accept_prob_given_rates(ev, rule, chunk)
            vals[start:start + 8192] = (acceptance_cost(costs, chunk) - costs.c_reject) * pa
    est = float(np.mean(vals))
    if return_se:
        se = float(np.std(vals, ddof=1) / math.sqrt(n_draws)) if n_draws > 1 else math.inf
        return est, se
    return est


def bayes_risk(plan: SamplingPlan, rule: DecisionRule, prior: PriorSpec, costs: CostModel,
               cap: int = DEFAULT_ENUMERATION_CAP) -> RiskReport:
    """Bayes risk of ``plan`` under ``rule`` with its decomposition.

    The no-sampling plan decides on the prior alone and costs
    ``min(E[h(nu)], C_r)`` whatever the rule.
    """
    if costs.J != prior.J:
        raise InputError(f"costs have {costs.J} causes, prior has {prior.J}")
    if plan.is_no_sampling:
        return no_sampling_report(prior, costs)
    ev = PlanEvaluator(plan, prior, costs, cap=cap)
    pen, pacc = _engine_penalty(ev, rule)
    return ev.report(pen, pacc)


def _approx_common(plan: SamplingPlan, prior: PriorSpec, costs: CostModel) -> float:
    ed, et, em = _expected_counts(plan, prior)
    return (costs.c_reject + plan.n * (costs.c_sample - costs.salvage) + costs.c_time * et
            + costs.c_inspect * em + costs.salvage * ed)


def _normal_accept(nu, plan, costs, r0):
    c = np.exp(-nu * costs.t0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        s = total_rate_delta_sd(nu, plan, costs.t0)
        z = (c - r0) / s
    bad = ~np.isfinite(s) | (s <= 0)
    z = np.where(bad, np.where(c > r0, np.inf, -np.inf), z)
    return norm.cdf(z), ~np.isfinite(s)


def approx_bayes_risk(plan: SamplingPlan, r0: float, prior: PriorSpec, costs: CostModel,
                      n_draws: int, rng=None, return_se: bool = False):
    """Bayes risk with the acceptance set replaced by its normal approximation.

    Each prior draw accepts with probability ``Phi((exp(-nu t0) - r0) / S(nu))``
    where ``S`` is the delta-method standard deviation of the reliability
    estimate.  Draws whose information is singular are dropped; more than 1%
    dropped raises SingularInformationError.
    """
    if n_draws < 1:
        raise InputError("n_draws must be >= 1")
    if not 0.0 <= r0 <= 1.0:
        raise InputError("r0 must lie in [0, 1]")
    if plan.is_no_sampling:
        raise InputError("the approximation needs a test (n >= 1)")
    rng = np.random.default_rng(rng)
    draws = sample_prior(prior, rng, n_draws)
    nu = draws.sum(axis=1)
    pa, singular = _normal_accept(nu, plan, costs, r0)
    keep = ~singular
    if singular.mean() > MAX_DROPPED_FRACTION:
        raise SingularInformationError(f"{int(singular.sum())} of {n_draws} draws have singular information")
    vals = (acceptance_cost(costs, draws[keep]) - costs.c_reject) * pa[keep]
    est = _approx_common(plan, prior, costs) + float(np.mean(vals))
    if return_se:
        return est, float(np.std(vals, ddof=1) / math.sqrt(vals.size))
    return est


def approx_bayes_risk_quad(plan: SamplingPlan, r0: float, prior: PriorSpec, costs: CostModel,
                           quad: RateQuadrature | None = None) -> float:
    """Deterministic version of :func:`approx_bayes_risk` by quadrature over the total rate.

    The delta-method standard deviation depends on the rates only through
    their sum, so the cause fractions integrate out of the acceptance cost.
    """
    if plan.is_no_sampling:
        raise InputError("the approximation needs a test (n >= 1)")
    quad = quad if quad is not None else RateQuadrature.for_prior(prior, plan.n)
    c0, lin, qd = cost_polynomial(costs, prior.dir_alphas)
    nu = quad.nodes
    pa, _ = _normal_accept(nu, plan, costs, r0)
    return _approx_common(plan, prior, costs) + quad.expect((c0 + lin * nu + qd * nu ** 2 - costs.c_reject) * pa)


def no_sampling_risk(prior: PriorSpec, costs: CostModel) -> float:
    """``min(E[h(nu)], C_r)``."""
    return min(expected_acceptance_cost(prior, costs), costs.c_reject)


def complete_data_penalty(n: int, prior: PriorSpec, costs: CostModel) -> float:
    """Bayes-rule penalty when all ``n`` failure times and causes are observed exactly.

    Any inspection scheme with ``n`` units reveals less, so this bounds the
    penalty of every plan with sample size ``n`` from below.  The posterior
    mean cost is quadratic in ``v = (eta) / (eta + T)`` with ``T`` the total
    time on test, and ``v ~ Beta(alpha, n)`` a priori, so the truncated
    expectation reduces to incomplete beta functions.
    """
    from scipy.special import betainc, betaln
    from .evaluator import _cause_splits

    if n < 1:
        raise InputError("n must be positive")
    comps, logdm = _cause_splits(int(n), prior.dir_alphas)
    c0, lin, qd = cost_polynomial(costs, np.asarray(prior.dir_alphas) + comps)
    A = prior.alpha + n
    a = c0 - costs.c_reject
    b = lin * A / prior.eta
    q = qd * A * (A + 1.0) / prior.eta ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.where(q > 0, (-b + np.sqrt(b * b - 4.0 * q * a)) / (2.0 * np.where(q > 0, q, 1.0)),
                        np.where(b > 0, -a / np.where(b > 0, b, 1.0), np.where(a < 0, 1.0, 0.0)))
    vstar = np.clip(root, 0.0, 1.0)

    def partial_moment(j):
        return np.exp(betaln(prior.alpha + j, n) - betaln(prior.alpha, n)) * betainc(prior.alpha + j, n, vstar)

    vals = a * partial_moment(0) + b * partial_moment(1) + q * partial_moment(2)
    return math.fsum((np.exp(logdm) * vals).tolist())
