"""Synthetic interval-censored life tests and empirical operating characteristics."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .costs import CostModel
from .decision import DecisionRule, Verdict, bayes_rule, reliability_rule
from .errors import InputError
from .evaluator import PlanEvaluator, _equal_interval_multiplicities, _vector_bisect_mle
from .mle import equal_interval_rate_mle
from .model import FailureRates, IntervalData, SamplingPlan
from .prior import PriorSpec, sample_prior

BLOCK = 20_000


@dataclass(frozen=True)
class SimulatedTest:
    """One simulated test.  ``terminated_at`` counts inspections from 1."""

    data: IntervalData
    terminated_at: int
    duration: float


def _simulate_counts(rates: np.ndarray, plan: SamplingPlan, rng):
    """Counts ``(R, k, J)`` for ``R`` tests, one row of cause rates each.

    Each unit has one exponential latent time per cause; the unit fails at the
    smallest of them, from that cause.
    """
    R, J = rates.shape
    n, k = plan.n, plan.k
    with np.errstate(divide="ignore"):
        latent = rng.exponential(size=(R, n, J)) / rates[:, None, :]
    cause = np.argmin(latent, axis=2)
    time = np.take_along_axis(latent, cause[..., None], axis=2)[..., 0]
    # interval m (0-based) holds failures in (tau_{m}, tau_{m+1}]; k means survived
    interval = np.searchsorted(np.asarray(plan.epochs), time, side="left")
    counts = np.zeros((R, k + 1, J), dtype=np.int64)
    np.add.at(counts, (np.repeat(np.arange(R), n), interval.ravel(), cause.ravel()), 1)
    counts = counts[:, :k, :]
    cum = np.cumsum(counts.sum(axis=2), axis=1)
    done = cum == n
    terminated = np.where(done.any(axis=1), np.argmax(done, axis=1) + 1, k)
    return counts, terminated


def simulate_test(rates: FailureRates, plan: SamplingPlan, rng=None) -> SimulatedTest:
    """Run one test of ``plan`` on units with cause rates ``rates``."""
    if plan.is_no_sampling:
        raise InputError("the no-sampling plan has nothing to simulate")
    rng = np.random.default_rng(rng)
    counts, term = _simulate_counts(np.asarray([rates.as_array()]), plan, rng)
    t = int(term[0])
    return SimulatedTest(IntervalData(counts[0], plan.n), t, float(plan.epochs[t - 1]))


class _Verdicts:
    """Vectorized verdicts of a rule for simulated counts."""

    def __init__(self, plan, rule, prior, costs):
        self.plan, self.rule, self.prior, self.costs = plan, rule, prior, costs
        if rule.kind == "bayes":
            if prior is None:
                raise InputError("the Bayes rule needs a prior")
            self.ev = PlanEvaluator(plan, prior, costs)
            if plan.is_equal_interval:
                dt, w, _ = _equal_interval_multiplicities(plan.n, plan.k)
                self.offset = np.searchsorted(dt, np.arange(plan.n + 1))
            else:
                from .model import interval_total_vectors
                t = interval_total_vectors(plan.n, plan.k)
                self.lookup = {tuple(row): i for i, row in enumerate(t.tolist())}

    def __call__(self, counts: np.ndarray) -> np.ndarray:
        plan = self.plan
        per_interval = counts.sum(axis=2)
        dt = per_interval.sum(axis=1)
        if plan.is_equal_interval:
            weighted = per_interval @ np.arange(1, plan.k + 1)
        if self.rule.kind == "reliability":
            if plan.is_equal_interval:
                nu = equal_interval_rate_mle(plan.n, plan.k, plan.h, dt, weighted)
            else:
                nu = _vector_bisect_mle(plan, per_interval)
            r_hat = np.where(np.isinf(nu), 0.0, np.exp(-nu * self.costs.t0))
            return r_hat > self.rule.r0
        if plan.is_equal_interval:
            idx = self.offset[dt] + (weighted - dt)
        else:
            idx = np.array([self.lookup[tuple(r)] for r in per_interval.tolist()])
        from .costs import cost_polynomial
        c0, lin, qd = cost_polynomial(self.costs, np.asarray(self.prior.dir_alphas)[None, :] + counts.sum(axis=1))
        phi = c0 + lin * self.ev.m1[idx] + qd * self.ev.m2[idx]
        return phi <= self.costs.c_reject


def empirical_oc(plan: SamplingPlan, rule: DecisionRule, prior_or_rates, reps: int, rng=None,
                 costs: CostModel | None = None, prior: PriorSpec | None = None, threads: int = 1) -> dict:
    """Monte Carlo operating characteristics with standard errors.

    With a PriorSpec, every replication draws fresh rates from it; with
    FailureRates the rates stay fixed.  ``costs`` supplies the mission time
    (and, for the Bayes rule, the cost model); the Bayes rule also needs a
    prior, taken from ``prior_or_rates`` or ``prior``.

    Returns ``{name: (mean, standard_error)}`` for ``p_accept``,
    ``e_failures``, ``e_duration`` and ``e_inspections``.
    """
    if reps < 1:
        raise InputError("reps must be >= 1")
    if plan.is_no_sampling:
        raise InputError("the no-sampling plan has nothing to simulate")
    if costs is None:
        raise InputError("costs are required for the mission time and the decision")
    draw_prior = prior_or_rates if isinstance(prior_or_rates, PriorSpec) else None
    fixed = None if draw_prior is not None else prior_or_rates
    if fixed is not None and not isinstance(fixed, FailureRates):
        raise InputError("prior_or_rates must be a PriorSpec or FailureRates")
    verdicts = _Verdicts(plan, rule, draw_prior or prior, costs)
    seeds = np.random.SeedSequence(np.random.default_rng(rng).integers(2 ** 63)).spawn(math.ceil(reps / BLOCK))

    def block(i):
        g = np.random.default_rng(seeds[i])
        size = min(BLOCK, reps - i * BLOCK)
        rates = sample_prior(draw_prior, g, size) if draw_prior is not None else np.tile(fixed.as_array(), (size, 1))
        counts, term = _simulate_counts(rates, plan, g)
        acc = verdicts(counts)
        return np.stack([acc.astype(float), counts.sum(axis=(1, 2)).astype(float),
                         np.asarray(plan.epochs)[term - 1], term.astype(float)])

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(block, range(len(seeds))))
    else:
        parts = [block(i) for i in range(len(seeds))]
    vals = np.concatenate(parts, axis=1)
    se = vals.std(axis=1, ddof=1) / math.sqrt(reps) if reps > 1 else np.full(4, math.inf)
    names = ("p_accept", "e_failures", "e_duration", "e_inspections")
    return {name: (float(m), float(s)) for name, m, s in zip(names, vals.mean(axis=1), se)}


def decide(plan: SamplingPlan, data: IntervalData, rule: DecisionRule, prior: PriorSpec | None,
           costs: CostModel) -> Verdict:
    """Verdict of ``rule`` on observed data."""
    if rule.kind == "reliability":
        return reliability_rule(plan, data, costs.t0, rule.r0)
    if prior is None:
        raise InputError("the Bayes rule needs a prior")
    return bayes_rule(plan, data, prior, costs)
