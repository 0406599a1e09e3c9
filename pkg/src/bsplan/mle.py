"""Maximum likelihood estimation of the cause rates from interval counts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .model import FailureRates, IntervalData, SamplingPlan, multinomial_log_coef, outcome_log_pmf

BISECTION_TOL = 1e-12


@dataclass(frozen=True)
class RateEstimate:
    """MLE of the total and per-cause rates.

    ``used_fallback`` marks the no-failure convention ``1 / (n tau_k)``;
    ``unbounded`` marks data for which the likelihood increases without bound
    (every unit failed in the first interval), with ``total = inf``.
    """

    total: float
    per_cause: tuple[float, ...]
    used_fallback: bool = False
    unbounded: bool = False

    def reliability(self, t0: float) -> float:
        return 0.0 if self.unbounded else math.exp(-self.total * t0)


def score_g(nu, plan: SamplingPlan, data: IntervalData):
    """Profile score whose root is the MLE of the total rate.

    ``g(nu) = sum_m d_m [tau_{m-1} - gap_m / expm1(nu gap_m)] + (n - d_t) tau_k``,
    strictly increasing from ``-inf``.
    """
    d = data.padded(plan.k)
    if d.total == 0:
        raise InputError("score is undefined without failures")
    nu = np.asarray(nu, dtype=float)
    gaps = plan.gaps
    lo = plan.boundaries[:-1]
    with np.errstate(over="ignore"):
        ratio = gaps / np.expm1(nu[..., None] * gaps)
    out = (lo - ratio) @ d.per_interval + (plan.n - d.total) * plan.tau_k
    return float(out) if out.ndim == 0 else out


def _bisect_score(plan: SamplingPlan, data: IntervalData) -> float:
    lo, hi = 1e-12, 1.0
    while score_g(hi, plan, data) <= 0:
        hi *= 2.0
        if hi > 1e300:
            return math.inf
    while score_g(lo, plan, data) > 0:
        lo /= 2.0
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if score_g(mid, plan, data) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def allocate_cause_rates(total: float, data: IntervalData) -> list[float]:
    """Split the total rate across causes in proportion to their failure counts."""
    dt = data.total
    if dt == 0:
        raise InputError("cannot allocate rates without failures")
    return [float(dj) * total / dt for dj in data.per_cause]


def is_degenerate(plan: SamplingPlan, data: IntervalData) -> bool:
    """True when every unit failed in the first interval, so the MLE diverges."""
    d = data.padded(plan.k)
    return d.total == plan.n and d.per_interval[0] == d.total and d.total > 0


def fit_total_rate(plan: SamplingPlan, data: IntervalData) -> RateEstimate:
    """MLE of the total rate and its split over causes.

    Equal-interval plans use the closed form; other plans bisect the score.
    """
    d = data.padded(plan.k)
    if d.n != plan.n:
        raise InputError(f"data sample size {d.n} differs from plan n={plan.n}")
    J = d.J
    dt = d.total
    if dt == 0:
        total = 1.0 / (plan.n * plan.tau_k)
        return RateEstimate(total, tuple([total / J] * J), used_fallback=True)
    if is_degenerate(plan, d):
        per = tuple(math.inf if dj > 0 else 0.0 for dj in d.per_cause)
        return RateEstimate(math.inf, per, unbounded=True)
    if plan.is_equal_interval:
        weighted = float(np.arange(1, plan.k + 1) @ d.per_interval)
        total = -math.log1p(-dt / (weighted + (plan.n - dt) * plan.k)) / plan.h
    else:
        total = _bisect_score(plan, d)
    return RateEstimate(total, tuple(allocate_cause_rates(total, d)))


def estimate_reliability(plan: SamplingPlan, data: IntervalData, t0: float) -> float:
    """MLE of the reliability at ``t0``; 0 when the rate estimate is unbounded."""
    if t0 < 0:
        raise InputError("t0 must be non-negative")
    return fit_total_rate(plan, data).reliability(t0)


def equal_interval_rate_mle(n: int, k: int, h: float, dt, weighted):
    """Vectorized closed-form MLE for equal intervals.

    ``weighted`` is ``sum_m m * d_m`` with one-based interval index ``m``.
    Degenerate data give ``inf``.
    """
    dt = np.asarray(dt, dtype=float)
    denom = np.asarray(weighted, dtype=float) + (n - dt) * k
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(dt > 0, dt / np.where(denom > 0, denom, 1.0), 0.0)
        nu = np.where(frac >= 1.0, np.inf, -np.log1p(-np.minimum(frac, 1.0)) / h)
    return np.where(dt == 0, 1.0 / (n * k * h), nu)


def log_likelihood(rates: FailureRates, plan: SamplingPlan, data: IntervalData) -> float:
    """Log-likelihood of the cause rates, without the multinomial constant."""
    d = data.padded(plan.k)
    return outcome_log_pmf(rates, plan, d) - multinomial_log_coef(plan.n, d.counts)
