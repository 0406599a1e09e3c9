"""Gamma-Dirichlet prior on cause-specific failure rates.

The total rate ``nu`` is gamma(alpha, rate=eta) and, independently, the cause
fractions ``nu_j / nu`` are Dirichlet(dir_alphas).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln, logsumexp

from .costs import CostModel, acceptance_cost, cost_polynomial
from .errors import InputError, NumericalInstabilityError
from .model import FailureRates, IntervalData, SamplingPlan, multinomial_log_coef, log_interval_probs

#: Largest number of failures for which alternating binomial sums are trusted.
MAX_STABLE_FAILURES = 40
#: Largest ratio between the biggest term and the result of an alternating sum.
MAX_CANCELLATION = 1e10


@dataclass(frozen=True)
class PriorSpec:
    alpha: float
    eta: float
    dir_alphas: tuple[float, ...]

    def __post_init__(self):
        a = tuple(float(x) for x in np.atleast_1d(self.dir_alphas))
        object.__setattr__(self, "dir_alphas", a)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "eta", float(self.eta))
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise InputError(f"alpha must be positive, got {self.alpha}")
        if not (self.eta > 0 and np.isfinite(self.eta)):
            raise InputError(f"eta must be positive, got {self.eta}")
        if len(a) < 1 or not all(x > 0 and np.isfinite(x) for x in a):
            raise InputError(f"dir_alphas must be positive, got {a}")

    @property
    def alpha0(self) -> float:
        return math.fsum(self.dir_alphas)

    @property
    def J(self) -> int:
        return len(self.dir_alphas)

    def replace(self, **changes) -> "PriorSpec":
        fields = dict(alpha=self.alpha, eta=self.eta, dir_alphas=self.dir_alphas)
        fields.update(changes)
        return PriorSpec(**fields)


def prior_log_density(prior: PriorSpec, rates: FailureRates) -> float:
    """Log joint density of the cause rates."""
    nu_j = rates.as_array() if isinstance(rates, FailureRates) else np.asarray(rates, dtype=float)
    if nu_j.shape[-1] != prior.J:
        raise InputError(f"rates have {nu_j.shape[-1]} causes, prior has {prior.J}")
    if np.any(nu_j <= 0):
        raise InputError("rates must be positive")
    a = np.asarray(prior.dir_alphas)
    nu = nu_j.sum(axis=-1)
    out = (prior.alpha * math.log(prior.eta) - gammaln(prior.alpha)
           + (prior.alpha - prior.alpha0) * np.log(nu) - prior.eta * nu
           + gammaln(prior.alpha0) - gammaln(a).sum()
           + ((a - 1.0) * np.log(nu_j)).sum(axis=-1))
    return float(out) if np.ndim(out) == 0 else out


def sample_prior(prior: PriorSpec, rng, size: int | None = None):
    """Draw cause rates: a gamma total rate times Dirichlet fractions.

    Returns a :class:`FailureRates` when ``size`` is None, else an array of
    shape ``(size, J)``.
    """
    rng = np.random.default_rng(rng)
    m = 1 if size is None else int(size)
    total = rng.gamma(prior.alpha, 1.0 / prior.eta, size=m)
    frac = rng.dirichlet(prior.dir_alphas, size=m)
    draws = total[:, None] * frac
    if size is None:
        return FailureRates(draws[0])
    return draws


def gd_log_expectation(prior: PriorSpec, exponent_total=0.0, linear_exps=None, rate_shift=0.0) -> float:
    """``log E[nu**e * prod_j nu_j**l_j * exp(-s nu)]`` under the prior.

    Closed form: the gamma integral for the total rate times a Dirichlet moment.
    """
    a = np.asarray(prior.dir_alphas)
    l = np.zeros_like(a) if linear_exps is None else np.asarray(linear_exps, dtype=float)
    if l.shape != a.shape:
        raise InputError(f"linear_exps must have {prior.J} entries")
    if rate_shift < 0 or np.any(l < 0):
        raise InputError("rate_shift and linear exponents must be non-negative")
    L = float(l.sum())
    shape = prior.alpha + exponent_total + L
    if shape <= 0:
        raise InputError(f"total-rate exponent gives non-positive gamma shape {shape}")
    return float(prior.alpha * math.log(prior.eta) - gammaln(prior.alpha)
                 + gammaln(shape) - shape * math.log(prior.eta + rate_shift)
                 + gammaln(prior.alpha0) - gammaln(prior.alpha0 + L)
                 + (gammaln(a + l) - gammaln(a)).sum())


def gd_expectation(prior: PriorSpec, exponent_total=0.0, linear_exps=None, rate_shift=0.0) -> float:
    return math.exp(gd_log_expectation(prior, exponent_total, linear_exps, rate_shift))


def _moment_exps(J: int):
    """Monomials of the acceptance cost: (coefficient getter, linear exponents)."""
    yield (lambda c: c.c0), np.zeros(J)
    for p in range(J):
        yield (lambda c, p=p: c.c_lin[p]), np.eye(J)[p]
    for p in range(J):
        for q in range(p, J):
            yield (lambda c, p=p, q=q: c.c_quad[p, q]), np.eye(J)[p] + np.eye(J)[q]


def expected_acceptance_cost(prior: PriorSpec, costs: CostModel) -> float:
    """Prior mean of the acceptance cost (the cost of accepting without a test)."""
    if costs.J != prior.J:
        raise InputError(f"costs have {costs.J} causes, prior has {prior.J}")
    terms = [get(costs) * gd_expectation(prior, 0.0, l) for get, l in _moment_exps(prior.J)]
    return math.fsum(terms)


def _expansion_terms(plan: SamplingPlan, per_interval: np.ndarray):
    """Expand ``prod_m (1 - exp(-nu gap_m))**d_m`` into ``sum c_i exp(-nu s_i)``.

    Returns (shifts, log|c|, signs).  Equal intervals collapse to one binomial sum.
    """
    dt = int(per_interval.sum())
    if plan.is_equal_interval:
        i = np.arange(dt + 1)
        logc = gammaln(dt + 1) - gammaln(i + 1) - gammaln(dt - i + 1)
        return i * plan.h, logc, np.where(i % 2 == 0, 1.0, -1.0)
    terms = {0.0: 1.0}
    for gap, dm in zip(plan.gaps, per_interval):
        if dm == 0:
            continue
        new: dict[float, float] = {}
        for s, c in terms.items():
            for i in range(int(dm) + 1):
                key = s + i * gap
                new[key] = new.get(key, 0.0) + c * (-1) ** i * math.comb(int(dm), i)
        terms = new
    shifts = np.array(list(terms.keys()))
    coef = np.array(list(terms.values()))
    with np.errstate(divide="ignore"):
        return shifts, np.log(np.abs(coef)), np.sign(coef)


def _stable_sum(log_mags, signs) -> float:
    top = np.max(log_mags)
    vals = signs * np.exp(log_mags - top)
    total = math.fsum(vals.tolist())
    if total == 0 or np.max(np.abs(vals)) / abs(total) > MAX_CANCELLATION:
        raise NumericalInstabilityError("alternating sum cancels catastrophically")
    return total * math.exp(top)


def outcome_integral(plan: SamplingPlan, data: IntervalData, prior: PriorSpec,
                     exponent_total: float = 0.0, linear_exps=None) -> float:
    """``E_prior[nu**e prod_j nu_j**l_j P(data | nu)]`` in closed form.

    Raises NumericalInstabilityError when the data hold more than
    MAX_STABLE_FAILURES failures or the alternating sum cancels badly.
    """
    d = data.padded(plan.k)
    dt = d.total
    if dt > MAX_STABLE_FAILURES:
        raise NumericalInstabilityError(f"{dt} failures exceed the closed-form limit {MAX_STABLE_FAILURES}")
    if d.J != prior.J:
        raise InputError(f"data have {d.J} causes, prior has {prior.J}")
    l = np.zeros(prior.J) if linear_exps is None else np.asarray(linear_exps, dtype=float)
    dm = d.per_interval
    base = float(plan.boundaries[:-1] @ dm) + plan.tau_k * (plan.n - dt)
    shifts, logc, signs = _expansion_terms(plan, dm)
    keep = np.isfinite(logc)
    logs = np.array([gd_log_expectation(prior, exponent_total - dt, l + d.per_cause, base + s)
                     for s in shifts[keep]])
    coef = multinomial_log_coef(plan.n, d.counts)
    return _stable_sum(logc[keep] + logs + coef, signs[keep])


def prior_predictive(plan: SamplingPlan, data: IntervalData, prior: PriorSpec,
                     method: str = "closed", n_draws: int = 100_000, rng=None) -> float:
    """Marginal probability of ``data`` with the rates integrated over the prior."""
    if method == "closed":
        return outcome_integral(plan, data, prior)
    if method == "mc":
        draws = sample_prior(prior, rng, n_draws)
        return float(np.mean(np.exp(outcome_log_pmf_batch(draws, plan, data))))
    raise InputError(f"unknown method {method!r}")


def outcome_log_pmf_batch(rates: np.ndarray, plan: SamplingPlan, data: IntervalData) -> np.ndarray:
    """Log outcome probability for each row of an ``(N, J)`` array of cause rates."""
    d = data.padded(plan.k)
    rates = np.asarray(rates, dtype=float)
    nu = rates.sum(axis=1)
    lp = log_interval_probs(nu, plan)
    out = multinomial_log_coef(plan.n, d.counts) + lp @ d.per_interval
    out += np.log(rates / nu[:, None]) @ d.per_cause
    return out - (plan.n - d.total) * nu * plan.tau_k


def posterior_moments_closed(plan: SamplingPlan, data: IntervalData, prior: PriorSpec,
                             costs: CostModel) -> float:
    """Posterior mean of the acceptance cost by ratio of closed-form integrals."""
    norm = outcome_integral(plan, data, prior)
    terms = [get(costs) * outcome_integral(plan, data, prior, 0.0, l) for get, l in _moment_exps(prior.J)]
    return math.fsum(terms) / norm


@dataclass(frozen=True)
class RateQuadrature:
    """Quadrature over the total failure rate under the gamma prior.

    Trapezoid rule in ``log(nu)``; the integrands met here are entire functions
    of ``log(nu)`` with fast-decaying tails, so the rule converges
    geometrically in the step.
    """

    nodes: np.ndarray
    log_weights: np.ndarray

    @classmethod
    def for_prior(cls, prior: PriorSpec, n: int = 0, step: float | None = None,
                  tail: float = 1e-16, centers=()) -> "RateQuadrature":
        g = stats.gamma(prior.alpha, scale=1.0 / prior.eta)
        lo = math.log(g.ppf(tail)) - 1.0
        hi = math.log(g.isf(tail)) + 0.5
        for c in centers:
            if c > 0 and np.isfinite(c):
                lo = min(lo, math.log(c) - 4.0)
                hi = max(hi, math.log(c) + 4.0)
        if step is None:
            step = min(0.15, 0.9 / math.sqrt(prior.alpha + n + 1.0))
        m = int(math.ceil((hi - lo) / step))
        u = lo + step * np.arange(m + 1)
        nu = np.exp(u)
        logw = g.logpdf(nu) + u + math.log(step)
        logw[[0, -1]] += math.log(0.5)
        return cls(nu, logw)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def expect(self, values) -> float:
        """Prior expectation of a function tabulated at the nodes."""
        return float(np.sum(self.weights * values))


def expected_acceptance_cost_mc(prior: PriorSpec, costs: CostModel, n_draws: int, rng):
    """Monte Carlo mean and standard error of the acceptance cost under the prior."""
    h = acceptance_cost(costs, sample_prior(prior, rng, n_draws))
    return float(h.mean()), float(h.std(ddof=1) / math.sqrt(n_draws))


def log_total_rate_likelihood(nu, plan: SamplingPlan, per_interval: np.ndarray) -> np.ndarray:
    """Log of the total-rate part of the likelihood of interval totals (no coefficient).

    ``per_interval`` may be a matrix with one vector of interval totals per row;
    the result then has shape ``(rows, len(nu))``.
    """
    t = np.atleast_2d(per_interval)
    lp = log_interval_probs(nu, plan)
    surv = plan.n - t.sum(axis=1)
    nu = np.asarray(nu, dtype=float)
    return t @ lp.T - np.outer(surv, nu) * plan.tau_k


def cost_moments_posterior(prior: PriorSpec, costs: CostModel, per_cause, m1, m2):
    """Posterior mean acceptance cost from posterior total-rate moments.

    The posterior of the fractions is Dirichlet(dir_alphas + per_cause),
    independent of the total rate.
    """
    c0, lin, quad = cost_polynomial(costs, np.asarray(prior.dir_alphas) + np.asarray(per_cause))
    return c0 + lin * m1 + quad * m2


def quadrature_posterior_moments(quad: RateQuadrature, loglik: np.ndarray):
    """Log evidence and the first two posterior moments of the total rate.

    ``loglik`` has one row per dataset and one column per quadrature node.
    """
    lw = quad.log_weights[None, :] + loglik
    logz = logsumexp(lw, axis=1)
    p = np.exp(lw - logz[:, None])
    m1 = p @ quad.nodes
    m2 = p @ quad.nodes ** 2
    return logz, m1, m2
