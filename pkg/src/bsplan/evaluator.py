"""Exact Bayes-risk evaluation of one sampling plan.

Two facts keep this tractable for realistic sample sizes:

* Given the total rate, the failure causes are a multinomial split of the
  failures with the cause fractions, independent of when the failures occur.
  Interval totals therefore carry all information about the total rate, and
  the cause counts carry all information about the fractions.
* With equal intervals, interval totals enter the likelihood only through
  the number of failures ``dt`` and ``w = sum_m (m - 1) d_m``, so outcomes are
  grouped by ``(dt, w)``.

Prior expectations over the total rate use :class:`RateQuadrature`; the
posterior of the fractions is Dirichlet and handled in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

from .costs import CostModel, cost_polynomial
from .errors import EnumerationCapExceeded, InputError
from .mle import equal_interval_rate_mle
from .model import DEFAULT_ENUMERATION_CAP, SamplingPlan, compositions, count_interval_vectors, interval_total_vectors
from .prior import PriorSpec, RateQuadrature, expected_acceptance_cost

CHUNK = 4096


@lru_cache(maxsize=256)
def _equal_interval_multiplicities(n: int, k: int):
    """States ``(dt, w)`` and the log number of ordered outcomes in each.

    The count of interval-total vectors with ``dt`` failures and
    ``w = sum (m-1) d_m``, weighted by multinomial coefficients, is
    ``C(n, dt) * N(dt, w)`` where ``N(dt, .)`` counts assignments of ``dt``
    labelled failures to ``k`` intervals with index sum ``w``.
    """
    dts, ws, logm = [], [], []
    row = [1]
    for dt in range(n + 1):
        if dt > 0:
            width = len(row) + k - 1
            cs = [0] * (len(row) + 1)
            for i, v in enumerate(row):
                cs[i + 1] = cs[i] + v
            row = [cs[min(w, len(row) - 1) + 1] - cs[max(0, w - k + 1)] for w in range(width)]
        lc = math.lgamma(n + 1) - math.lgamma(dt + 1) - math.lgamma(n - dt + 1)
        for w, v in enumerate(row):
            dts.append(dt)
            ws.append(w)
            logm.append(lc + math.log(v))
    return np.array(dts), np.array(ws), np.array(logm)


@lru_cache(maxsize=256)
def _cause_splits(dt: int, dir_alphas: tuple[float, ...]):
    """Cause-count vectors for ``dt`` failures and their log Dirichlet-multinomial probabilities."""
    a = np.asarray(dir_alphas)
    comps = np.array(list(compositions(dt, len(a))), dtype=float).reshape(-1, len(a))
    a0 = a.sum()
    logp = (gammaln(dt + 1) - gammaln(comps + 1).sum(axis=1)
            + gammaln(a0) - gammaln(a0 + dt) + (gammaln(a + comps) - gammaln(a)).sum(axis=1))
    return comps, logp


def _vector_bisect_mle(plan: SamplingPlan, t: np.ndarray) -> np.ndarray:
    """Total-rate MLE for each row of interval totals ``t`` by vectorized bisection."""
    dt = t.sum(axis=1)
    gaps = plan.gaps
    lo_b = plan.boundaries[:-1]
    const = t @ lo_b + (plan.n - dt) * plan.tau_k
    out = np.full(len(dt), np.nan)
    out[dt == 0] = 1.0 / (plan.n * plan.tau_k)
    degenerate = (dt == plan.n) & (t[:, 0] == dt) & (dt > 0)
    out[degenerate] = np.inf
    todo = np.flatnonzero(np.isnan(out))
    if todo.size == 0:
        return out
    tt, cc = t[todo], const[todo]

    def g(nu):
        with np.errstate(over="ignore"):
            return cc - np.sum(tt * gaps / np.expm1(nu[:, None] * gaps), axis=1)

    lo = np.full(todo.size, 1e-12)
    hi = np.ones(todo.size)
    while True:
        bad = g(hi) <= 0
        if not bad.any():
            break
        hi[bad] *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pos = g(mid) > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
        if np.all(hi - lo <= 1e-12):
            break
    out[todo] = 0.5 * (lo + hi)
    return out


@dataclass
class RiskReport:
    """Bayes risk of a plan and rule, with its cost decomposition."""

    total_risk: float
    penalty_r1: float
    p_accept: float
    e_failures: float
    e_duration: float
    e_inspections: float
    decomposition: list[tuple[str, float]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "total_risk": self.total_risk,
            "penalty_r1": self.penalty_r1,
            "p_accept": self.p_accept,
            "e_failures": self.e_failures,
            "e_duration": self.e_duration,
            "e_inspections": self.e_inspections,
            "decomposition": {k: v for k, v in self.decomposition},
        }


@dataclass
class ThresholdResult:
    """Best reliability threshold for a plan: the optimal step ``[lo, hi)`` and a representative."""

    r0: float
    lo: float
    hi: float
    risk: float
    penalty: float
    p_accept: float


def report_threshold(lo: float, hi: float) -> float:
    """Representative of the threshold interval ``[lo, hi)``.

    The smallest two-decimal value inside the interval, else its midpoint.
    """
    r = math.ceil(round(lo * 100, 9)) / 100
    if lo <= r < hi:
        return r
    return 0.5 * (lo + hi)


class PlanEvaluator:
    """Outcome states of one plan with their prior-predictive probabilities and posteriors."""

    def __init__(self, plan: SamplingPlan, prior: PriorSpec, costs: CostModel,
                 quad: RateQuadrature | None = None, cap: int = DEFAULT_ENUMERATION_CAP):
        if plan.is_no_sampling:
            raise InputError("the no-sampling plan has no outcomes")
        if costs.J != prior.J:
            raise InputError(f"costs have {costs.J} causes, prior has {prior.J}")
        self.plan, self.prior, self.costs = plan, prior, costs
        self.quad = quad if quad is not None else RateQuadrature.for_prior(prior, plan.n)
        n, k = plan.n, plan.k
        nodes = self.quad.nodes
        if plan.is_equal_interval:
            dt, w, logm = _equal_interval_multiplicities(n, k)
            self.nu_hat = equal_interval_rate_mle(n, k, plan.h, dt, w + dt)
            self._expo = w + k * (n - dt)
        else:
            size = count_interval_vectors(n, k)
            if size > cap:
                raise EnumerationCapExceeded(size, cap)
            t = interval_total_vectors(n, k)
            dt = t.sum(axis=1)
            logm = gammaln(n + 1) - gammaln(t + 1).sum(axis=1) - gammaln(n - dt + 1)
            self.nu_hat = _vector_bisect_mle(plan, t)
            self._totals = t
        self.dt, self.log_mult = dt, logm
        S = len(dt)
        self.log_p = np.empty(S)
        self.m1 = np.empty(S)
        self.m2 = np.empty(S)
        c0, lin, qd = cost_polynomial(costs, prior.dir_alphas)
        for start in range(0, S, CHUNK):
            sl = slice(start, min(S, start + CHUNK))
            lw = self.quad.log_weights[None, :] + self.log_state_given_rate(nodes, sl)
            lz = logsumexp(lw, axis=1)
            p = np.exp(lw - lz[:, None])
            self.log_p[sl] = lz
            self.m1[sl] = p @ nodes
            self.m2[sl] = p @ nodes ** 2
        self.prob = np.exp(self.log_p)
        # prior-predictive weighted penalty of accepting each state
        self.delta = self.prob * (c0 + lin * self.m1 + qd * self.m2 - costs.c_reject)
        self.r_hat = np.where(np.isinf(self.nu_hat), 0.0, np.exp(-self.nu_hat * costs.t0))

    def log_state_given_rate(self, nu, sl=slice(None)) -> np.ndarray:
        """``log P(state | nu)`` for the selected states (rows) at each total rate (columns)."""
        nu = np.asarray(nu, dtype=float)
        plan = self.plan
        with np.errstate(divide="ignore"):
            if plan.is_equal_interval:
                a = np.log(-np.expm1(-nu * plan.h))
                b = -nu * plan.h
                out = self.dt[sl, None] * a[None, :] + self._expo[sl, None] * b[None, :]
            else:
                lp = np.log(-np.expm1(-nu[:, None] * plan.gaps)) - nu[:, None] * plan.boundaries[:-1]
                out = self._totals[sl] @ lp.T - (plan.n - self.dt[sl])[:, None] * (nu * plan.tau_k)[None, :]
        return np.nan_to_num(out, nan=-np.inf) + self.log_mult[sl, None]

    def bayes_acceptance_table(self):
        """For each failure count, cause splits and the Bayes verdict per (state, split)."""
        a = np.asarray(self.prior.dir_alphas)
        table = {}
        for dt in np.unique(self.dt):
            sel = np.flatnonzero(self.dt == dt)
            comps, logdm = _cause_splits(int(dt), self.prior.dir_alphas)
            c0, lin, qd = cost_polynomial(self.costs, a + comps)
            phi = c0 + np.outer(self.m1[sel], lin) + np.outer(self.m2[sel], qd)
            table[int(dt)] = (sel, comps, logdm, phi)
        return table

    # ----------------------------------------------------------------- rules
    def reliability_penalty(self, r0: float):
        """Penalty and acceptance probability of the threshold rule at ``r0``."""
        acc = self.r_hat > r0
        return float(np.sum(self.delta[acc])), float(np.sum(self.prob[acc]))

    def bayes_penalty(self):
        """Penalty and acceptance probability of the Bayes rule."""
        cr = self.costs.c_reject
        pen, pacc = [], []
        for sel, comps, logdm, phi in self.bayes_acceptance_table().values():
            w = np.exp(self.log_p[sel][:, None] + logdm[None, :])
            accept = phi <= cr
            pen.append(np.sum(np.where(accept, w * (phi - cr), 0.0)))
            pacc.append(np.sum(np.where(accept, w, 0.0)))
        return math.fsum(pen), math.fsum(pacc)

    def optimal_threshold(self) -> ThresholdResult:
        """Threshold minimizing the penalty over the finite set of estimate values."""
        order = np.argsort(-self.r_hat, kind="stable")
        r = self.r_hat[order]
        d = self.delta[order]
        p = self.prob[order]
        # group ties so a threshold cannot split them
        ends = np.flatnonzero(np.diff(r) < 0)
        ends = np.append(ends, len(r) - 1)
        cum = np.concatenate([[0.0], np.cumsum(d)[ends]])
        cump = np.concatenate([[0.0], np.cumsum(p)[ends]])
        # a zero estimate is never above a threshold in [0, 1]
        n_ok = 1 + int(np.sum(r[ends] > 0))
        best = int(np.argmin(cum[:n_ok]))
        hi = 1.0 if best == 0 else float(r[ends[best - 1]])
        lo = float(r[ends[best]]) if best < len(ends) else 0.0
        r0 = report_threshold(lo, hi)
        pen, pacc = self.reliability_penalty(r0)
        return ThresholdResult(r0=r0, lo=lo, hi=hi, risk=self.base_cost() + pen, penalty=pen, p_accept=pacc)

    # ----------------------------------------------------------------- costs
    def expected_counts(self):
        return expected_counts(self.plan, self.prior, self.quad)

    def base_cost(self) -> float:
        c = self.costs
        ed, et, em = self.expected_counts()
        return (c.c_reject + self.plan.n * (c.c_sample - c.salvage) + c.c_time * et
                + c.c_inspect * em + c.salvage * ed)

    def report(self, penalty: float, p_accept: float) -> RiskReport:
        return assemble_report(self.plan, self.costs, self.expected_counts(), penalty, p_accept)


def assemble_report(plan: SamplingPlan, costs: CostModel, counts, penalty: float, p_accept: float) -> RiskReport:
    ed, et, em = counts
    parts = [
        ("rejection", costs.c_reject),
        ("sampling", plan.n * (costs.c_sample - costs.salvage)),
        ("duration", costs.c_time * et),
        ("inspection", costs.c_inspect * em),
        ("salvage_loss", costs.salvage * ed),
        ("penalty", penalty),
    ]
    return RiskReport(total_risk=math.fsum(v for _, v in parts), penalty_r1=penalty, p_accept=p_accept,
                      e_failures=ed, e_duration=et, e_inspections=em, decomposition=parts)


def all_failed_probs(plan: SamplingPlan, quad: RateQuadrature) -> np.ndarray:
    """``E[(1 - exp(-nu tau_i))**n]`` for every epoch, by quadrature."""
    tau = np.asarray(plan.epochs)
    with np.errstate(divide="ignore"):
        lf = plan.n * np.log(-np.expm1(-np.outer(tau, quad.nodes)))
    return np.exp(logsumexp(lf + quad.log_weights[None, :], axis=1))


def expected_counts(plan: SamplingPlan, prior: PriorSpec, quad: RateQuadrature | None = None):
    """Expected failures, test duration and inspections, ``(E[D_t], E[tau], E[M])``.

    The test stops at the first inspection that finds every unit failed.
    """
    if plan.is_no_sampling:
        return 0.0, 0.0, 0.0
    quad = quad if quad is not None else RateQuadrature.for_prior(prior, plan.n)
    k = plan.k
    ed = plan.n * (1.0 - (prior.eta / (prior.eta + plan.tau_k)) ** prior.alpha)
    p = all_failed_probs(plan, quad)[: k - 1]
    em = k - math.fsum(p)
    et = plan.tau_k - math.fsum(np.diff(plan.epochs) * p)
    return ed, et, em


def no_sampling_report(prior: PriorSpec, costs: CostModel) -> RiskReport:
    eh = expected_acceptance_cost(prior, costs)
    accept = eh <= costs.c_reject
    pen = eh - costs.c_reject if accept else 0.0
    parts = [("rejection", costs.c_reject), ("sampling", 0.0), ("duration", 0.0),
             ("inspection", 0.0), ("salvage_loss", 0.0), ("penalty", pen)]
    total = eh if accept else costs.c_reject
    return RiskReport(total_risk=total, penalty_r1=pen, p_accept=1.0 if accept else 0.0,
                      e_failures=0.0, e_duration=0.0, e_inspections=0.0, decomposition=parts)


def equal_counts_batch(n: int, k: int, h_values, prior: PriorSpec, quad: RateQuadrature):
    """``(E[D_t], E[tau], E[M])`` arrays for equal spacings ``h_values``."""
    h_values = np.asarray(h_values, dtype=float)
    tau = np.outer(h_values, np.arange(1, k))
    if k > 1:
        with np.errstate(divide="ignore"):
            lf = n * np.log(-np.expm1(-tau[..., None] * quad.nodes))
        p = np.exp(lf + quad.log_weights).sum(axis=-1)
    else:
        p = np.zeros((len(h_values), 0))
    em = k - p.sum(axis=1)
    ed = n * (1.0 - (prior.eta / (prior.eta + k * h_values)) ** prior.alpha)
    return ed, h_values * em, em


@dataclass
class CellRisks:
    """Risks of equal-interval plans sharing ``(n, k)``, one entry per spacing."""

    h: np.ndarray
    base: np.ndarray
    bayes_penalty: np.ndarray
    bayes_accept: np.ndarray
    reliability_penalty: np.ndarray
    reliability_accept: np.ndarray
    r0_lo: np.ndarray
    r0_hi: np.ndarray

    @property
    def bayes_risk(self) -> np.ndarray:
        return self.base + self.bayes_penalty

    @property
    def reliability_risk(self) -> np.ndarray:
        return self.base + self.reliability_penalty

    def r0(self, i: int) -> float:
        return report_threshold(float(self.r0_lo[i]), float(self.r0_hi[i]))


class EqualCellEvaluator:
    """Vectorized evaluation of every spacing ``h`` for fixed ``(n, k)``.

    The outcome states and the ordering of their reliability estimates do not
    depend on ``h``, so both rules are evaluated for many spacings at once.
    """

    def __init__(self, n: int, k: int, prior: PriorSpec, costs: CostModel, quad: RateQuadrature | None = None,
                 max_block: int = 3_000_000):
        if n < 1 or k < 1:
            raise InputError("n and k must be positive")
        self.n, self.k, self.prior, self.costs = n, k, prior, costs
        self.quad = quad if quad is not None else RateQuadrature.for_prior(prior, n)
        self.max_block = max_block
        dt, w, logm = _equal_interval_multiplicities(n, k)
        self.dt, self.logm = dt.astype(float), logm
        self.expo = (w + k * (n - dt)).astype(float)
        denom = (w + dt + (n - dt) * k).astype(float)
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(dt > 0, dt / np.where(denom > 0, denom, 1.0), 0.0)
            # rate times spacing; the estimate is exp(-key * t0 / h)
            key = np.where(frac >= 1.0, np.inf, -np.log1p(-np.minimum(frac, 1.0)))
        self.key = np.where(dt == 0, 1.0 / (n * k), key)
        self.order = np.argsort(self.key, kind="stable")
        sk = self.key[self.order]
        self.ends = np.append(np.flatnonzero(np.diff(sk) > 0), len(sk) - 1)
        # Bayes rule: every (state, cause split) pair
        a = np.asarray(prior.dir_alphas)
        s_idx, cc0, clin, cqd, cdm = [], [], [], [], []
        for d in np.unique(dt):
            sel = np.flatnonzero(dt == d)
            comps, logdm = _cause_splits(int(d), prior.dir_alphas)
            c0, lin, qd = cost_polynomial(costs, a + comps)
            s_idx.append(np.repeat(sel, len(comps)))
            for arr, v in ((cc0, np.broadcast_to(c0, lin.shape)), (clin, lin), (cqd, qd), (cdm, logdm)):
                arr.append(np.tile(v, len(sel)))
        self.pair_state = np.concatenate(s_idx)
        self.pair_c0, self.pair_lin = np.concatenate(cc0), np.concatenate(clin)
        self.pair_qd, self.pair_logdm = np.concatenate(cqd), np.concatenate(cdm)
        self.prior_poly = cost_polynomial(costs, prior.dir_alphas)

    def _block(self, h: np.ndarray):
        nodes = self.quad.nodes
        a = np.log(-np.expm1(-np.outer(h, nodes)))                         # (H, G)
        b = -np.outer(h, nodes)
        lw = (self.quad.log_weights[None, None, :] + self.logm[None, :, None]
              + self.dt[None, :, None] * a[:, None, :] + self.expo[None, :, None] * b[:, None, :])
        lz = logsumexp(lw, axis=2)                                         # (H, S)
        p = np.exp(lw - lz[..., None])
        return lz, p @ nodes, p @ nodes ** 2

    def evaluate(self, h_values) -> CellRisks:
        h = np.atleast_1d(np.asarray(h_values, dtype=float))
        if np.any(h <= 0):
            raise InputError("spacings must be positive")
        S, G = len(self.dt), len(self.quad.nodes)
        per = max(1, self.max_block // (S * G))
        cr, t0 = self.costs.c_reject, self.costs.t0
        c0, lin, qd = self.prior_poly
        keys = self.key[self.order][self.ends]
        out = {name: np.empty(len(h)) for name in ("bp", "ba", "rp", "ra", "lo", "hi")}
        for start in range(0, len(h), per):
            sl = slice(start, start + per)
            hb = h[sl]
            lz, m1, m2 = self._block(hb)
            prob = np.exp(lz)
            delta = prob * (c0 + lin * m1 + qd * m2 - cr)
            ps = self.pair_state
            phi = self.pair_c0 + m1[:, ps] * self.pair_lin + m2[:, ps] * self.pair_qd
            wgt = np.exp(lz[:, ps] + self.pair_logdm)
            acc = phi <= cr
            out["bp"][sl] = np.where(acc, wgt * (phi - cr), 0.0).sum(axis=1)
            out["ba"][sl] = np.where(acc, wgt, 0.0).sum(axis=1)
            # threshold rule: the accepted states are those with the smallest keys
            zero = np.zeros((len(hb), 1))
            cum = np.concatenate([zero, np.cumsum(delta[:, self.order], axis=1)[:, self.ends]], axis=1)
            cump = np.concatenate([zero, np.cumsum(prob[:, self.order], axis=1)[:, self.ends]], axis=1)
            # groups with an infinite key have estimate 0 and are never accepted
            n_ok = 1 + int(np.sum(np.isfinite(keys)))
            best = np.argmin(cum[:, :n_ok], axis=1)
            rows = np.arange(len(hb))
            out["rp"][sl] = cum[rows, best]
            out["ra"][sl] = cump[rows, best]
            with np.errstate(over="ignore", invalid="ignore"):
                last_acc = keys[np.maximum(best - 1, 0)]
                first_rej = keys[np.minimum(best, len(keys) - 1)]
                out["hi"][sl] = np.where(best > 0, np.exp(-last_acc * t0 / hb), 1.0)
                out["lo"][sl] = np.where(best < len(keys), np.exp(-first_rej * t0 / hb), 0.0)
        ed, et, em = equal_counts_batch(self.n, self.k, h, self.prior, self.quad)
        c = self.costs
        base = (c.c_reject + self.n * (c.c_sample - c.salvage) + c.c_time * et + c.c_inspect * em
                + c.salvage * ed)
        return CellRisks(h, base, out["bp"], out["ba"], out["rp"], out["ra"], out["lo"], out["hi"])
