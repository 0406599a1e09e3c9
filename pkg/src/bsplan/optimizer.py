"""Search for the sampling plan with the smallest Bayes risk.

Loops run over sample size ``n``, number of inspections ``k`` and the
inspection spacing.  A cheap lower bound prunes most of the space:

    risk >= n (C_s - r_s) + C_tau E[tau] + C_I E[M] + r_s E[D_t] + E[min(h(nu), C_r)]

because the penalty term can never beat accepting exactly when the lot is
good.  Every term of the bound grows with ``n`` and with ``k`` at a fixed
spacing, so both loops stop once no spacing survives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln, ndtr
from scipy.stats import norm

from .asymptotics import total_rate_delta_sd
from .costs import CostModel, acceptance_cost, cost_polynomial
from .decision import DecisionRule
from .errors import InputError
from .evaluator import (EqualCellEvaluator, PlanEvaluator, RiskReport, _cause_splits, all_failed_probs,
                        assemble_report, no_sampling_report)
from .model import SamplingPlan
from .prior import PriorSpec, RateQuadrature, expected_acceptance_cost, sample_prior
from .risk import approx_bayes_risk, complete_data_penalty

DEFAULT_K_CAP = 5
TIE_TOL = 1e-12
# With free test time, spacings beyond the point where a unit outlives the first
# inspection with prior probability below this carry no information.
SPACING_TAIL = 1e-4


@dataclass(frozen=True)
class SearchOptions:
    """Tuning of the plan search.

    ``k_cap`` only matters when the inspection cost is zero, which leaves the
    number of inspections otherwise unbounded.  With ``snap_to_grid`` the
    spacing is restricted to multiples of ``h_grid``; otherwise the best grid
    points are refined by bounded Brent search to ``refine_tol``.  The
    approximate objective first scans every ``coarse_factor``-th grid point
    and keeps the fine grid around the three best.
    """

    mode: str = "equal_intervals"
    h_grid: float = 0.01
    refine_tol: float = 1e-4
    n_cap: int | None = None
    k_cap: int | None = None
    mc_draws: int = 100_000
    seed: int = 0
    approx_method: str = "quad"
    threads: int = 1
    snap_to_grid: bool = True
    coarse_factor: int = 10

    def __post_init__(self):
        if self.mode not in ("equal_intervals", "free_intervals"):
            raise InputError(f"unknown search mode {self.mode!r}")
        if not self.h_grid > 0 or not self.refine_tol > 0:
            raise InputError("h_grid and refine_tol must be positive")
        for name in ("n_cap", "k_cap"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise InputError(f"{name} must be non-negative")
        if self.mc_draws < 1:
            raise InputError("mc_draws must be >= 1")
        if self.approx_method not in ("quad", "mc"):
            raise InputError(f"unknown approx_method {self.approx_method!r}")
        if self.threads < 1:
            raise InputError("threads must be >= 1")
        if self.coarse_factor < 1:
            raise InputError("coarse_factor must be >= 1")


@dataclass
class TraceEntry:
    """One plan examined by the search, with both rules' risks."""

    plan: SamplingPlan
    risk: float
    bayes_risk: float | None = None
    reliability_risk: float | None = None
    r0: float | None = None


@dataclass
class OptimalPlanResult:
    plan: SamplingPlan
    rule: DecisionRule
    report: RiskReport
    trace: list[TraceEntry] = field(default_factory=list, repr=False)
    threshold_interval: tuple[float, float] | None = None


@dataclass(frozen=True)
class SearchBounds:
    ceiling: float
    unit_cost: float
    c_inspect: float
    c_time: float

    @property
    def n0(self) -> int:
        return max(0, math.floor(self.ceiling / self.unit_cost + 1e-12))

    def k0(self, n: int) -> float:
        """Largest useful number of inspections; ``inf`` when inspections are free."""
        rest = self.ceiling - self.unit_cost * n
        if self.c_inspect == 0:
            return math.inf if rest >= 0 else 0
        return max(0, math.floor(rest / self.c_inspect + 1e-12))

    def tau_bound(self, n: int, k: int) -> float:
        rest = self.ceiling - self.unit_cost * n - self.c_inspect * k
        if self.c_time == 0:
            return math.inf if rest >= 0 else 0.0
        return max(0.0, rest / self.c_time)


def search_bounds(costs: CostModel, prior: PriorSpec) -> SearchBounds:
    """Bounds on ``n``, ``k`` and the last inspection time of an optimal plan.

    Any plan costing more than testing nothing, ``min(E[h], C_r)``, is useless.
    """
    if not costs.c_sample > costs.salvage:
        raise InputError("c_sample must exceed salvage")
    ceiling = min(expected_acceptance_cost(prior, costs), costs.c_reject)
    return SearchBounds(ceiling, costs.c_sample - costs.salvage, costs.c_inspect, costs.c_time)


def acceptance_floor(prior: PriorSpec, costs: CostModel, quad: RateQuadrature | None = None,
                     n_fraction_draws: int = 4000, seed: int = 12345) -> float:
    """Lower estimate of ``E[min(h(nu), C_r)]``, the risk of a perfect test with no test costs.

    The total rate is integrated by quadrature and the cause fractions by a
    fixed set of Dirichlet draws, less three standard errors.
    """
    quad = quad if quad is not None else RateQuadrature.for_prior(prior, 0)
    nu = quad.nodes
    if prior.J == 1:
        h = costs.c0 + costs.c_lin[0] * nu + costs.c_quad[0, 0] * nu ** 2
        return quad.expect(np.minimum(h, costs.c_reject))
    frac = np.random.default_rng(seed).dirichlet(prior.dir_alphas, n_fraction_draws)
    lin = frac @ np.asarray(costs.c_lin)
    qf = np.einsum("fi,ij,fj->f", frac, costs.c_quad, frac)
    h = costs.c0 + np.outer(nu, lin) + np.outer(nu ** 2, qf)             # (G, F)
    vals = np.minimum(h, costs.c_reject)
    w = quad.weights
    per_draw = w @ vals
    se = per_draw.std(ddof=1) / math.sqrt(n_fraction_draws)
    return float(per_draw.mean() - 3.0 * se)


def _test_cost_bound(n, k, h_values, prior, costs, quad):
    """``n (C_s - r_s) + C_tau E[tau] + C_I E[M] + r_s E[D_t]`` for equal spacings ``h_values``."""
    h_values = np.asarray(h_values, dtype=float)
    tau = np.outer(h_values, np.arange(1, k))                            # (H, k-1)
    with np.errstate(divide="ignore"):
        lf = n * np.log(-np.expm1(-tau[..., None] * quad.nodes))
    p = np.exp(lf + quad.log_weights).sum(axis=-1) if k > 1 else np.zeros((len(h_values), 0))
    em = k - p.sum(axis=1)
    et = h_values * em
    ed = n * (1.0 - (prior.eta / (prior.eta + k * h_values)) ** prior.alpha)
    return (n * (costs.c_sample - costs.salvage) + costs.c_time * et + costs.c_inspect * em
            + costs.salvage * ed)


def unending_inspection_penalty(n: int, h: float, prior: PriorSpec, costs: CostModel,
                                quad: RateQuadrature, tail: float = 1e-6, max_block: int = 2_000_000) -> float:
    """Bayes-rule penalty when units are inspected every ``h`` until all have failed.

    Every equal-interval plan with ``n`` units and spacing ``h`` observes a
    function of this experiment's outcome, so the value bounds their penalty
    from below whatever ``k`` and the decision rule.  Given the total rate the
    summed interval indices follow a negative binomial law; outcomes past the
    horizon where a unit survives with prior probability ``tail`` are bounded
    by the worst per-outcome gain ``c0 - C_r``.
    """
    T = prior.eta * ((n / tail) ** (1.0 / prior.alpha) - 1.0)
    wmax = int(math.ceil(T / h))
    nu = quad.nodes
    lx = -nu * h
    l1x = np.log(-np.expm1(lx))
    comps, logdm = _cause_splits(int(n), prior.dir_alphas)
    c0, lin, qd = cost_polynomial(costs, np.asarray(prior.dir_alphas) + comps)
    split = np.exp(logdm)
    total, mass = 0.0, 0.0
    rows = max(1, max_block // nu.size)
    for start in range(0, wmax + 1, rows):
        w = np.arange(start, min(wmax + 1, start + rows), dtype=float)
        logc = gammaln(w + n) - gammaln(w + 1) - gammaln(n)
        L = np.exp(logc[:, None] + n * l1x[None, :] + w[:, None] * lx[None, :] + quad.log_weights[None, :])
        p = L.sum(axis=1)
        ok = p > 0
        if not ok.any():
            continue
        m1 = (L[ok] @ nu) / p[ok]
        m2 = (L[ok] @ nu ** 2) / p[ok]
        g = p[ok, None] * split[None, :] * (c0 + lin[None, :] * m1[:, None] + qd[None, :] * m2[:, None]
                                            - costs.c_reject)
        total += float(np.minimum(g, 0.0).sum())
        mass += float(p.sum())
    return total + min(0.0, costs.c0 - costs.c_reject) * max(0.0, 1.0 - mass)


def equal_spacing_information(nu, n: int, k: int, h_values) -> np.ndarray:
    """Information about the total rate for equal spacings, shape ``(len(h_values), len(nu))``.

    ``n h**2 x (1 - x**k) / (1 - x)**2`` with ``x = exp(-nu h)``.
    """
    z = np.outer(np.asarray(h_values, dtype=float), np.asarray(nu, dtype=float))
    x = np.exp(-z)
    h2 = np.asarray(h_values, dtype=float)[:, None] ** 2
    return n * h2 * x * (-np.expm1(-k * z)) / np.expm1(-z) ** 2


def approx_penalty_equal(nu, g, n: int, k: int, h_values, t0: float, grid_size: int = 41,
                         iterations: int = 28, block: int = 4_000_000):
    """Penalty of the normal approximation minimized over the threshold, per spacing.

    ``g`` holds the weighted integrand ``w (h_bar(nu) - C_r)``.  A threshold
    grid locates the minimum, and a golden-section search refines it within
    the neighbouring grid cells, all spacings at once.
    """
    h_values = np.atleast_1d(np.asarray(h_values, dtype=float))
    nu = np.asarray(nu, dtype=float)
    g = np.asarray(g, dtype=float)
    rel = np.exp(-nu * t0)
    grid = np.linspace(0.0, 1.0, grid_size)
    pen = np.empty(len(h_values))
    best_r0 = np.empty(len(h_values))
    rows = max(1, block // (len(nu) * grid_size))
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    for start in range(0, len(h_values), rows):
        hb = h_values[start:start + rows]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            s = t0 * rel / np.sqrt(equal_spacing_information(nu, n, k, hb))     # (H, G)
        ok = np.isfinite(s) & (s > 0)
        s = np.where(ok, s, 1.0)
        gg = np.where(ok, g, 0.0)

        def f(r0):                       # r0 shape (H, R)
            z = (rel[None, None, :] - r0[:, :, None]) / s[:, None, :]
            return np.einsum("hrg,hg->hr", ndtr(z), gg)

        vals = f(np.broadcast_to(grid, (len(hb), grid_size)))
        i = np.argmin(vals, axis=1)
        lo = grid[np.maximum(i - 1, 0)]
        hi = grid[np.minimum(i + 1, grid_size - 1)]
        a = hi - invphi * (hi - lo)
        b = lo + invphi * (hi - lo)
        fa, fb = f(a[:, None])[:, 0], f(b[:, None])[:, 0]
        for _ in range(iterations):
            left = fa < fb
            hi = np.where(left, b, hi)
            lo = np.where(left, lo, a)
            na = hi - invphi * (hi - lo)
            nb = lo + invphi * (hi - lo)
            a, b = np.where(left, na, b), np.where(left, a, nb)
            fa, fb = np.where(left, f(na[:, None])[:, 0], fb), np.where(left, fa, f(nb[:, None])[:, 0])
        mid = 0.5 * (lo + hi)
        fm = f(mid[:, None])[:, 0]
        gmin = vals[np.arange(len(hb)), i]
        use = fm < gmin
        pen[start:start + rows] = np.where(use, fm, gmin)
        best_r0[start:start + rows] = np.where(use, mid, grid[i])
    return pen, best_r0


def approx_penalty_floor(n: int, prior: PriorSpec, costs: CostModel, cells: int = 500,
                         quad: RateQuadrature | None = None) -> float:
    """Lower bound on the approximate penalty of any plan with ``n`` units.

    No inspection scheme beats observing every failure time, so the standard
    deviation of the estimate is at least ``t0 exp(-nu t0) nu / sqrt(n)``.
    Where the threshold puts ``nu`` on the correct side, a larger deviation
    only raises the chance of a wrong decision; elsewhere that chance is at
    least one half.  Minimizing over cells of thresholds keeps it a bound.
    """
    quad = quad if quad is not None else RateQuadrature.for_prior(prior, 0, step=0.01)
    nu = quad.nodes
    c0, lin, qd = cost_polynomial(costs, prior.dir_alphas)
    g = quad.weights * (c0 + lin * nu + qd * nu ** 2 - costs.c_reject)
    rel = np.exp(-nu * costs.t0)
    sd = costs.t0 * rel * nu / math.sqrt(n)
    edges = np.linspace(0.0, 1.0, cells + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    far = np.maximum(np.abs(rel - lo), np.abs(rel - hi))
    inside = (rel >= lo) & (rel <= hi)
    good = g < 0
    agree = (good & (rel > hi)) | (~good & (rel < lo))
    err = np.where(inside | agree, norm.cdf(-far / sd), 0.5)
    return float(np.minimum(g, 0.0).sum() + (np.abs(g) * err).sum(axis=1).min())


def _better(a, b) -> bool:
    """Tie-break: lower risk, then smaller n, k and last inspection time."""
    if b is None:
        return True
    if a[0] < b[0] - TIE_TOL:
        return True
    if a[0] > b[0] + TIE_TOL:
        return False
    return (a[1].n, a[1].k, a[1].tau_k) < (b[1].n, b[1].k, b[1].tau_k)


def optimize_threshold(plan: SamplingPlan, prior: PriorSpec, costs: CostModel):
    """Best reliability threshold for ``plan`` over the finite set of estimate values.

    Returns a dict with ``r0_star``, ``risk`` and the optimal interval ``(lo, hi)``.
    """
    ev = PlanEvaluator(plan, prior, costs)
    t = ev.optimal_threshold()
    return {"r0_star": t.r0, "risk": t.risk, "interval": (t.lo, t.hi), "p_accept": t.p_accept}


class _Search:
    """Shared state of one optimization run."""

    def __init__(self, objective_kind, prior, costs, opts):
        self.kind = objective_kind
        self.prior, self.costs, self.opts = prior, costs, opts
        self.bounds = search_bounds(costs, prior)
        self.trace: list[TraceEntry] = []
        self.best = None            # (risk, plan, extra)
        self._quads: dict[int, RateQuadrature] = {}
        self._cell, self._cell_key = None, None
        self._floors: dict[int, float] = {}
        self._unending: dict[tuple, float] = {}
        self.no_sampling_risk = no_sampling_report(prior, costs).total_risk
        self.h_cap = prior.eta * (SPACING_TAIL ** (-1.0 / prior.alpha) - 1.0)
        if objective_kind == "approx":
            self._fine = RateQuadrature.for_prior(prior, 0, step=0.01)
            c0, lin, qd = cost_polynomial(costs, prior.dir_alphas)
            q = self._fine
            self.floor = costs.c_reject + float(
                np.sum(np.minimum(q.weights * (c0 + lin * q.nodes + qd * q.nodes ** 2 - costs.c_reject), 0.0)))
            self._draws = None
            if opts.approx_method == "mc":
                draws = sample_prior(prior, np.random.default_rng(opts.seed), opts.mc_draws)
                self._draws = (draws.sum(axis=1), acceptance_cost(costs, draws) - costs.c_reject)
                self.floor = costs.c_reject + float(np.mean(np.minimum(self._draws[1], 0.0)))
        else:
            self.floor = acceptance_floor(prior, costs)

    def quad(self, n):
        if n not in self._quads:
            self._quads[n] = RateQuadrature.for_prior(self.prior, n)
        return self._quads[n]

    # ------------------------------------------------------------- objective
    def cell(self, n: int, k: int) -> EqualCellEvaluator:
        key = (n, k)
        if self._cell_key != key:
            self._cell = EqualCellEvaluator(n, k, self.prior, self.costs, quad=self.quad(n))
            self._cell_key = key
        return self._cell

    def evaluate_equal(self, n: int, k: int, h_values) -> list[TraceEntry]:
        """Risks of equal-interval plans sharing ``(n, k)``; records trace entries."""
        h_values = np.atleast_1d(np.asarray(h_values, dtype=float))
        if self.kind == "approx":
            risks, r0s = self._approx_batch(n, k, h_values)
            entries = [TraceEntry(SamplingPlan.equal(n, float(h), k), float(r), r0=float(r0))
                       for h, r, r0 in zip(h_values, risks, r0s)]
            self.trace.extend(entries)
            return entries
        res = self.cell(n, k).evaluate(h_values)
        entries = []
        for i, h in enumerate(h_values):
            bayes, rel = float(res.bayes_risk[i]), float(res.reliability_risk[i])
            entries.append(TraceEntry(SamplingPlan.equal(n, float(h), k), bayes if self.kind == "bayes" else rel,
                                      bayes_risk=bayes, reliability_risk=rel, r0=res.r0(i)))
        self.trace.extend(entries)
        return entries

    def evaluate(self, plan: SamplingPlan):
        """Risk of ``plan`` under the run's objective; records a trace entry."""
        if self.kind == "approx":
            risk, r0 = self._approx(plan)
            entry = TraceEntry(plan, risk, r0=r0)
        elif plan.is_equal_interval:
            return self.evaluate_equal(plan.n, plan.k, [plan.h])[0]
        else:
            ev = PlanEvaluator(plan, self.prior, self.costs, quad=self.quad(plan.n))
            base = ev.base_cost()
            t = ev.optimal_threshold()
            bayes = base + ev.bayes_penalty()[0]
            risk = bayes if self.kind == "bayes" else t.risk
            entry = TraceEntry(plan, risk, bayes_risk=bayes, reliability_risk=t.risk, r0=t.r0)
        self.trace.append(entry)
        return entry

    def _approx_terms(self, n):
        """Rates and weighted penalty integrand for the approximate objective."""
        if self._draws is None:
            q = self.quad(n)
            c0, lin, qd = cost_polynomial(self.costs, self.prior.dir_alphas)
            nu = q.nodes
            return nu, q.weights * (c0 + lin * nu + qd * nu ** 2 - self.costs.c_reject)
        nu, g = self._draws
        return nu, g / len(g)

    def _approx_batch(self, n, k, h_values):
        """Approximate risk and best threshold for equal spacings ``h_values``."""
        nu, g = self._approx_terms(n)
        pen, r0 = approx_penalty_equal(nu, g, n, k, h_values, self.costs.t0)
        base = _test_cost_bound(n, k, h_values, self.prior, self.costs, self.quad(n)) + self.costs.c_reject
        return base + pen, r0

    def _approx(self, plan):
        if not plan.is_equal_interval:
            raise InputError("the approximate objective supports equal intervals only")
        risk, r0 = self._approx_batch(plan.n, plan.k, [plan.h])
        return float(risk[0]), float(r0[0])

    def base_cost(self, plan):
        return float(_test_cost_bound(plan.n, plan.k, [plan.h], self.prior, self.costs,
                                      self.quad(plan.n))[0]) + self.costs.c_reject

    def offer(self, entry: TraceEntry):
        cand = (entry.risk, entry.plan, entry)
        if _better(cand, self.best):
            self.best = cand

    @property
    def incumbent(self) -> float:
        return self.best[0] if self.best is not None else self.no_sampling_risk

    # ------------------------------------------------------------ equal mode
    def scan_cell(self, n: int, k: int):
        """Grid scan plus refinement over the spacing for one ``(n, k)`` cell.

        Returns False when the lower bound rules out every spacing.
        """
        opts = self.opts
        hmax = min(self.bounds.tau_bound(n, k) / k, self.h_cap)
        count = int(math.floor(hmax / opts.h_grid + 1e-9))
        if count < 1:
            return False
        grid = opts.h_grid * np.arange(1, count + 1)
        cost = _test_cost_bound(n, k, grid, self.prior, self.costs, self.quad(n))
        alive = np.flatnonzero(cost + self.sample_floor(n) < self.incumbent)
        if alive.size and self.kind != "approx":
            unending = np.array([self.unending_penalty(n, h) for h in grid[alive]])
            alive = alive[cost[alive] + self.costs.c_reject + unending < self.incumbent]
        if alive.size == 0:
            return False
        if self.kind == "approx" and opts.coarse_factor > 1 and alive.size > 3 * opts.coarse_factor:
            alive = self._coarse_to_fine(n, k, grid, alive)
        entries = self.evaluate_equal(n, k, grid[alive])
        for e in entries:
            self.offer(e)
        if opts.snap_to_grid:
            return True
        risks = np.array([e.risk for e in entries])
        for j in np.argsort(risks, kind="stable")[:3]:
            h0 = grid[alive[j]]
            lo, hi = max(h0 - opts.h_grid, 1e-9), min(h0 + opts.h_grid, hmax)
            if hi <= lo:
                continue
            res = minimize_scalar(lambda h: self.evaluate(SamplingPlan.equal(n, float(h), k)).risk,
                                  bounds=(lo, hi), method="bounded", options={"xatol": opts.refine_tol})
            self.offer(self.evaluate(SamplingPlan.equal(n, float(res.x), k)))
        return True

    def _coarse_to_fine(self, n, k, grid, alive):
        """Grid indices near the three best points of a coarser scan."""
        f = self.opts.coarse_factor
        coarse = alive[::f]
        risks, _ = self._approx_batch(n, k, grid[coarse])
        keep = set()
        for j in np.argsort(risks, kind="stable")[:3]:
            c = coarse[j]
            keep.update(range(c - f, c + f + 1))
        return np.array(sorted(i for i in keep if i in set(alive.tolist())), dtype=int)

    def unending_penalty(self, n: int, h: float) -> float:
        key = (n, round(h / self.opts.h_grid, 6))
        if key not in self._unending:
            self._unending[key] = unending_inspection_penalty(n, h, self.prior, self.costs, self.quad(n))
        return self._unending[key]

    def k_limit(self, n):
        k0 = self.bounds.k0(n)
        cap = self.opts.k_cap
        if cap is None and math.isinf(k0):
            cap = DEFAULT_K_CAP
        return int(k0 if cap is None else min(k0, cap))

    def sample_floor(self, n: int) -> float:
        """Lower bound on the rejection cost plus penalty for any plan with ``n`` units."""
        if n not in self._floors:
            f = self.floor
            if self.kind == "approx":
                if self._draws is None:
                    f = max(f, self.costs.c_reject + approx_penalty_floor(n, self.prior, self.costs,
                                                                          quad=self._fine))
            else:
                f = max(f, self.costs.c_reject + complete_data_penalty(n, self.prior, self.costs))
            self._floors[n] = f
        return self._floors[n]

    def run_equal(self):
        n0 = self.bounds.n0 if self.opts.n_cap is None else min(self.bounds.n0, self.opts.n_cap)
        unit = self.costs.c_sample - self.costs.salvage
        start = self.costs.c_inspect
        for n in range(1, n0 + 1):
            if n * unit + start + self.floor >= self.incumbent:
                break
            if n * unit + start + self.sample_floor(n) >= self.incumbent:
                continue
            for k in range(1, self.k_limit(n) + 1):
                if not self.scan_cell(n, k):
                    break

    # ------------------------------------------------------------- free mode
    def refine_free(self, start: SamplingPlan, max_sweeps: int = 20):
        """Cyclic coordinate descent over the gaps, starting from ``start``."""
        gaps = list(start.gaps)
        cur = self.evaluate(start).risk
        tau_max = min(self.bounds.tau_bound(start.n, start.k), start.k * self.h_cap)
        for _ in range(max_sweeps):
            before = cur
            for i in range(len(gaps)):
                rest = sum(gaps) - gaps[i]
                hi = min(tau_max - rest, 4 * gaps[i] + self.opts.h_grid)
                if hi <= 1e-6:
                    continue

                def f(x, i=i):
                    g = list(gaps)
                    g[i] = float(x)
                    return self.evaluate(SamplingPlan.from_gaps(start.n, g)).risk

                res = minimize_scalar(f, bounds=(1e-6, hi), method="bounded",
                                      options={"xatol": self.opts.refine_tol})
                if res.fun < cur:
                    gaps[i], cur = float(res.x), float(res.fun)
            if before - cur < 1e-6:
                break
        plan = SamplingPlan.from_gaps(start.n, gaps)
        self.offer(self.evaluate(plan))


def _finish(search: _Search, rule_kind: str) -> OptimalPlanResult:
    prior, costs = search.prior, search.costs
    nos = no_sampling_report(prior, costs)
    if search.best is None or search.best[0] >= nos.total_risk - TIE_TOL:
        rule = DecisionRule.bayes() if rule_kind != "reliability" else DecisionRule.reliability(
            0.0 if nos.p_accept == 1.0 else 1.0)
        return OptimalPlanResult(SamplingPlan.no_sampling(), rule, nos, search.trace)
    plan = search.best[1]
    entry = search.best[2]
    if rule_kind == "approx":
        ev = PlanEvaluator(plan, prior, costs)
        ed, et, em = ev.expected_counts()
        rel = ev.reliability_penalty(entry.r0)
        report = assemble_report(plan, costs, (ed, et, em), entry.risk - search.base_cost(plan), rel[1])
        return OptimalPlanResult(plan, DecisionRule.reliability(entry.r0), report, search.trace)
    ev = PlanEvaluator(plan, prior, costs)
    if rule_kind == "bayes":
        report = ev.report(*ev.bayes_penalty())
        return OptimalPlanResult(plan, DecisionRule.bayes(), report, search.trace)
    t = ev.optimal_threshold()
    report = ev.report(t.penalty, t.p_accept)
    return OptimalPlanResult(plan, DecisionRule.reliability(t.r0), report, search.trace, (t.lo, t.hi))


def optimize_plan(rule_kind: str, prior: PriorSpec, costs: CostModel,
                  opts: SearchOptions | None = None) -> OptimalPlanResult:
    """Plan and rule with the smallest exact Bayes risk.

    ``rule_kind`` is ``"bayes"`` or ``"reliability"``; the latter also picks
    the best threshold for each plan.  Falls back to the no-sampling plan when
    no test beats deciding on the prior alone.
    """
    if rule_kind not in ("bayes", "reliability"):
        raise InputError(f"unknown rule kind {rule_kind!r}")
    if costs.J != prior.J:
        raise InputError(f"costs have {costs.J} causes, prior has {prior.J}")
    opts = opts or SearchOptions()
    search = _Search(rule_kind, prior, costs, opts)
    search.run_equal()
    if opts.mode == "free_intervals" and search.best is not None:
        _free_pass(search)
    return _finish(search, rule_kind)


def _free_pass(search: _Search, top: int = 3):
    """Coordinate descent from the best equal-interval plans of distinct ``(n, k)`` cells."""
    cells = {}
    for e in search.trace:
        key = (e.plan.n, e.plan.k)
        if key not in cells or e.risk < cells[key].risk:
            cells[key] = e
    starts = sorted(cells.values(), key=lambda e: e.risk)[:top]
    for e in starts:
        search.refine_free(e.plan)


def optimize_plan_approx(prior: PriorSpec, costs: CostModel,
                         opts: SearchOptions | None = None) -> OptimalPlanResult:
    """Plan and threshold minimizing the normal-approximation risk.

    The objective is deterministic: quadrature over the total rate by
    default, or a fixed set of prior draws shared by all candidates when
    ``opts.approx_method == "mc"``.  The returned report's risk is the
    approximate risk; acceptance probability and expected counts are exact.
    """
    if costs.J != prior.J:
        raise InputError(f"costs have {costs.J} causes, prior has {prior.J}")
    opts = opts or SearchOptions()
    if opts.mode == "free_intervals":
        raise InputError("the approximate objective supports equal intervals only")
    search = _Search("approx", prior, costs, opts)
    search.run_equal()
    return _finish(search, "approx")


def approx_risk_mc_check(result: OptimalPlanResult, prior: PriorSpec, costs: CostModel,
                         n_draws: int = 100_000, seed: int = 0):
    """Monte Carlo re-estimate of the approximate risk at a returned plan."""
    return approx_bayes_risk(result.plan, result.rule.r0, prior, costs, n_draws,
                             np.random.default_rng(seed), return_se=True)
