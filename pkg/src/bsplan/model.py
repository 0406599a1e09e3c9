"""Exponential competing-risks model observed under interval censoring.

Each unit fails from one of ``J`` independent exponential causes with rates
``nu_1..nu_J``; the observed lifetime is the minimum of the latent times, so
the unit lifetime is exponential with total rate ``nu = sum(nu_j)``.  Units are
inspected only at the epochs ``tau_1 < ... < tau_k``, and the data are the
counts ``d[m, j]`` of units found failed from cause ``j`` in
``(tau_{m-1}, tau_m]``.  Indices are zero-based throughout the Python API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import EnumerationCapExceeded, InputError

DEFAULT_ENUMERATION_CAP = 2_000_000


@dataclass(frozen=True)
class FailureRates:
    """Cause-specific failure rates of the exponential competing-risks model."""

    rates: tuple[float, ...]

    def __init__(self, rates):
        rates = tuple(float(r) for r in np.atleast_1d(rates))
        if len(rates) < 1:
            raise InputError("at least one cause is required")
        if not all(np.isfinite(r) and r > 0 for r in rates):
            raise InputError(f"failure rates must be finite and positive, got {rates}")
        object.__setattr__(self, "rates", rates)

    @property
    def total(self) -> float:
        return math.fsum(self.rates)

    @property
    def J(self) -> int:
        return len(self.rates)

    @property
    def fractions(self) -> np.ndarray:
        return np.asarray(self.rates) / self.total

    def as_array(self) -> np.ndarray:
        return np.asarray(self.rates, dtype=float)


@dataclass(frozen=True)
class SamplingPlan:
    """Sample size and inspection epochs of an interval-censored life test.

    The no-sampling plan is represented by ``n = 0`` with no epochs.
    """

    n: int
    epochs: tuple[float, ...]
    interval_length: float | None = field(default=None, compare=False)

    def __init__(self, n, epochs, interval_length=None):
        n = int(n)
        epochs = tuple(float(t) for t in epochs)
        if n == 0 and not epochs:
            pass
        elif n < 1:
            raise InputError(f"sample size must be >= 1, got {n}")
        elif not epochs:
            raise InputError("a plan with n >= 1 needs at least one inspection epoch")
        if epochs:
            e = np.asarray(epochs)
            if not np.all(np.isfinite(e)) or e[0] <= 0 or np.any(np.diff(e) <= 0):
                raise InputError(f"epochs must be positive and strictly increasing, got {epochs}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "epochs", epochs)
        object.__setattr__(self, "interval_length", None if interval_length is None else float(interval_length))

    @classmethod
    def equal(cls, n: int, h: float, k: int) -> "SamplingPlan":
        """Plan with ``k`` equally spaced inspections, ``tau_m = m * h``."""
        if int(k) < 1 or not h > 0:
            raise InputError(f"equal-interval plan needs h > 0 and k >= 1, got h={h}, k={k}")
        return cls(n, [m * float(h) for m in range(1, int(k) + 1)], interval_length=h)

    @classmethod
    def from_gaps(cls, n: int, gaps: Sequence[float]) -> "SamplingPlan":
        return cls(n, np.cumsum(np.asarray(gaps, dtype=float)))

    @classmethod
    def no_sampling(cls) -> "SamplingPlan":
        return cls(0, ())

    @property
    def k(self) -> int:
        return len(self.epochs)

    @property
    def is_no_sampling(self) -> bool:
        return self.n == 0

    @property
    def tau_k(self) -> float:
        return self.epochs[-1] if self.epochs else 0.0

    @property
    def boundaries(self) -> np.ndarray:
        """``[0, tau_1, ..., tau_k]``."""
        return np.concatenate([[0.0], self.epochs])

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.boundaries)

    @property
    def is_equal_interval(self) -> bool:
        if self.interval_length is not None:
            return True
        g = self.gaps
        return g.size > 0 and bool(np.allclose(g, g[0], rtol=1e-12, atol=0.0))

    @property
    def h(self) -> float:
        """Common interval length of an equal-interval plan."""
        if self.interval_length is not None:
            return self.interval_length
        if not self.is_equal_interval:
            raise InputError("plan does not have equal inspection intervals")
        return float(self.gaps[0])


@dataclass(frozen=True)
class IntervalData:
    """Failure counts per inspection interval (rows) and cause (columns).

    A test that stopped early because every unit had failed may carry fewer
    rows than the plan has inspections; missing rows are zero.
    """

    counts: np.ndarray
    n: int

    def __init__(self, counts, n):
        c = np.array(counts, dtype=np.int64, ndmin=2)
        if c.ndim != 2 or c.shape[1] < 1:
            raise InputError(f"counts must be a (intervals x causes) matrix, got shape {c.shape}")
        if np.any(c < 0):
            raise InputError("failure counts must be non-negative")
        n = int(n)
        if c.sum() > n:
            raise InputError(f"total failures {int(c.sum())} exceed sample size {n}")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "n", n)

    def __eq__(self, other):
        return (isinstance(other, IntervalData) and self.n == other.n
                and np.array_equal(self.counts, other.counts))

    def __hash__(self):
        return hash((self.n, self.counts.tobytes(), self.counts.shape))

    @property
    def J(self) -> int:
        return self.counts.shape[1]

    @property
    def per_interval(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def per_cause(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def padded(self, k: int) -> "IntervalData":
        """Counts with zero rows appended up to ``k`` intervals."""
        rows = self.counts.shape[0]
        if rows > k:
            if np.any(self.counts[k:]):
                raise InputError(f"data has failures in {rows} intervals but plan has {k}")
            return IntervalData(self.counts[:k], self.n)
        if rows == k:
            return self
        return IntervalData(np.vstack([self.counts, np.zeros((k - rows, self.J), dtype=np.int64)]), self.n)


def _total(rates) -> float:
    if isinstance(rates, FailureRates):
        return rates.total
    return float(np.sum(rates))


def reliability(rates, t):
    """Probability of surviving past ``t``, ``exp(-nu t)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InputError("time must be non-negative")
    out = np.exp(-_total(rates) * t)
    return float(out) if out.ndim == 0 else out


def sub_distribution(rates: FailureRates, cause: int, t):
    """Probability of failing by ``t`` from ``cause``."""
    if not 0 <= cause < rates.J:
        raise InputError(f"cause index {cause} out of range for J={rates.J}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InputError("time must be non-negative")
    nu = rates.total
    out = rates.rates[cause] / nu * -np.expm1(-nu * t)
    return float(out) if out.ndim == 0 else out


def interval_cell_prob(rates: FailureRates, plan: SamplingPlan, m: int, cause: int) -> float:
    """Probability that a unit fails from ``cause`` in inspection interval ``m``."""
    if not 0 <= m < plan.k:
        raise InputError(f"interval index {m} out of range for k={plan.k}")
    if not 0 <= cause < rates.J:
        raise InputError(f"cause index {cause} out of range for J={rates.J}")
    nu = rates.total
    lo, hi = plan.boundaries[m], plan.boundaries[m + 1]
    return rates.rates[cause] / nu * math.exp(-nu * lo) * -math.expm1(-nu * (hi - lo))


def log_interval_probs(nu, plan: SamplingPlan) -> np.ndarray:
    """Log probability of failing in each interval, for total rate(s) ``nu``.

    Returns an array of shape ``nu.shape + (k,)``.
    """
    nu = np.asarray(nu, dtype=float)[..., None]
    lo = plan.boundaries[:-1]
    return -nu * lo + np.log(-np.expm1(-nu * plan.gaps))


def multinomial_log_coef(n: int, counts) -> float:
    counts = np.asarray(counts)
    rest = n - counts.sum()
    return float(gammaln(n + 1) - gammaln(counts + 1).sum() - gammaln(rest + 1))


def outcome_log_pmf(rates: FailureRates, plan: SamplingPlan, data: IntervalData) -> float:
    """Log probability of observing ``data`` under ``plan`` at ``rates``."""
    if data.J != rates.J:
        raise InputError(f"data has {data.J} causes, rates have {rates.J}")
    if data.n != plan.n:
        raise InputError(f"data sample size {data.n} differs from plan n={plan.n}")
    d = data.padded(plan.k).counts
    nu = rates.total
    lp = log_interval_probs(nu, plan)
    out = multinomial_log_coef(plan.n, d)
    with np.errstate(divide="ignore"):
        logfrac = np.log(rates.fractions)
    cells = lp[:, None] + logfrac[None, :]
    out += float(np.sum(np.where(d > 0, d * cells, 0.0)))
    out += -(plan.n - data.total) * nu * plan.tau_k
    return out


def outcome_space_size(n: int, k: int, J: int) -> int:
    """Number of count matrices with ``k * J`` cells summing to at most ``n``."""
    return math.comb(n + k * J, k * J)


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All ordered ways to write ``total`` as ``parts`` non-negative integers."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_outcomes(plan: SamplingPlan, J: int, cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator[IntervalData]:
    """Every possible count matrix for ``plan`` with ``J`` causes, each once."""
    size = outcome_space_size(plan.n, plan.k, J)
    if size > cap:
        raise EnumerationCapExceeded(size, cap)
    cells = plan.k * J
    for dt in range(plan.n + 1):
        for comp in compositions(dt, cells):
            yield IntervalData(np.reshape(comp, (plan.k, J)), plan.n)


def interval_total_vectors(n: int, k: int) -> np.ndarray:
    """All vectors of ``k`` non-negative interval totals summing to at most ``n``."""
    rows = [c for dt in range(n + 1) for c in compositions(dt, k)]
    return np.array(rows, dtype=np.int64).reshape(len(rows), k)


def count_interval_vectors(n: int, k: int) -> int:
    return math.comb(n + k, k)
