"""Large-sample normal approximation for the reliability estimate.

The information matrix uses the conditional failure fractions of each
interval given survival to its start; the delta method then gives the
standard deviation of ``exp(-nu_hat t0)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import SingularInformationError
from .model import FailureRates, SamplingPlan

PIVOT_FLOOR = 1e-12


@dataclass(frozen=True)
class InfoMatrix:
    entries: np.ndarray
    n: int

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


def cell_fractions(rates: FailureRates, plan: SamplingPlan):
    """Conditional failure fractions per interval and cause, and per interval.

    Returns ``(q_mj, q_m)`` with shapes ``(k, J)`` and ``(k,)``.
    """
    nu = rates.total
    q_m = -np.expm1(-nu * plan.gaps)
    q_mj = q_m[:, None] * rates.fractions[None, :]
    return q_mj, q_m


def cell_fraction_gradients(rates: FailureRates, plan: SamplingPlan):
    """Gradients of the conditional fractions with respect to the cause rates.

    Returns ``(dq_mj, dq_m)`` with ``dq_mj[m, j, l] = d q_mj / d nu_l`` and
    ``dq_m[m, l] = d q_m / d nu_l``.
    """
    nu_j = rates.as_array()
    nu = rates.total
    J = rates.J
    gaps = plan.gaps
    _, q_m = cell_fractions(rates, plan)
    surv = gaps * (1.0 - q_m)
    dq_m = np.repeat(surv[:, None], J, axis=1)
    common = nu_j[None, :, None] * surv[:, None, None] / nu - q_m[:, None, None] * nu_j[None, :, None] / nu ** 2
    dq_mj = np.broadcast_to(common, (plan.k, J, J)).copy()
    idx = np.arange(J)
    dq_mj[:, idx, idx] += q_m[:, None] / nu
    return dq_mj, dq_m


def fisher_information(rates: FailureRates, plan: SamplingPlan) -> InfoMatrix:
    """Expected information matrix of the cause rates for ``plan``."""
    q_mj, q_m = cell_fractions(rates, plan)
    dq_mj, dq_m = cell_fraction_gradients(rates, plan)
    at_risk = plan.n * np.exp(-rates.total * plan.boundaries[:-1])
    info = np.einsum("m,mj,mja,mjb->ab", at_risk, 1.0 / q_mj, dq_mj, dq_mj)
    info += np.einsum("m,m,ma,mb->ab", at_risk, 1.0 / (1.0 - q_m), dq_m, dq_m)
    return InfoMatrix(info, plan.n)


def _solve_spd(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        chol = np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as exc:
        raise SingularInformationError("information matrix is not positive definite") from exc
    if np.min(np.diag(chol)) ** 2 < PIVOT_FLOOR * np.max(np.diag(matrix)):
        raise SingularInformationError("information matrix is numerically singular")
    y = np.linalg.solve(chol, rhs)
    return np.linalg.solve(chol.T, y)


def reliability_gradient(rates: FailureRates, t0: float) -> np.ndarray:
    return np.full(rates.J, -t0 * np.exp(-rates.total * t0))


def delta_sd(rates: FailureRates, plan: SamplingPlan, t0: float) -> float:
    """Delta-method standard deviation of the reliability estimate at ``t0``."""
    info = fisher_information(rates, plan).entries
    grad = reliability_gradient(rates, t0)
    return float(np.sqrt(max(grad @ _solve_spd(info, grad), 0.0)))


def approx_accept_prob(rates: FailureRates, plan: SamplingPlan, t0: float, r0: float) -> float:
    """Normal approximation of ``P(exp(-nu_hat t0) > r0)``."""
    c = float(np.exp(-rates.total * t0))
    s = delta_sd(rates, plan, t0)
    if s == 0:
        return float(c > r0)
    return float(norm.cdf((c - r0) / s))


def total_rate_information(nu, plan: SamplingPlan, n: int | None = None) -> np.ndarray:
    """Information about the total rate, vectorized over ``nu``.

    The reliability depends on the rates only through their sum, and the
    variance of the summed estimate equals the inverse of this quantity.
    """
    n = plan.n if n is None else n
    nu = np.asarray(nu, dtype=float)[..., None]
    gaps = plan.gaps
    q = -np.expm1(-nu * gaps)
    dq = gaps * np.exp(-nu * gaps)
    at_risk = n * np.exp(-nu * plan.boundaries[:-1])
    return np.sum(at_risk * dq ** 2 / (q * (1.0 - q)), axis=-1)


def total_rate_delta_sd(nu, plan: SamplingPlan, t0: float, n: int | None = None) -> np.ndarray:
    """Delta-method standard deviation as a function of the total rate only."""
    nu = np.asarray(nu, dtype=float)
    return t0 * np.exp(-nu * t0) / np.sqrt(total_rate_information(nu, plan, n))


def fisher_information_batch(rates: np.ndarray, plan: SamplingPlan) -> np.ndarray:
    """Information matrices for each row of an ``(N, J)`` array of cause rates."""
    rates = np.asarray(rates, dtype=float)
    nu = rates.sum(axis=1)
    frac = rates / nu[:, None]
    gaps = plan.gaps
    q = -np.expm1(-nu[:, None] * gaps)                    # (N, k)
    surv = gaps * (1.0 - q)
    at_risk = plan.n * np.exp(-nu[:, None] * plan.boundaries[:-1])
    J = rates.shape[1]
    common = (frac[:, None, :, None] * surv[:, :, None, None]
              - q[:, :, None, None] * frac[:, None, :, None] / nu[:, None, None, None])
    dq_mj = np.broadcast_to(common, (len(nu), plan.k, J, J)).copy()
    idx = np.arange(J)
    dq_mj[:, :, idx, idx] += (q / nu[:, None])[:, :, None]
    q_mj = q[:, :, None] * frac[:, None, :]
    info = np.einsum("nm,nmj,nmja,nmjb->nab", at_risk, 1.0 / q_mj, dq_mj, dq_mj)
    info += np.einsum("nm,nm,nm->n", at_risk, 1.0 / (1.0 - q), surv ** 2)[:, None, None]
    return info


def delta_sd_batch(rates: np.ndarray, plan: SamplingPlan, t0: float) -> np.ndarray:
    """Delta-method standard deviations for many rate vectors; NaN where singular."""
    rates = np.asarray(rates, dtype=float)
    info = fisher_information_batch(rates, plan)
    nu = rates.sum(axis=1)
    grad = np.repeat((-t0 * np.exp(-nu * t0))[:, None], rates.shape[1], axis=1)
    out = np.full(len(nu), np.nan)
    diag_max = np.max(np.diagonal(info, axis1=1, axis2=2), axis=1)
    eig_min = np.linalg.eigvalsh(info)[:, 0]
    ok = eig_min > PIVOT_FLOOR * diag_max
    if np.any(ok):
        x = np.linalg.solve(info[ok], grad[ok][:, :, None])[:, :, 0]
        out[ok] = np.sqrt(np.maximum(np.einsum("ni,ni->n", grad[ok], x), 0.0))
    return out
