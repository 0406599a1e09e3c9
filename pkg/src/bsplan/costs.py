"""Cost coefficients of the acceptance decision and the quadratic acceptance cost."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .model import FailureRates


@dataclass(frozen=True)
class CostModel:
    """Economic inputs of a sampling plan.

    Parameters
    ----------
    c0, c_lin, c_quad
        Coefficients of the acceptance cost
        ``h(nu) = c0 + sum_j c_lin[j] nu_j + sum_{i<=j} c_quad[i, j] nu_i nu_j``.
        ``c_quad`` is upper triangular.
    c_reject
        Cost of rejecting the lot.
    c_sample, salvage
        Cost of each tested unit and the value recovered from each survivor.
    c_time, c_inspect
        Cost per unit of test duration and per inspection.
    t0
        Mission time at which reliability is judged.
    """

    c0: float
    c_lin: tuple[float, ...]
    c_quad: np.ndarray
    c_reject: float
    c_sample: float
    salvage: float
    c_time: float
    c_inspect: float
    t0: float

    def __post_init__(self):
        lin = tuple(float(c) for c in self.c_lin)
        J = len(lin)
        quad = np.array(self.c_quad, dtype=float, ndmin=2)
        if quad.shape != (J, J):
            raise InputError(f"c_quad must be {J}x{J} to match c_lin, got shape {quad.shape}")
        if np.any(np.tril(quad, -1) != 0):
            raise InputError("c_quad must be upper triangular (entries below the diagonal must be 0)")
        quad.setflags(write=False)
        object.__setattr__(self, "c_lin", lin)
        object.__setattr__(self, "c_quad", quad)
        for name in ("c0", "c_reject", "c_sample", "salvage", "c_time", "c_inspect", "t0"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.c0 < 0 or any(c < 0 for c in lin) or np.any(quad < 0):
            raise InputError("acceptance-cost coefficients must be non-negative")
        if not self.c_reject > 0:
            raise InputError("c_reject must be positive")
        if not self.c_sample > 0:
            raise InputError("c_sample must be positive")
        if self.salvage < 0 or self.salvage >= self.c_sample:
            raise InputError("salvage must satisfy 0 <= salvage < c_sample")
        if self.c_time < 0 or self.c_inspect < 0:
            raise InputError("c_time and c_inspect must be non-negative")
        if not self.t0 > 0:
            raise InputError("mission time t0 must be positive")

    @property
    def J(self) -> int:
        return len(self.c_lin)

    def replace(self, **changes) -> "CostModel":
        fields = dict(c0=self.c0, c_lin=self.c_lin, c_quad=self.c_quad, c_reject=self.c_reject,
                      c_sample=self.c_sample, salvage=self.salvage, c_time=self.c_time,
                      c_inspect=self.c_inspect, t0=self.t0)
        fields.update(changes)
        return CostModel(**fields)

    def __eq__(self, other):
        if not isinstance(other, CostModel):
            return NotImplemented
        return (self.c0, self.c_lin, self.c_reject, self.c_sample, self.salvage, self.c_time,
                self.c_inspect, self.t0) == (other.c0, other.c_lin, other.c_reject, other.c_sample,
                                             other.salvage, other.c_time, other.c_inspect,
                                             other.t0) and np.array_equal(self.c_quad, other.c_quad)

    __hash__ = None


def acceptance_cost(costs: CostModel, rates):
    """Cost of accepting a lot whose cause rates are ``rates``.

    ``rates`` may be a :class:`FailureRates` or an array whose last axis holds
    the ``J`` cause rates.
    """
    nu = rates.as_array() if isinstance(rates, FailureRates) else np.asarray(rates, dtype=float)
    if nu.shape[-1] != costs.J:
        raise InputError(f"rates have {nu.shape[-1]} causes, costs have {costs.J}")
    out = costs.c0 + nu @ np.asarray(costs.c_lin) + np.einsum("...i,ij,...j->...", nu, costs.c_quad, nu)
    return float(out) if np.ndim(out) == 0 else out


def cost_polynomial(costs: CostModel, dir_alphas):
    """Acceptance cost averaged over Dirichlet cause fractions, as a polynomial in the total rate.

    With fractions ``p ~ Dirichlet(dir_alphas)`` and ``nu_j = nu p_j``,
    ``E[h(nu) | nu] = c0 + lin * nu + quad * nu**2``.  ``dir_alphas`` may be a
    2-D array with one parameter vector per row; ``lin`` and ``quad`` then
    have one entry per row.
    """
    a = np.asarray(dir_alphas, dtype=float)
    A = a.sum(axis=-1)
    lin = (a @ np.asarray(costs.c_lin)) / A
    # E[p_p p_q] = a_p (a_q + delta_pq) / (A (A + 1))
    cross = np.einsum("...p,pq,...q->...", a, costs.c_quad, a)
    diag = a @ np.diag(costs.c_quad)
    quad = (cross + diag) / (A * (A + 1.0))
    return costs.c0, lin, quad
