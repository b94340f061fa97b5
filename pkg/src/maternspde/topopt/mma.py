"""Method of Moving Asymptotes for one inequality constraint.

Follows Svanberg (1987) with the usual conventions of his later MMA
implementations: asymptotes start at half the variable range from the
iterate, expand by 1.2 when a variable keeps moving in one direction and
contract by 0.7 when it oscillates. The single dual variable is found by
bisection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, SolverError

ASYINIT = 0.5
ASYINCR = 1.2
ASYDECR = 0.7
ALBEFA = 0.1
RAA0 = 1e-5
FEAS_TOL = 1e-9


@dataclass
class MMAState:
    """Iterate plus the history the asymptote update needs.

    ``weights`` are per-variable multiplicities in the constraint sum: a
    variable with weight 2 stands for two identical variables (used when a
    mirror-symmetric problem is solved on half the domain).
    """

    x: np.ndarray
    lower: np.ndarray | float = 0.0
    upper: np.ndarray | float = 1.0
    weights: np.ndarray | None = None
    xold1: np.ndarray | None = None
    xold2: np.ndarray | None = None
    low: np.ndarray | None = None
    upp: np.ndarray | None = None
    iteration: int = 0
    multiplier: float = 0.0
    history: list = field(default_factory=list)

    def __post_init__(self):
        self.x = np.array(self.x, dtype=float)
        n = self.x.size
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if np.any(self.lower >= self.upper):
            raise ConfigurationError("MMA bounds need lower < upper")
        if np.any(self.x < self.lower) or np.any(self.x > self.upper):
            raise ConfigurationError("MMA start point violates the bounds")
        self.weights = (np.ones(n) if self.weights is None
                        else np.asarray(self.weights, dtype=float).copy())


def _approx(g, x, low, upp, span):
    gp, gm = np.maximum(g, 0.0), np.maximum(-g, 0.0)
    reg = RAA0 / span
    p = (upp - x) ** 2 * (1.001 * gp + 0.001 * gm + reg)
    q = (x - low) ** 2 * (0.001 * gp + 1.001 * gm + reg)
    return p, q


def mma_update(state: MMAState, grad, constraint: float, constraint_grad,
               move_limit: float = 0.2) -> MMAState:
    """One MMA step for ``min f(x)`` subject to ``c(x) <= 0`` and the box.

    ``grad`` and ``constraint_grad`` are per-variable derivatives; the
    constraint value ``constraint`` is the full (weighted) one. The state is
    updated in place and returned.
    """
    x = state.x
    grad = np.asarray(grad, dtype=float)
    cgrad = np.asarray(constraint_grad, dtype=float)
    if grad.shape != x.shape or cgrad.shape != x.shape:
        raise ConfigurationError("gradient shapes must match the design vector")
    xmin, xmax, w = state.lower, state.upper, state.weights
    span = xmax - xmin

    if state.iteration < 2 or state.low is None:
        low = x - ASYINIT * span
        upp = x + ASYINIT * span
    else:
        trend = (x - state.xold1) * (state.xold1 - state.xold2)
        factor = np.where(trend > 0, ASYINCR, np.where(trend < 0, ASYDECR, 1.0))
        low = x - factor * (state.xold1 - state.low)
        upp = x + factor * (state.upp - state.xold1)
        low = np.clip(low, x - 10.0 * span, x - 0.01 * span)
        upp = np.clip(upp, x + 0.01 * span, x + 10.0 * span)

    alpha = np.maximum.reduce([xmin, low + ALBEFA * (x - low), x - move_limit * span])
    beta = np.minimum.reduce([xmax, upp - ALBEFA * (upp - x), x + move_limit * span])

    p0, q0 = _approx(grad, x, low, upp, span)
    p1, q1 = _approx(cgrad, x, low, upp, span)
    r1 = constraint - np.sum(w * (p1 / (upp - x) + q1 / (x - low)))

    def primal(lam):
        P = np.sqrt(p0 + lam * p1)
        Q = np.sqrt(q0 + lam * q1)
        xi = (P * low + Q * upp) / (P + Q)
        return np.clip(xi, alpha, beta)

    def dual_constraint(xi):
        return float(np.sum(w * (p1 / (upp - xi) + q1 / (xi - low))) + r1)

    lam_lo, lam_hi = 0.0, 1.0
    xnew = primal(0.0)
    if dual_constraint(xnew) > FEAS_TOL:
        while dual_constraint(primal(lam_hi)) > 0:
            lam_lo, lam_hi = lam_hi, 2.0 * lam_hi
            if lam_hi > 1e40:
                raise SolverError("MMA subproblem infeasible: the volume constraint cannot "
                                  "be met within the move limits")
        for _ in range(500):
            mid = 0.5 * (lam_lo + lam_hi)
            if mid <= lam_lo or mid >= lam_hi:
                break
            if dual_constraint(primal(mid)) > 0:
                lam_lo = mid
            else:
                lam_hi = mid
            if lam_hi - lam_lo <= 1e-15 * lam_hi:
                break
        xnew = primal(lam_hi)
        state.multiplier = lam_hi
    else:
        state.multiplier = 0.0

    state.xold2 = state.xold1
    state.xold1 = x.copy()
    state.low, state.upp = low, upp
    state.x = xnew
    state.iteration += 1
    return state
