"""Exact discrete optimal transport with c-conjugate dual potentials."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from ._kernels import IMPL, solve_transport
from .errors import DimensionMismatch
from .measures import ProbVector
from .metric import PowerTypeCost

MARGINAL_TOL = 1e-10
GAP_TOL = 1e-8


def _cost_matrix(cost: Union[PowerTypeCost, np.ndarray]) -> np.ndarray:
    if isinstance(cost, PowerTypeCost):
        return cost.cost
    return np.asarray(cost, dtype=float)


@dataclass(frozen=True)
class TransportSolution:
    """Optimal coupling of (nu, mu) with a c-conjugate potential pair.

    psi lives on the nu side, phi on the mu side, psi = phi^c exactly after
    the final conjugation pass; duality_gap = primal - (sum psi nu + sum phi mu).
    """

    plan: np.ndarray
    primal_cost: float
    psi: np.ndarray
    phi: np.ndarray
    duality_gap: float
    n_pivots: int
    backend: str = IMPL

    @property
    def support_pairs(self) -> np.ndarray:
        return np.argwhere(self.plan > 0)

    @property
    def dual_cost(self) -> float:
        return self.primal_cost - self.duality_gap


def c_transform(g, cost: Union[PowerTypeCost, np.ndarray], direction: str) -> np.ndarray:
    """Conjugate g^c(y) = min_x { c(x,y) - g(x) }.

    direction 'nu_to_mu': g indexed by rows (nu side), result on columns.
    direction 'mu_to_nu': g indexed by columns, result on rows.
    """
    C = _cost_matrix(cost)
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("potential must be finite")
    if direction == "nu_to_mu":
        if g.shape != (C.shape[0],):
            raise DimensionMismatch(f"expected length {C.shape[0]}, got {g.shape}")
        return (C - g[:, None]).min(axis=0)
    if direction == "mu_to_nu":
        if g.shape != (C.shape[1],):
            raise DimensionMismatch(f"expected length {C.shape[1]}, got {g.shape}")
        return (C - g[None, :]).min(axis=1)
    raise ValueError(f"unknown direction {direction!r}")


def ot_solve(
    nu: ProbVector, mu: ProbVector, cost: Union[PowerTypeCost, np.ndarray]
) -> TransportSolution:
    """Exact optimal transport cost T_c(nu, mu) with conjugate duals.

    The simplex kernel runs on the supp(nu) x supp(mu) submatrix; the basis
    duals are then extended to the whole space by two conjugation passes,
    phi = (u)^c over supp(nu) and psi = phi^c, which keeps the dual value and
    makes (psi, phi) a c-conjugate pair on all points.
    """
    C = _cost_matrix(cost)
    n = C.shape[0]
    if C.shape != (n, n) and C.shape != (nu.n, mu.n):
        raise DimensionMismatch(f"cost shape {C.shape} incompatible")
    if nu.n != C.shape[0] or mu.n != C.shape[1]:
        raise DimensionMismatch(
            f"cost {C.shape} vs measures ({nu.n}, {mu.n})"
        )
    ri = nu.support
    cj = mu.support
    sub = np.ascontiguousarray(C[np.ix_(ri, cj)])
    plan_s, u, v, n_pivots = solve_transport(sub, nu.w[ri], mu.w[cj])

    plan = np.zeros_like(C)
    plan[np.ix_(ri, cj)] = plan_s
    primal = float((plan_s * sub).sum())

    # extend the basis duals: phi(y) = min over supp(nu) of c(x,y) - u(x),
    # which reproduces v on supp(mu); then psi = phi^c reproduces u on supp(nu)
    phi = (C[ri, :] - u[:, None]).min(axis=0)
    psi = c_transform(phi, C, direction="mu_to_nu")

    dual = float(np.dot(psi, nu.w) + np.dot(phi, mu.w))
    gap = primal - dual
    if -1e-12 < gap < 0.0:
        gap = 0.0  # roundoff of two equal optimal values
    return TransportSolution(
        plan=plan,
        primal_cost=primal,
        psi=psi,
        phi=phi,
        duality_gap=gap,
        n_pivots=int(n_pivots),
    )


def transport_cost(
    nu: ProbVector, mu: ProbVector, cost: Union[PowerTypeCost, np.ndarray]
) -> float:
    return ot_solve(nu, mu, cost).primal_cost


def subdifferential_distances(
    solution: TransportSolution, dtilde: np.ndarray
) -> np.ndarray:
    """Per source atom, distance (under dtilde) to its nearest plan target.

    s[i] = min { dtilde[i][j] : plan[i][j] > 0 } on rows with mass, 0 elsewhere.
    Since each row's plan mass averages cost over its targets, sum nu_i s_i^p_o
    never exceeds the primal cost.
    """
    plan = solution.plan
    s = np.zeros(plan.shape[0])
    for i in range(plan.shape[0]):
        js = np.flatnonzero(plan[i] > 0)
        if len(js):
            s[i] = dtilde[i, js].min()
    return s


def subdifferential_cost_bound(
    solution: TransportSolution, cost: Union[PowerTypeCost, np.ndarray]
) -> Tuple[float, float]:
    """(sum nu_i s_i^p_o, primal cost) evaluated with identical summation trees.

    s_i^p_o equals the cost at the nearest plan target, read off the cost
    matrix directly so the comparison is exact in floating point: termwise
    plan_ij * cmin_i <= plan_ij * c_ij, summed by the same reduction.
    """
    C = _cost_matrix(cost)
    plan = solution.plan
    cmin = np.zeros(plan.shape[0])
    for i in range(plan.shape[0]):
        js = np.flatnonzero(plan[i] > 0)
        if len(js):
            cmin[i] = C[i, js].min()
    lhs_terms = plan * cmin[:, None]
    rhs_terms = plan * C
    return float(lhs_terms.sum()), float(rhs_terms.sum())


def truncate_cost(cost: PowerTypeCost, level: float) -> PowerTypeCost:
    """Entrywise c ∧ level, recorded in truncation_level."""
    if level <= 0:
        raise ValueError("truncation level must be positive")
    c = np.minimum(cost.cost, level)
    c.setflags(write=False)
    return PowerTypeCost(
        phi=cost.phi,
        exponent_po=cost.exponent_po,
        doubling_ratio_K=cost.doubling_ratio_K,
        cost=c,
        truncation_level=level,
    )


def check_solution(
    solution: TransportSolution,
    nu: ProbVector,
    mu: ProbVector,
    cost: Union[PowerTypeCost, np.ndarray],
) -> dict:
    """Recompute the invariants: marginals, dual feasibility, slackness, gap."""
    C = _cost_matrix(cost)
    plan = solution.plan
    marg_row = float(np.abs(plan.sum(axis=1) - nu.w).max())
    marg_col = float(np.abs(plan.sum(axis=0) - mu.w).max())
    feas = float((solution.psi[:, None] + solution.phi[None, :] - C).max())
    sp = plan > 0
    if sp.any():
        slack = float(
            np.abs((C - solution.psi[:, None] - solution.phi[None, :])[sp]).max()
        )
    else:
        slack = 0.0
    return {
        "marginal_error": max(marg_row, marg_col),
        "dual_feasibility": feas,
        "complementary_slackness": slack,
        "duality_gap": solution.duality_gap,
        "ok": (
            max(marg_row, marg_col) <= MARGINAL_TOL
            and feas <= MARGINAL_TOL
            and slack <= GAP_TOL
            and 0.0 <= solution.duality_gap <= GAP_TOL
        ),
    }
