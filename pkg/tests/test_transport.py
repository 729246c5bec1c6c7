import numpy as np
import pytest
from scipy.optimize import linprog

from transineq._kernels import fallback
from transineq.errors import DimensionMismatch
from transineq.measures import prob_vector
from transineq.metric import CostProfile, build_cost, validate_space
from transineq.transport import (
    c_transform,
    check_solution,
    ot_solve,
    subdifferential_cost_bound,
    subdifferential_distances,
    transport_cost,
    truncate_cost,
)

try:
    from transineq._kernels import _simplex
except ImportError:
    _simplex = None


def lp_transport_cost(C, a, b):
    """Oracle: the transportation LP solved by scipy's HiGHS."""
    m, k = C.shape
    A_eq = np.zeros((m + k, m * k))
    for i in range(m):
        A_eq[i, i * k:(i + 1) * k] = 1.0
    for j in range(k):
        A_eq[m + j, j::k] = 1.0
    res = linprog(C.ravel(), A_eq=A_eq[:-1], b_eq=np.concatenate([a, b])[:-1],
                  bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def random_space(rng, n):
    pts = rng.standard_normal((n, 2))
    diff = pts[:, None, :] - pts[None, :, :]
    return validate_space(np.sqrt((diff * diff).sum(axis=2)))


def test_kernel_matches_lp_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(3, 10))
        sp = random_space(rng, n)
        C = sp.dist**2
        a = rng.gamma(1.0, 1.0, size=n) + 1e-3
        b = rng.gamma(1.0, 1.0, size=n) + 1e-3
        a, b = a / a.sum(), b / b.sum()
        plan, u, v, _ = fallback.solve_transport(C, a, b)
        val = float((plan * C).sum())
        oracle = lp_transport_cost(C, a, b)
        assert abs(val - oracle) < 1e-9 * (1 + abs(oracle))
        assert np.abs(plan.sum(axis=1) - a).max() < 1e-12
        assert np.abs(plan.sum(axis=0) - b).max() < 1e-12
        # tree duals are feasible up to roundoff and tight on the basis
        assert (u[:, None] + v[None, :] - C).max() < 1e-9


@pytest.mark.skipif(_simplex is None, reason="compiled kernel not built")
def test_backends_agree_pivot_for_pivot():
    rng = np.random.default_rng(1)
    for _ in range(10):
        n = int(rng.integers(3, 24))
        sp = random_space(rng, n)
        C = np.ascontiguousarray(sp.dist**2)
        a = rng.gamma(1.0, 1.0, size=n) + 1e-3
        b = rng.gamma(1.0, 1.0, size=n) + 1e-3
        a, b = a / a.sum(), b / b.sum()
        p1, u1, v1, k1 = fallback.solve_transport(C, a, b)
        p2, u2, v2, k2 = _simplex.solve_transport(C, a, b)
        assert k1 == k2
        assert np.allclose(p1, p2, atol=1e-14)
        assert np.allclose(u1, u2, atol=1e-10)
        assert np.allclose(v1, v2, atol=1e-10)


def test_ot_solve_invariants_and_oracle():
    rng = np.random.default_rng(2)
    for _ in range(10):
        n = int(rng.integers(3, 9))
        sp = random_space(rng, n)
        cost = build_cost(sp, CostProfile("square"))
        nu = prob_vector(rng.gamma(1.0, 1.0, size=n) + 1e-3)
        mu = prob_vector(rng.gamma(1.0, 1.0, size=n) + 1e-3)
        sol = ot_solve(nu, mu, cost)
        chk = check_solution(sol, nu, mu, cost)
        assert chk["ok"], chk
        oracle = lp_transport_cost(cost.cost, nu.w, mu.w)
        assert abs(sol.primal_cost - oracle) < 1e-9 * (1 + abs(oracle))
        # returned potentials are an exact c-conjugate pair
        assert np.allclose(
            sol.psi, c_transform(sol.phi, cost, "mu_to_nu"), atol=1e-12
        )


def test_ot_solve_1d_quantile_oracle():
    # 1D squared distance: the monotone (quantile) coupling is optimal, and
    # on a common grid its cost has a direct cumulative-mass formula
    rng = np.random.default_rng(3)
    n = 12
    x = np.sort(rng.uniform(0, 5, size=n))
    x += 1e-3 * np.arange(n)  # break near-ties
    sp = validate_space(np.abs(x[:, None] - x[None, :]), points=x)
    cost = build_cost(sp, CostProfile("square"))
    nu = prob_vector(rng.gamma(1.0, 1.0, size=n) + 1e-3)
    mu = prob_vector(rng.gamma(1.0, 1.0, size=n) + 1e-3)

    # oracle: split mass at every cdf breakpoint of either measure
    cuts = np.unique(np.concatenate([[0.0], np.cumsum(nu.w), np.cumsum(mu.w)]))
    cuts = np.clip(cuts, 0.0, 1.0)
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= 1e-15:
            continue
        mid = 0.5 * (lo + hi)
        i = int(np.searchsorted(np.cumsum(nu.w), mid))
        j = int(np.searchsorted(np.cumsum(mu.w), mid))
        total += (hi - lo) * (x[i] - x[j]) ** 2
    assert abs(transport_cost(nu, mu, cost) - total) < 1e-10


def test_ot_solve_on_restricted_support():
    sp = random_space(np.random.default_rng(4), 5)
    cost = build_cost(sp, CostProfile("square"))
    nu = prob_vector(np.array([0.5, 0.5, 0.0, 0.0, 0.0]))
    mu = prob_vector(np.array([0.0, 0.0, 0.2, 0.3, 0.5]))
    sol = ot_solve(nu, mu, cost)
    assert check_solution(sol, nu, mu, cost)["ok"]
    assert np.all(sol.plan[2:, :] == 0)
    assert np.all(sol.plan[:, :2] == 0)


def test_identical_measures_cost_zero():
    sp = random_space(np.random.default_rng(5), 6)
    cost = build_cost(sp, CostProfile("square"))
    mu = prob_vector(np.random.default_rng(6).gamma(1.0, 1.0, size=6) + 1e-3)
    sol = ot_solve(mu, mu, cost)
    assert sol.primal_cost == 0.0
    assert sol.duality_gap <= 1e-12


def test_c_transform_directions_and_errors():
    C = np.array([[0.0, 1.0], [4.0, 0.0]])
    g = np.array([0.5, -0.5])
    out = c_transform(g, C, "nu_to_mu")
    assert np.allclose(out, [(C[:, j] - g).min() for j in range(2)])
    out2 = c_transform(g, C, "mu_to_nu")
    assert np.allclose(out2, [(C[i, :] - g).min() for i in range(2)])
    with pytest.raises(ValueError):
        c_transform(g, C, "sideways")
    with pytest.raises(DimensionMismatch):
        c_transform(np.zeros(3), C, "nu_to_mu")
    with pytest.raises(ValueError):
        c_transform(np.array([np.inf, 0.0]), C, "nu_to_mu")


def test_double_conjugation_is_idempotent():
    rng = np.random.default_rng(7)
    C = rng.uniform(0, 3, size=(6, 6))
    C = C + C.T
    np.fill_diagonal(C, 0.0)
    g = rng.standard_normal(6)
    phi = c_transform(g, C, "nu_to_mu")
    psi = c_transform(phi, C, "mu_to_nu")
    phi2 = c_transform(psi, C, "nu_to_mu")
    assert np.allclose(phi, phi2, atol=1e-12)
    assert np.all(psi >= g - 1e-12)


def test_subdifferential_bound_never_exceeds_primal():
    rng = np.random.default_rng(8)
    for _ in range(10):
        n = int(rng.integers(3, 10))
        sp = random_space(rng, n)
        cost = build_cost(sp, CostProfile("square"))
        nu = prob_vector(rng.gamma(1.0, 1.0, size=n) + 1e-3)
        mu = prob_vector(rng.gamma(1.0, 1.0, size=n) + 1e-3)
        sol = ot_solve(nu, mu, cost)
        lhs, rhs = subdifferential_cost_bound(sol, cost)
        assert lhs <= rhs  # exact in floating point by termwise domination
        dtilde = cost.cost ** (1.0 / cost.exponent_po)
        s = subdifferential_distances(sol, dtilde)
        assert abs(float(np.dot(nu.w, s**2)) - lhs) < 1e-12 * (1 + lhs)


def test_truncate_cost_and_monotonicity():
    rng = np.random.default_rng(9)
    sp = random_space(rng, 7)
    cost = build_cost(sp, CostProfile("square"))
    nu = prob_vector(rng.gamma(1.0, 1.0, size=7) + 1e-3)
    mu = prob_vector(rng.gamma(1.0, 1.0, size=7) + 1e-3)
    full = transport_cost(nu, mu, cost)
    prev = -1.0
    for lv in np.linspace(0.1, 1.0, 8) * cost.max_cost:
        t = transport_cost(nu, mu, truncate_cost(cost, lv))
        assert t >= prev - 1e-12
        assert t <= full + 1e-12
        prev = t
    assert abs(prev - full) < 1e-12
    with pytest.raises(ValueError):
        truncate_cost(cost, 0.0)


def test_dimension_mismatch_raises():
    sp = random_space(np.random.default_rng(10), 4)
    cost = build_cost(sp, CostProfile("square"))
    nu = prob_vector(np.ones(3))
    mu = prob_vector(np.ones(4))
    with pytest.raises(DimensionMismatch):
        ot_solve(nu, mu, cost)
