import math

import numpy as np
import pytest
from scipy.special import rel_entr

from transineq.errors import (
    BoundVacuous,
    EntropyInfinite,
    ScheduleNotIncreasing,
)
from transineq.measures import ProbVector, prob_vector, total_variation
from transineq.metric import CostProfile, build_cost, validate_space
from transineq.transport import transport_cost
from transineq.variational import (
    FunctionalSpec,
    MinimizeConfig,
    Profile,
    evaluate,
    first_variation,
    lower_bound_certificate,
    minimize_fixed_point,
    minimize_mirror,
    minimize_truncation,
    spec_from_names,
)


def random_instance(rng, n):
    pts = rng.standard_normal((n, 2))
    diff = pts[:, None, :] - pts[None, :, :]
    sp = validate_space(np.sqrt((diff * diff).sum(axis=2)))
    cost = build_cost(sp, CostProfile("square"))
    mu = prob_vector(rng.gamma(1.0, 1.0, size=n) + 1e-3)
    return sp, mu, cost


def two_point_instance(d=2.0, m=0.3):
    x = np.array([0.0, d])
    sp = validate_space(np.abs(x[:, None] - x[None, :]), points=x)
    cost = build_cost(sp, CostProfile("square"))
    mu = prob_vector([m, 1.0 - m])
    return sp, mu, cost


def test_profile_library_and_validation():
    assert Profile("sqrt")(4.0) == 2.0
    assert Profile("identity")(3.5) == 3.5
    assert Profile("power", q=2.0)(3.0) == 9.0
    assert Profile("sqrt")(-1.0) == 0.0  # clamped at zero
    with pytest.raises(ValueError):
        Profile("log")
    with pytest.raises(ValueError):
        Profile("power", q=0.0)


def test_spec_admissibility():
    spec_from_names("identity", "identity", 1.0)
    spec_from_names("sqrt", "sqrt", 1.0)
    spec_from_names("identity", "sqrt", 1.0)
    with pytest.raises(ValueError):
        spec_from_names("sqrt", "identity", 1.0)  # entropy term too weak
    with pytest.raises(ValueError):
        FunctionalSpec(Profile("power", q=2.0), Profile("power", q=2.0), 1.0)
    with pytest.raises(ValueError):
        spec_from_names("identity", "identity", -1.0)


def test_evaluate_matches_direct_formula():
    rng = np.random.default_rng(0)
    _, mu, cost = random_instance(rng, 6)
    nu = prob_vector(rng.gamma(1.0, 1.0, size=6) + 1e-3)
    h = float(rel_entr(nu.w, mu.w).sum())
    t = transport_cost(nu, mu, cost)
    for spec in (spec_from_names("identity", "identity", 1.7),
                 spec_from_names("sqrt", "sqrt", 1.7),
                 spec_from_names("identity", "sqrt", 0.4)):
        direct = spec.alpha(spec.a * h) - spec.beta(t)
        assert abs(evaluate(spec, nu, mu, cost) - direct) < 1e-12


def test_evaluate_rejects_escaping_support():
    _, mu0, cost = two_point_instance()
    mu = ProbVector(np.array([1.0, 0.0]))
    nu = prob_vector([0.5, 0.5])
    spec = spec_from_names("identity", "identity", 1.0)
    with pytest.raises(EntropyInfinite):
        evaluate(spec, nu, mu, cost)


def test_first_variation_matches_finite_differences():
    rng = np.random.default_rng(1)
    _, mu, cost = random_instance(rng, 5)
    nu = prob_vector(rng.gamma(2.0, 1.0, size=5) + 0.1)
    spec = spec_from_names("identity", "identity", 2.0)
    k = first_variation(spec, nu, mu, cost)
    assert abs(float(np.dot(k, nu.w))) < 1e-10  # centered
    eps = 1e-6
    for i in range(5):
        direction = -nu.w.copy()
        direction[i] += 1.0  # delta_i - nu
        up = ProbVector(nu.w + eps * direction)
        dn = ProbVector(nu.w - eps * direction)
        fd = (evaluate(spec, up, mu, cost) - evaluate(spec, dn, mu, cost)) / (2 * eps)
        assert abs(fd - k[i]) < 5e-5 * (1 + abs(k[i]))


def test_first_variation_zero_at_mu():
    rng = np.random.default_rng(2)
    _, mu, cost = random_instance(rng, 5)
    spec = spec_from_names("sqrt", "sqrt", 1.0)
    k = first_variation(spec, mu, mu, cost)
    assert np.allclose(k, 0.0)


def test_two_point_minimum_matches_dense_scan():
    _, mu, cost = two_point_instance(d=2.0, m=0.3)
    c12 = cost.cost[0, 1]

    def f(p, a):
        nu = np.array([p, 1.0 - p])
        h = float(rel_entr(nu, mu.w).sum())
        return a * h - abs(p - mu.w[0]) * c12

    for a in (0.5, 1.0, 3.0):
        spec = spec_from_names("identity", "identity", a)
        ps = np.linspace(1e-6, 1 - 1e-6, 20001)
        oracle = min(f(p, a) for p in ps)
        config = MinimizeConfig(multistarts=8, max_iter=2000)
        res_m = minimize_mirror(spec, mu, cost, config)
        res_f = minimize_fixed_point(spec, mu, cost, config)
        assert res_m.value <= oracle + 1e-6
        assert res_f.value <= oracle + 1e-6
        assert res_m.value >= oracle - 1e-4  # scan resolution
        assert total_variation(res_m.minimizer, res_f.minimizer) < 1e-4


def test_fixed_point_residual_small_at_nontrivial_minimum():
    _, mu, cost = two_point_instance(d=3.0, m=0.4)
    spec = spec_from_names("identity", "identity", 1.0)
    res = minimize_fixed_point(spec, mu, cost, MinimizeConfig(multistarts=8))
    assert res.value < -1e-3
    assert res.residual <= 1e-8
    # the reported stationarity data reproduce the critical-point equation
    lb = res.lambda_bar
    assert lb > 0


def test_lower_bound_certificate_valid():
    rng = np.random.default_rng(3)
    _, mu, cost = random_instance(rng, 5)
    delta = 0.5
    spec = spec_from_names("identity", "identity", 2.5)
    b = lower_bound_certificate(mu, cost, delta, spec)
    assert b >= 0
    for _ in range(200):
        nu = prob_vector(rng.gamma(1.0, 1.0, size=5) + 1e-6)
        assert evaluate(spec, nu, mu, cost) >= -b - 1e-10


def test_lower_bound_certificate_needs_a_geq_inverse_delta():
    rng = np.random.default_rng(4)
    _, mu, cost = random_instance(rng, 4)
    spec = spec_from_names("identity", "identity", 0.5)
    with pytest.raises(BoundVacuous):
        lower_bound_certificate(mu, cost, 1.0, spec)


def test_minimize_truncation_schedule_validation():
    rng = np.random.default_rng(5)
    _, mu, cost = random_instance(rng, 4)
    spec = spec_from_names("identity", "identity", 1.0)
    with pytest.raises(ScheduleNotIncreasing):
        minimize_truncation(spec, mu, cost, [1.0, 1.0, 2.0])
    with pytest.raises(ScheduleNotIncreasing):
        minimize_truncation(spec, mu, cost, [0.1 * cost.max_cost])


def test_minimize_truncation_agrees_with_direct():
    rng = np.random.default_rng(6)
    _, mu, cost = random_instance(rng, 5)
    spec = spec_from_names("identity", "identity", 0.7)
    config = MinimizeConfig(multistarts=8)
    top = cost.max_cost
    res_t = minimize_truncation(spec, mu, cost, [0.25 * top, 0.5 * top, top], config)
    res_d = minimize_fixed_point(spec, mu, cost, config)
    assert abs(res_t.value - res_d.value) < 1e-6
    # trace is the per-level minimum and ends at the untruncated value
    assert len(res_t.trace) == 3
    assert abs(res_t.trace[-1] - res_t.value) < 1e-15


def test_sqrt_spec_near_mu_dip_matches_analytic_value():
    # on a finite space the sqrt functional always dips below zero near mu:
    # with H ~ 2t^2 and T ~ t on the symmetric 2-point space, the minimum of
    # sqrt(2a) t - sqrt(t) is -1/(4 sqrt(2a)), attained at t = 1/(8a)
    _, mu, cost = two_point_instance(d=1.0, m=0.5)
    a = 50.0
    spec = spec_from_names("sqrt", "sqrt", a)
    res = minimize_fixed_point(spec, mu, cost, MinimizeConfig(multistarts=6))
    analytic = -1.0 / (4.0 * math.sqrt(2.0 * a))
    assert abs(res.value - analytic) < 1e-4 * abs(analytic)
    assert total_variation(res.minimizer, mu) < 2.0 / (8.0 * a)


def test_minimize_is_deterministic_given_seed():
    rng = np.random.default_rng(7)
    _, mu, cost = random_instance(rng, 5)
    spec = spec_from_names("identity", "identity", 0.8)
    config = MinimizeConfig(multistarts=6, seed=123)
    r1 = minimize_fixed_point(spec, mu, cost, config)
    r2 = minimize_fixed_point(spec, mu, cost, config)
    assert r1.value == r2.value
    assert np.array_equal(r1.minimizer.w, r2.minimizer.w)
