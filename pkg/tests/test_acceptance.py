"""Acceptance gate: one test per criterion, one pass/fail line each."""

import json
import math
import os

import numpy as np
import pytest
from scipy.special import rel_entr

from transineq.cli import main as cli_main
from transineq.inequalities import (
    SuiteConfig,
    _global_min,
    constants_report,
    ma_residual_1d,
)
from transineq.instances import double_well_grid, gaussian_grid
from transineq.measures import (
    ProbVector,
    check_concentration_bound,
    exp_integral,
    prob_vector,
    relative_entropy,
    total_variation,
)
from transineq.metric import (
    CostProfile,
    SlopeOperator,
    build_cost,
    induced_distance,
    validate_space,
)
from transineq.transport import (
    check_solution,
    ot_solve,
    subdifferential_cost_bound,
    transport_cost,
    truncate_cost,
)
from transineq.variational import (
    MinimizeConfig,
    _fixed_point_single,
    _mirror_single,
    _residual_and_c,
    evaluate,
    lower_bound_certificate,
    minimize_fixed_point,
    minimize_mirror,
    minimize_truncation,
    spec_from_names,
)


def report(num, name, ok):
    print(f"[criterion {num:2d}] {name}: {'PASS' if ok else 'FAIL'}")
    assert ok, f"criterion {num} ({name}) failed"


def random_cloud(rng, n, min_dist=None):
    while True:
        pts = rng.standard_normal((n, 2))
        diff = pts[:, None, :] - pts[None, :, :]
        d = np.sqrt((diff * diff).sum(axis=2))
        off = d[~np.eye(n, dtype=bool)]
        if off.min() < 1e-3:
            continue
        if min_dist is not None:
            d = d * (min_dist / off.min())
        return validate_space(d)


def random_mu(rng, n):
    return prob_vector(rng.gamma(1.0, 1.0, size=n) + 1e-3)


def test_criterion_01_gaussian_talagrand_bracket(tmp_path):
    inst = tmp_path / "gauss201.json"
    inst.write_text(json.dumps({
        "space": {"grid": {"a": -6.0, "b": 6.0, "n": 201}},
        "mu": {"density": "gaussian", "sigma": 1.0},
        "cost": {"phi": "square"},
    }))
    out = str(tmp_path / "out")
    code = cli_main(["constants", "--instance", str(inst), "--out", out])
    with open(os.path.join(out, "constants.json")) as fh:
        rep = json.load(fh)
    lo = rep["result"]["c_t2"]["lo"]
    hi = rep["result"]["c_t2"]["hi"]
    ok = code == 0 and 1.7 <= lo <= hi <= 2.05
    print(f"    c_t2 bracket [{lo:.4f}, {hi:.4f}], continuum reference 2")
    report(1, "gaussian talagrand bracket in [1.7, 2.05]", ok)


def test_criterion_02_strong_duality_random_instances():
    rng = np.random.default_rng(42)
    worst_gap, worst_slack = 0.0, 0.0
    for trial in range(200):
        n = int(rng.integers(2, 65))
        sp = random_cloud(rng, n)
        prof = (CostProfile("square") if trial % 2 == 0
                else CostProfile("linear_plus_square"))
        cost = build_cost(sp, prof)
        nu, mu = random_mu(rng, n), random_mu(rng, n)
        sol = ot_solve(nu, mu, cost)
        chk = check_solution(sol, nu, mu, cost)
        worst_gap = max(worst_gap, abs(sol.duality_gap))
        worst_slack = max(worst_slack, chk["complementary_slackness"])
    ok = worst_gap <= 1e-8 and worst_slack <= 1e-8
    print(f"    200 instances, worst gap {worst_gap:.2e}, "
          f"worst slackness {worst_slack:.2e}")
    report(2, "strong duality and slackness <= 1e-8", ok)


def test_criterion_03_minimizer_characterization():
    rng = np.random.default_rng(7)
    config = MinimizeConfig(multistarts=8)
    # mirror descent is first order, so it needs a tight stopping rule to
    # localize the minimizer (not just the minimum value) to TV 1e-4
    mconfig = MinimizeConfig(multistarts=8, tol=1e-15, max_iter=6000)
    done = 0
    worst_res, worst_tv = 0.0, 0.0
    while done < 50:
        n = int(rng.integers(3, 8))
        sp = random_cloud(rng, n)
        cost = build_cost(sp, CostProfile("square"))
        mu = random_mu(rng, n)
        a = 1.0
        res = None
        for _ in range(8):
            spec = spec_from_names("identity", "identity", a)
            res = minimize_fixed_point(spec, mu, cost, config)
            if res.value < -1e-6:
                break
            a *= 0.5
        if res is None or res.value >= -1e-6:
            continue
        res_m = minimize_mirror(spec, mu, cost, mconfig)
        # each method restarts once from the other's winner so that both
        # multistart searches settle in the same (global) basin
        fp_min, resid = res.minimizer, res.residual
        st_f, _ = _fixed_point_single(spec, mu, cost,
                                      res_m.minimizer.w.copy(), config)
        if st_f.value < res.value:
            _, resid, _ = _residual_and_c(spec, st_f, mu)
            fp_min = st_f.nu
        st_m, _ = _mirror_single(spec, mu, cost, fp_min.w.copy(), mconfig)
        rm_min = st_m.nu if st_m.value < res_m.value else res_m.minimizer
        worst_res = max(worst_res, resid)
        worst_tv = max(worst_tv, total_variation(fp_min, rm_min))
        done += 1
    ok = worst_res <= 1e-6 and worst_tv <= 1e-4
    print(f"    50 instances, worst stationarity spread {worst_res:.2e}, "
          f"worst mirror/fixed-point TV {worst_tv:.2e}")
    report(3, "critical-point equation and method agreement", ok)


def _scan_t2_threshold(mu, cost, tol, rng):
    """Independent threshold scan: per-pair log-spaced dips plus random probes."""
    best = 0.0
    n = mu.n
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            cap = min(mu.w[j], 1 - mu.w[i]) - 1e-12
            if cap <= 0:
                continue
            for t in np.logspace(-9, math.log10(cap), 80):
                w = mu.w.copy()
                w[i] += t
                w[j] -= t
                nu = ProbVector(w / w.sum())
                h = relative_entropy(nu, mu)
                if h <= 0:
                    continue
                r = math.sqrt(transport_cost(nu, mu, cost)) - tol
                if r > 0:
                    best = max(best, r * r / h)
    for _ in range(200):
        nu = prob_vector(rng.gamma(0.5, 1.0, size=n) + 1e-9)
        h = relative_entropy(nu, mu)
        if h <= 0:
            continue
        r = math.sqrt(transport_cost(nu, mu, cost)) - tol
        if r > 0:
            best = max(best, r * r / h)
    return best


def test_criterion_04_argmin_t2_equivalence():
    rng = np.random.default_rng(11)
    tol = 1e-3
    config = MinimizeConfig(multistarts=8, max_iter=500)
    worst_tv, best_neg = 0.0, -math.inf
    for trial in range(20):
        n = 2 if trial < 10 else int(rng.integers(3, 7))
        sp = random_cloud(rng, n, min_dist=3.0 + rng.uniform(0, 2))
        cost = build_cost(sp, CostProfile("square"))
        mu = random_mu(rng, n)
        c_t2 = _scan_t2_threshold(mu, cost, tol, rng)
        spec_hi = spec_from_names("sqrt", "sqrt", 1.1 * c_t2)
        r1 = minimize_fixed_point(spec_hi, mu, cost, config)
        r2 = minimize_mirror(spec_hi, mu, cost, config)
        winner = r1.minimizer if r1.value <= r2.value else r2.minimizer
        worst_tv = max(worst_tv, total_variation(winner, mu))
        spec_lo = spec_from_names("sqrt", "sqrt", 0.9 * c_t2)
        val, _ = _global_min(spec_lo, mu, cost, config, [])
        best_neg = max(best_neg, val)
    ok = worst_tv <= 1e-6 and best_neg < -1e-8
    print(f"    20 instances, worst minimizer TV above threshold {worst_tv:.2e}, "
          f"largest minimum below threshold {best_neg:.2e}")
    report(4, "argmin collapses above scanned threshold, dips below", ok)


def test_criterion_05_lower_bound_certificate():
    rng = np.random.default_rng(5)
    worst_slack = math.inf
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        sp = random_cloud(rng, n)
        cost = build_cost(sp, CostProfile("square"))
        nu, mu = random_mu(rng, n), random_mu(rng, n)
        delta = rng.uniform(0.05, 2.0) / cost.max_cost
        lhs = float(nu.w @ cost.cost @ mu.w)
        h = relative_entropy(nu, mu)
        idelta = exp_integral(mu, cost, delta)
        rhs = h / delta + idelta.value / (math.e * delta)
        worst_slack = min(worst_slack, rhs - lhs)
    cert_ok = True
    for _ in range(20):
        n = int(rng.integers(3, 7))
        sp = random_cloud(rng, n)
        cost = build_cost(sp, CostProfile("square"))
        mu = random_mu(rng, n)
        delta = rng.uniform(0.5, 2.0) / cost.max_cost
        a = rng.uniform(1.0, 3.0) / delta
        spec = spec_from_names("identity", "identity", a)
        b = lower_bound_certificate(mu, cost, delta, spec)
        res = minimize_fixed_point(spec, mu, cost, MinimizeConfig(multistarts=8))
        if res.value < -b - 1e-10:
            cert_ok = False
    ok = worst_slack >= -1e-10 and cert_ok
    print(f"    1000 triples, worst slack {worst_slack:.3e}; "
          f"20 certified minima respected: {cert_ok}")
    report(5, "entropy-information certificate bounds the functional", ok)


def test_criterion_06_marton_concentration_transfer():
    rng = np.random.default_rng(6)
    config = MinimizeConfig(multistarts=8, max_iter=500)
    all_ok = True
    for trial in range(10):
        n = int(rng.integers(8, 15))
        sp = random_cloud(rng, n)
        prof = (CostProfile("square") if trial % 2 == 0
                else CostProfile("linear_plus_square"))
        cost = build_cost(sp, prof)
        mu = random_mu(rng, n)
        dtilde = induced_distance(sp, cost)
        a = 0.5 * cost.max_cost
        spec = spec_from_names("sqrt", "sqrt", a)
        minval, _ = _global_min(spec, mu, cost, config, [])
        b = (max(0.0, -minval) + 1e-3) ** 2
        po = cost.exponent_po
        r_o = (a * math.log(2.0)) ** (1.0 / po) + 2.0 * b ** (1.0 / po)
        if not check_concentration_bound(mu, dtilde, po, a, r_o):
            all_ok = False
    print(f"    10 instances, full 2^n subset enumeration held: {all_ok}")
    report(6, "verified transport pair transfers to concentration", ok=all_ok)


def test_criterion_07_truncation_convergence():
    rng = np.random.default_rng(17)
    config = MinimizeConfig(multistarts=8)
    mono_ok, exact_ok, conv_ok = True, True, True
    for _ in range(20):
        n = int(rng.integers(3, 8))
        sp = random_cloud(rng, n)
        cost = build_cost(sp, CostProfile("square"))
        nu, mu = random_mu(rng, n), random_mu(rng, n)
        full = transport_cost(nu, mu, cost)
        prev = -math.inf
        for lv in np.linspace(0.2, 1.0, 5) * cost.max_cost:
            t = transport_cost(nu, mu, truncate_cost(cost, lv))
            if t < prev - 1e-12:
                mono_ok = False
            prev = t
        if transport_cost(nu, mu, truncate_cost(cost, cost.max_cost)) != full:
            exact_ok = False
        a = 0.5
        spec = spec_from_names("identity", "identity", a)
        top = cost.max_cost
        rt = minimize_truncation(spec, mu, cost, [0.3 * top, 0.6 * top, top],
                                 config)
        rd = minimize_fixed_point(spec, mu, cost, config)
        if abs(rt.trace[-1] - rd.value) > 1e-6:
            conv_ok = False
    ok = mono_ok and exact_ok and conv_ok
    print(f"    truncated costs nondecreasing: {mono_ok}, exact at max c: "
          f"{exact_ok}, continuation matches direct: {conv_ok}")
    report(7, "truncation monotone and continuation converges", ok)


def test_criterion_08_dual_formulation_gap():
    from transineq.inequalities import dual_value

    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(3, 17))
        sp = random_cloud(rng, n)
        cost = build_cost(sp, CostProfile("square"))
        mu = random_mu(rng, n)
        a = rng.uniform(0.3, 2.0)
        spec = spec_from_names("identity", "identity", a)
        dual, primal = dual_value(spec, mu, cost,
                                  config=MinimizeConfig(multistarts=6),
                                  strict=False)
        worst = max(worst, abs(dual - primal))
    ok = worst <= 1e-4
    print(f"    20 instances, worst dual/primal gap {worst:.3e}")
    report(8, "conjugate dual matches primal infimum within 1e-4", ok)


def test_criterion_09_otto_villani_and_w2i_chains():
    instances = [gaussian_grid(n=201, lo=-6, hi=6)]
    from transineq.instances import mixture_grid

    mixes = [([-1.5, 1.5], [1.0, 1.0], [0.5, 0.5]),
             ([-2.0, 2.0], [0.7, 0.7], [0.6, 0.4]),
             ([0.0, 3.0], [1.0, 0.5], [0.7, 0.3]),
             ([-2.5, 0.0, 2.5], [0.8, 1.0, 0.8], [0.3, 0.4, 0.3]),
             ([-1.0, 1.0], [1.2, 0.6], [0.5, 0.5])]
    for c, s, w in mixes:
        instances.append(mixture_grid(121, -6, 6, c, s, w))
    margin_ok, lemma_ok = True, True
    for space, mu in instances:
        h = float(space.points[1] - space.points[0])
        tol = max(1e-3, 0.4 * h)
        cost = build_cost(space, CostProfile("square"))
        op = SlopeOperator("graph", radius=1.5 * h)
        rep = constants_report(space, mu, cost, op, tol=tol)
        lsi_bound = 4.0 * rep.c_lsi.value * 1.1 + 1e-6
        w2i_bound = 2.0 * math.sqrt(rep.c_w2i.value) * 1.1 + 1e-6
        if rep.c_t2.hi > lsi_bound or rep.c_t2.hi > w2i_bound:
            margin_ok = False
        nu = rep.c_t2.witness if rep.c_t2.witness is not None else mu
        sol = ot_solve(nu, mu, cost)
        lhs, rhs = subdifferential_cost_bound(sol, cost)
        if lhs > rhs:  # exact comparison, zero tolerance
            lemma_ok = False
    ok = margin_ok and lemma_ok
    print(f"    6 instances: t2 below inflated LSI and W2I bounds: {margin_ok}, "
          f"exact subdifferential bound: {lemma_ok}")
    report(9, "LSI and W2I transfers bound the talagrand constant", ok)


def test_criterion_10_monge_ampere_refinement():
    mono_ok, convex_ok = True, True
    details = []
    for a in (8.0, 12.0):
        spec = spec_from_names("identity", "identity", a)
        rms = []
        for n in (101, 201, 401):
            space, mu = double_well_grid(n=n)
            cost = build_cost(space, CostProfile("square"))
            res = minimize_fixed_point(spec, mu, cost,
                                       MinimizeConfig(multistarts=6))
            assert res.value < -1e-6, "minimizer must be non-trivial"
            prof = ma_residual_1d(space, mu, res.minimizer, res.lambda_bar)
            rms.append(prof.ma_rms)
            # V + x^2/lambda is convex up to roundoff at a converged minimum
            g = prof.v + space.points**2 / res.lambda_bar
            if float(np.diff(g, 2).min()) < -1e-8:
                convex_ok = False
        if not (rms[0] > rms[1] > rms[2]):
            mono_ok = False
        details.append(f"a={a:g}: " + " -> ".join(f"{r:.3e}" for r in rms))
    ok = mono_ok and convex_ok
    print("    MA residual under refinement 101 -> 201 -> 401: "
          + "; ".join(details) + f"; convexity: {convex_ok}")
    report(10, "monge-ampere residual decreases under refinement", ok)
