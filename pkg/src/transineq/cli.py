"""Command-line surface: instance ingestion, deterministic runs, JSON/CSV reports."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import json
import math
import os
import sys
import tempfile
from typing import Optional

import numpy as np

from . import __version__
from .errors import (
    ChainViolated,
    DualPrimalGap,
    InputParse,
    TransIneqError,
)
from .inequalities import (
    SuiteConfig,
    build_semiconcave_class,
    constants_report,
    dual_value,
    estimate_t2,
    estimate_w2i,
    ma_residual_1d,
    verify_otto_villani,
    verify_restricted_lsi,
)
from .instances import Instance, load_instance, parse_instance
from .measures import (
    check_concentration_bound,
    concentration_profile,
    fit_concentration_constants,
    prob_vector,
)
from .metric import SlopeOperator, induced_distance
from .transport import check_solution, ot_solve
from .variational import MinimizeConfig, minimize_fixed_point, minimize_mirror, \
    minimize_truncation, spec_from_names

COMMANDS = (
    "validate", "transport", "minimize", "constants", "verify-ov",
    "verify-restricted-lsi", "verify-w2i", "concentration", "dual-check",
    "ma-residual",
)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(x, (np.integer,)):
        return int(x)
    if dataclasses.is_dataclass(x):
        return _jsonable(dataclasses.asdict(x))
    return x


def _atomic_write(path: str, data: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, header, rows) -> None:
    import io

    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating))
                     else v for v in row])
    _atomic_write(path, buf.getvalue())


def _write_report(args, result: dict, csv_files) -> str:
    run_config = {
        "command": args.command,
        "instance": args.instance,
        "nu": getattr(args, "nu", None),
        "seed": args.seed,
        "tol": getattr(args, "tol", None),
        "a": getattr(args, "a", None),
        "alpha": getattr(args, "alpha", None),
        "beta": getattr(args, "beta", None),
        "method": getattr(args, "method", None),
        "slope": getattr(args, "slope", None),
        "radius": getattr(args, "radius", None),
        "lambda_o": getattr(args, "lambda_o", None),
        "multistarts": getattr(args, "multistarts", None),
        "delta": getattr(args, "delta", None),
        "out": args.out,
        "tv_threads": os.environ.get("TV_THREADS"),
    }
    report = {
        "schema": 1,
        "version": __version__,
        "config": run_config,
        "result": _jsonable(result),
        "csv_files": sorted(csv_files),
        "metadata": {
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        },
    }
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"{args.command}.json")
    _atomic_write(path, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path


def _slope_op(args, inst: Instance) -> SlopeOperator:
    mode = args.slope
    if mode == "auto":
        if inst.space.points is not None:
            pts = inst.space.points
            return SlopeOperator(mode="graph", radius=1.5 * float(pts[1] - pts[0]))
        return SlopeOperator(mode="global")
    if mode == "graph":
        if args.radius is None:
            raise InputParse("--slope graph needs --radius")
        return SlopeOperator(mode="graph", radius=args.radius)
    return SlopeOperator(mode="global")


def _auto_tol(args, inst: Instance) -> float:
    """Bisection slack; must dominate the sub-grid perturbation scale."""
    if args.tol is not None:
        return args.tol
    if inst.space.points is not None:
        h = float(inst.space.points[1] - inst.space.points[0])
        return max(1e-3, 0.4 * h)
    return 1e-3


def _min_config(args) -> MinimizeConfig:
    return MinimizeConfig(multistarts=args.multistarts, seed=args.seed)


# ---------------------------------------------------------------------------
# command handlers: return (result dict, list of csv paths, summary, exit code)


def _cmd_validate(args, inst: Instance):
    result = {
        "n": inst.space.n,
        "diameter": inst.space.diameter,
        "is_grid": inst.space.points is not None,
        "cost_exponent": inst.cost.exponent_po,
        "doubling_ratio": inst.cost.doubling_ratio_K,
        "max_cost": inst.cost.max_cost,
        "mu_support_size": int(len(inst.mu.support)),
        "mu_min_weight": float(inst.mu.w[inst.mu.w > 0].min()),
    }
    summary = f"valid space n={inst.space.n} diameter={inst.space.diameter:.6g}"
    return result, [], summary, 0


def _cmd_transport(args, inst: Instance):
    if args.nu is None:
        raise InputParse("transport needs --nu (JSON measure file)")
    with open(args.nu) as fh:
        obj = json.load(fh)
    from .instances import _parse_mu

    nu = _parse_mu(obj, inst.space)
    sol = ot_solve(nu, inst.mu, inst.cost)
    chk = check_solution(sol, nu, inst.mu, inst.cost)
    os.makedirs(args.out, exist_ok=True)
    plan_csv = os.path.join(args.out, "plan.csv")
    pairs = sol.support_pairs
    _write_csv(plan_csv, ["i", "j", "mass"],
               [(int(i), int(j), sol.plan[i, j]) for i, j in pairs])
    pot_csv = os.path.join(args.out, "potentials.csv")
    _write_csv(pot_csv, ["index", "psi", "phi"],
               [(i, sol.psi[i], sol.phi[i]) for i in range(inst.space.n)])
    result = {
        "primal_cost": sol.primal_cost,
        "dual_cost": sol.dual_cost,
        "duality_gap": sol.duality_gap,
        "n_pivots": sol.n_pivots,
        "backend": sol.backend,
        "check": chk,
    }
    code = 0 if chk["ok"] else 2
    summary = (f"cost={sol.primal_cost:.10g} gap={sol.duality_gap:.3e} "
               f"pivots={sol.n_pivots}")
    return result, [plan_csv, pot_csv], summary, code


def _cmd_minimize(args, inst: Instance):
    spec = spec_from_names(args.alpha, args.beta, args.a)
    config = _min_config(args)
    if args.method == "mirror":
        res = minimize_mirror(spec, inst.mu, inst.cost, config)
    elif args.method == "fixed_point":
        res = minimize_fixed_point(spec, inst.mu, inst.cost, config)
    else:
        top = inst.cost.max_cost
        levels = [top * f for f in (0.25, 0.5, 0.75)] + [top]
        res = minimize_truncation(spec, inst.mu, inst.cost, levels, config)
    os.makedirs(args.out, exist_ok=True)
    min_csv = os.path.join(args.out, "minimizer.csv")
    _write_csv(min_csv, ["index", "mu", "nu"],
               [(i, inst.mu.w[i], res.minimizer.w[i]) for i in range(inst.mu.n)])
    result = {
        "value": res.value,
        "method": res.method,
        "lambda_bar": res.lambda_bar,
        "residual": res.residual,
        "constant_c": res.constant_c,
        "agreement_tv": res.agreement_tv,
        "multistart_count": res.multistart_count,
        "stalled": res.stalled,
        "trace": list(res.trace),
    }
    summary = (f"min F_a = {res.value:.10g} residual={res.residual:.3e} "
               f"method={res.method}")
    return result, [min_csv], summary, 0


def _cmd_constants(args, inst: Instance):
    tol = _auto_tol(args, inst)
    sl = _slope_op(args, inst)
    suite = SuiteConfig(seed=args.seed)
    rep = constants_report(inst.space, inst.mu, inst.cost, sl, tol=tol,
                           suite=suite, config=_min_config(args))
    result = {
        "tol": tol,
        "c_t2": {"lo": rep.c_t2.lo, "hi": rep.c_t2.hi,
                 "witness": None if rep.c_t2.witness is None
                 else rep.c_t2.witness.w},
        "c_lsi": {"value": rep.c_lsi.value, "n_probes": rep.c_lsi.n_probes,
                  "skipped": rep.c_lsi.skipped_degenerate,
                  "slope_mode": rep.c_lsi.slope_mode,
                  "witness": None if rep.c_lsi.witness is None
                  else rep.c_lsi.witness.w},
        "c_w2i": {"value": rep.c_w2i.value, "n_probes": rep.c_w2i.n_probes,
                  "skipped": rep.c_w2i.skipped_degenerate,
                  "slope_mode": rep.c_w2i.slope_mode,
                  "witness": None if rep.c_w2i.witness is None
                  else rep.c_w2i.witness.w},
        "a_mu": {"lo": rep.a_mu.lo, "hi": rep.a_mu.hi,
                 "inconclusive_levels": rep.a_mu.inconclusive_levels,
                 "witness": None if rep.a_mu.witness is None
                 else rep.a_mu.witness.w},
        "chain_ok": rep.chain_ok,
        "margin": rep.margin,
        "suite_seed": suite.seed,
        "note": rep.note,
    }
    ok = all(rep.chain_ok.values())
    summary = (f"c_t2=[{rep.c_t2.lo:.4g},{rep.c_t2.hi:.4g}] "
               f"c_lsi>={rep.c_lsi.value:.4g} c_w2i>={rep.c_w2i.value:.4g} "
               f"a_mu=[{rep.a_mu.lo:.4g},{rep.a_mu.hi:.4g}] chain_ok={ok}")
    return result, [], summary, 0 if ok else 2


def _cmd_verify_ov(args, inst: Instance):
    tol = _auto_tol(args, inst)
    sl = _slope_op(args, inst)
    try:
        rep = verify_otto_villani(inst.space, inst.mu, inst.cost, sl, tol=tol,
                                  suite=SuiteConfig(seed=args.seed),
                                  config=_min_config(args), strict=True)
    except ChainViolated as exc:
        return {"error": str(exc)}, [], f"FAIL {exc}", 2
    result = dataclasses.asdict(rep)
    summary = (f"t2.hi={rep.c_t2_hi:.4g} <= 4*lsi bound {rep.t2_bound:.4g}; "
               f"subdifferential bound {rep.lemma32_lhs:.6g} <= {rep.lemma32_rhs:.6g}")
    return result, [], summary, 0


def _cmd_verify_restricted_lsi(args, inst: Instance):
    tol = _auto_tol(args, inst)
    sl = _slope_op(args, inst)
    cls = build_semiconcave_class(inst.space, args.lambda_o, seed=args.seed)
    try:
        rep = verify_restricted_lsi(inst.space, inst.mu, inst.cost, sl, cls,
                                    tol=tol, config=_min_config(args), strict=True)
    except ChainViolated as exc:
        return {"error": str(exc)}, [], f"FAIL {exc}", 2
    result = dataclasses.asdict(rep)
    summary = (f"t2.hi={rep.c_t2_hi:.4g} <= restricted bound {rep.bound:.4g} "
               f"(D_restr={rep.d_restricted:.4g}, lambda_o={rep.lambda_o:.4g})")
    return result, [], summary, 0


def _cmd_verify_w2i(args, inst: Instance):
    tol = _auto_tol(args, inst)
    sl = _slope_op(args, inst)
    c_t2 = estimate_t2(inst.mu, inst.cost, tol=tol, config=_min_config(args))
    c_w2i = estimate_w2i(inst.space, inst.mu, inst.cost, sl,
                         SuiteConfig(seed=args.seed), tol=tol)
    margin = 0.10
    bound = 2.0 * math.sqrt(max(c_w2i.value * (1.0 + margin), 0.0))
    ok = c_t2.hi <= bound + 1e-6
    result = {
        "c_t2": {"lo": c_t2.lo, "hi": c_t2.hi},
        "c_w2i": c_w2i.value,
        "bound": bound,
        "margin": margin,
        "chain_ok": ok,
    }
    summary = f"t2.hi={c_t2.hi:.4g} vs 2*sqrt(w2i) bound {bound:.4g} ok={ok}"
    return result, [], summary, 0 if ok else 2


def _cmd_concentration(args, inst: Instance):
    dtilde = induced_distance(inst.space, inst.cost)
    mode = "exact" if inst.space.n <= 20 else "sublevel"
    profile = concentration_profile(inst.mu, dtilde, mode=mode)
    fit = fit_concentration_constants(profile, inst.cost.exponent_po)
    checked = None
    if mode == "exact":
        checked = check_concentration_bound(
            inst.mu, dtilde, inst.cost.exponent_po, fit.a_prime * (1.0 + 1e-9),
            fit.r_o,
        )
    os.makedirs(args.out, exist_ok=True)
    prof_csv = os.path.join(args.out, "profile.csv")
    _write_csv(prof_csv, ["r", "alpha"],
               [(r, al) for r, al in zip(profile.radii, profile.alpha)])
    result = {
        "mode": mode,
        "a_prime": fit.a_prime,
        "r_o": fit.r_o,
        "bracket": list(fit.bracket),
        "n_radii": int(len(profile.radii)),
        "full_check_ok": checked,
    }
    summary = f"fit a'={fit.a_prime:.6g} r_o={fit.r_o:.4g} mode={mode}"
    return result, [prof_csv], summary, 0


def _cmd_dual_check(args, inst: Instance):
    spec = spec_from_names("identity", "identity", args.a)
    try:
        dual, primal = dual_value(spec, inst.mu, inst.cost,
                                  config=_min_config(args), strict=True)
    except DualPrimalGap as exc:
        return ({"error": str(exc), "dual": exc.dual, "primal": exc.primal},
                [], f"FAIL {exc}", 2)
    result = {"dual": dual, "primal": primal, "gap": abs(dual - primal)}
    summary = f"dual={dual:.10g} primal={primal:.10g} gap={abs(dual-primal):.3e}"
    return result, [], summary, 0


def _cmd_ma_residual(args, inst: Instance):
    if inst.space.points is None:
        raise InputParse("ma-residual needs a 1D grid instance")
    spec = spec_from_names("identity", "identity", args.a)
    res = minimize_fixed_point(spec, inst.mu, inst.cost, _min_config(args))
    prof = ma_residual_1d(inst.space, inst.mu, res.minimizer, res.lambda_bar)
    os.makedirs(args.out, exist_ok=True)
    prof_csv = os.path.join(args.out, "residuals.csv")
    _write_csv(
        prof_csv,
        ["x", "V", "V1", "V2", "preMA_residual", "MA_residual"],
        [(prof.x[i], prof.v[i], prof.v1[i], prof.v2[i],
          prof.pre_ma_residual[i], prof.ma_residual[i])
         for i in range(len(prof.x))],
    )
    result = {
        "value": res.value,
        "lambda_bar": res.lambda_bar,
        "pre_ma_rms": prof.pre_ma_rms,
        "ma_rms": prof.ma_rms,
        "boundary_excluded": list(prof.boundary_excluded),
        "minimizer_trivial": bool(res.value >= -1e-12),
    }
    summary = (f"preMA rms={prof.pre_ma_rms:.4e} MA rms={prof.ma_rms:.4e} "
               f"lambda={res.lambda_bar:.6g}")
    return result, [prof_csv], summary, 0


_HANDLERS = {
    "validate": _cmd_validate,
    "transport": _cmd_transport,
    "minimize": _cmd_minimize,
    "constants": _cmd_constants,
    "verify-ov": _cmd_verify_ov,
    "verify-restricted-lsi": _cmd_verify_restricted_lsi,
    "verify-w2i": _cmd_verify_w2i,
    "concentration": _cmd_concentration,
    "dual-check": _cmd_dual_check,
    "ma-residual": _cmd_ma_residual,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="transineq",
        description="transport-entropy inequality toolkit",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--instance", required=True, help="instance JSON file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None,
                   help="bisection slack (default: grid-adapted)")
    p.add_argument("--a", type=float, default=1.0, help="entropy weight a")
    p.add_argument("--alpha", default="identity",
                   choices=("identity", "sqrt", "power"))
    p.add_argument("--beta", default="identity",
                   choices=("identity", "sqrt", "power"))
    p.add_argument("--method", default="fixed_point",
                   choices=("mirror", "fixed_point", "truncation"))
    p.add_argument("--nu", default=None, help="second measure JSON (transport)")
    p.add_argument("--slope", default="auto", choices=("auto", "global", "graph"))
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--lambda-o", dest="lambda_o", type=float, default=1.0)
    p.add_argument("--multistarts", type=int, default=16)
    p.add_argument("--delta", type=float, default=None)
    return p


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        inst = load_instance(args.instance)
        result, csvs, summary, code = _HANDLERS[args.command](args, inst)
    except (InputParse, OSError, json.JSONDecodeError) as exc:
        print(f"{args.command}: input error: {exc}", file=sys.stderr)
        return 1
    except TransIneqError as exc:
        print(f"{args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    path = _write_report(args, result, [os.path.basename(c) for c in csvs])
    print(f"{args.command}: {summary} [{path}]")
    return code


if __name__ == "__main__":
    sys.exit(main())
