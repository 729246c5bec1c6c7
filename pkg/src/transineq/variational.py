"""The functional F_a: evaluation, certificates, first variation, minimization."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    BoundaryPointWarning,
    BoundVacuous,
    EntropyInfinite,
    ScheduleNotIncreasing,
)
from .measures import ProbVector, exp_integral, relative_entropy, total_variation
from .metric import PowerTypeCost
from .transport import TransportSolution, ot_solve, truncate_cost

LAMBDA_CLAMP = (1e-8, 1e8)
_MU_BALL = 1e-10  # entropy ball around mu excluded from sqrt-case fixed points


@dataclass(frozen=True)
class Profile:
    """Scalar profile from the closed library {sqrt, identity, power(q)}."""

    kind: str
    q: float = 1.0

    def __post_init__(self):
        if self.kind not in ("sqrt", "identity", "power"):
            raise ValueError(f"unknown profile {self.kind!r}")
        if self.kind == "power" and self.q <= 0:
            raise ValueError("power profile needs q > 0")

    @property
    def exponent(self) -> float:
        if self.kind == "sqrt":
            return 0.5
        if self.kind == "identity":
            return 1.0
        return self.q

    def __call__(self, t: float) -> float:
        t = max(float(t), 0.0)
        return t**self.exponent

    def derivative(self, t: float) -> float:
        e = self.exponent
        t = float(t)
        if e == 1.0:
            return 1.0
        if t <= 0.0:
            return math.inf if e < 1.0 else 0.0
        return e * t ** (e - 1.0)


@dataclass(frozen=True)
class FunctionalSpec:
    """F_a(nu) = alpha(a H(nu|mu)) - beta(T_c(nu,mu))."""

    alpha: Profile
    beta: Profile
    a: float

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("a must be positive")
        ea, eb = self.alpha.exponent, self.beta.exponent
        # t -> alpha(t) - beta(t + b) must stay bounded below for every b >= 0
        if ea < eb or (ea == eb and ea > 1.0):
            raise ValueError(
                f"inadmissible pair: alpha grows like t^{ea}, beta like t^{eb}"
            )


def spec_from_names(alpha: str, beta: str, a: float, q_alpha: float = 1.0,
                    q_beta: float = 1.0) -> FunctionalSpec:
    return FunctionalSpec(
        alpha=Profile(alpha, q_alpha), beta=Profile(beta, q_beta), a=a
    )


@dataclass
class _State:
    nu: ProbVector
    entropy: float
    solution: TransportSolution
    value: float


def _eval_state(spec: FunctionalSpec, nu: ProbVector, mu: ProbVector,
                cost: PowerTypeCost) -> _State:
    h = relative_entropy(nu, mu)
    if not math.isfinite(h):
        raise EntropyInfinite("supp(nu) not contained in supp(mu)")
    sol = ot_solve(nu, mu, cost)
    val = spec.alpha(spec.a * h) - spec.beta(sol.primal_cost)
    return _State(nu=nu, entropy=h, solution=sol, value=val)


def evaluate(spec: FunctionalSpec, nu: ProbVector, mu: ProbVector,
             cost: PowerTypeCost) -> float:
    return _eval_state(spec, nu, mu, cost).value


def lambda_bar(spec: FunctionalSpec, entropy: float, tcost: float) -> float:
    num = spec.a * spec.alpha.derivative(spec.a * entropy)
    den = spec.beta.derivative(tcost)
    if den == 0 or not math.isfinite(num):
        return LAMBDA_CLAMP[1] if (den == 0 or num == math.inf) else LAMBDA_CLAMP[0]
    return float(np.clip(num / den, *LAMBDA_CLAMP))


# ---------------------------------------------------------------------------
# lower-bound certificate


def _golden_min(f, lo: float, hi: float, tol: float = 1e-10) -> Tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = f(d)
    x = 0.5 * (lo + hi)
    return x, f(x)


def lower_bound_certificate(mu: ProbVector, cost: PowerTypeCost, delta: float,
                            spec: FunctionalSpec) -> float:
    """Certificate b >= 0 with F_a(nu) >= -b for every nu.

    Uses T_c(nu,mu) <= integral of c against nu x mu <= H/delta + I_delta/(e delta)
    and minimizes g(h) = alpha(a h) - beta(h/delta + I_delta/(e delta)) over
    entropy levels h >= 0 by golden section.
    """
    if spec.a < 1.0 / delta:
        raise BoundVacuous(f"need a >= 1/delta, got a={spec.a}, 1/delta={1.0/delta}")
    idelta = exp_integral(mu, cost, delta)
    offset = idelta.value / (math.e * delta)

    def g(h: float) -> float:
        return spec.alpha(spec.a * h) - spec.beta(h / delta + offset)

    # expand until g is increasing, then golden-section on [0, hi]
    hi = 1.0
    while g(2.0 * hi) < g(hi) and hi < 1e12:
        hi *= 2.0
    _, gmin = _golden_min(g, 0.0, 2.0 * hi)
    gmin = min(gmin, g(0.0))
    return -gmin


# ---------------------------------------------------------------------------
# first variation


def first_variation(spec: FunctionalSpec, nu: ProbVector, mu: ProbVector,
                    cost: PowerTypeCost) -> np.ndarray:
    """Centered direction-derivative kernel on supp(nu).

    k = a alpha'(aH) log(dnu/dmu) - beta'(T_c) psi_bar, shifted so that
    sum k nu = 0. Entries off supp(nu) are set to 0 (one-sided directions
    only there; flagged with BoundaryPointWarning).
    """
    st = _eval_state(spec, nu, mu, cost)
    if not np.array_equal(nu.w > 0, mu.w > 0):
        warnings.warn(
            "support of nu strictly inside supp(mu); one-sided variations only",
            BoundaryPointWarning,
        )
    return _kernel(spec, st, mu)


def _kernel(spec: FunctionalSpec, st: _State, mu: ProbVector) -> np.ndarray:
    nu = st.nu
    sup = nu.w > 0
    ca = spec.a * spec.alpha.derivative(spec.a * st.entropy)
    cb = spec.beta.derivative(st.solution.primal_cost)
    k = np.zeros(nu.n)
    logr = np.log(nu.w[sup] / mu.w[sup])
    # at nu = mu both profile derivatives can blow up, but there the log
    # ratio and the potentials vanish too; the kernel is 0 by convention
    ta = ca * logr if (st.entropy > 0 and math.isfinite(ca)) else np.zeros(logr.shape)
    tb = cb * st.solution.psi[sup] if math.isfinite(cb) else np.zeros(logr.shape)
    k[sup] = ta - tb
    k[sup] -= np.dot(nu.w[sup], k[sup])
    return k


# ---------------------------------------------------------------------------
# minimization


@dataclass(frozen=True)
class MinimizeConfig:
    multistarts: int = 32
    max_iter: int = 2000
    tol: float = 1e-10
    seed: int = 0
    tau: float = 0.5  # fixed-point damping
    eta_scale: float = 0.5  # mirror step eta0 = eta_scale / max|kernel|


@dataclass(frozen=True)
class MinimizationResult:
    minimizer: ProbVector
    value: float
    method: str
    lambda_bar: float
    residual: float
    constant_c: float
    trace: Tuple[float, ...]
    multistart_count: int
    agreement_tv: float
    stalled: bool = False


def _residual_and_c(spec: FunctionalSpec, st: _State, mu: ProbVector
                    ) -> Tuple[float, float, float]:
    """(lambda_bar, stddev of lb*log(dnu/dmu) - psi on supp, its nu-mean)."""
    lb = lambda_bar(spec, st.entropy, st.solution.primal_cost)
    sup = st.nu.w > 0
    expr = lb * np.log(st.nu.w[sup] / mu.w[sup]) - st.solution.psi[sup]
    wts = st.nu.w[sup]
    mean = float(np.dot(wts, expr))
    var = float(np.dot(wts, (expr - mean) ** 2))
    return lb, math.sqrt(max(var, 0.0)), mean


def _starts(mu: ProbVector, count: int, rng: np.random.Generator
            ) -> List[np.ndarray]:
    """mu itself, exponential tilts e^{t g} mu, and Dirichlet draws on supp(mu)."""
    sup = mu.w > 0
    out = [mu.w.copy()]
    while len(out) < count:
        if len(out) % 2 == 1:
            g = rng.standard_normal(mu.n)
            t = rng.uniform(0.5, 4.0)
            w = np.where(sup, mu.w * np.exp(t * (g - g.max())), 0.0)
        else:
            w = np.where(sup, rng.gamma(1.0, 1.0, size=mu.n), 0.0)
        s = w.sum()
        if s > 0 and np.isfinite(s):
            out.append(w / s)
    return out


def _aggregate(spec, mu, cost, method, finals: List[Tuple[float, int, _State, bool]]
               ) -> MinimizationResult:
    finals.sort(key=lambda t: (t[0], t[1]))
    best_val, _, best_st, stalled = finals[0]
    winners = [st for v, _, st, _ in finals if v <= best_val + 1e-9]
    agree = 0.0
    for st in winners[1:]:
        agree = max(agree, total_variation(st.nu, winners[0].nu))
    lb, res, cc = _residual_and_c(spec, best_st, mu)
    return MinimizationResult(
        minimizer=best_st.nu,
        value=best_val,
        method=method,
        lambda_bar=lb,
        residual=res,
        constant_c=cc,
        trace=tuple(getattr(best_st, "_trace", ())),
        multistart_count=len(finals),
        agreement_tv=agree,
        stalled=stalled,
    )


def _mirror_single(spec, mu, cost, w0, config) -> Tuple[_State, bool]:
    nu = ProbVector(w0)
    st = _eval_state(spec, nu, mu, cost)
    trace = [st.value]
    stalled = False
    for _ in range(config.max_iter):
        k = _kernel(spec, st, mu)
        kmax = float(np.abs(k).max())
        if kmax <= config.tol:
            break
        eta = config.eta_scale / kmax
        accepted = None
        while eta >= 1e-12:
            logw = np.where(nu.w > 0, np.log(nu.w, where=nu.w > 0), -np.inf)
            lw = logw - eta * k
            lw -= lw.max()
            w = np.exp(lw)
            w[nu.w == 0] = 0.0
            cand = ProbVector(w / w.sum())
            cst = _eval_state(spec, cand, mu, cost)
            if cst.value < st.value - 1e-15:
                accepted = cst
                break
            eta *= 0.5
        if accepted is None:
            stalled = kmax > 1e-6
            break
        gain = st.value - accepted.value
        nu, st = accepted.nu, accepted
        trace.append(st.value)
        if gain <= config.tol:
            break
    st._trace = trace
    return st, stalled


def minimize_mirror(spec: FunctionalSpec, mu: ProbVector, cost: PowerTypeCost,
                    config: MinimizeConfig = MinimizeConfig()) -> MinimizationResult:
    """Global minimization by multiplicative-weights descent with multistarts."""
    rng = np.random.default_rng(config.seed)
    finals = []
    for idx, w0 in enumerate(_starts(mu, config.multistarts, rng)):
        st, stalled = _mirror_single(spec, mu, cost, w0, config)
        finals.append((st.value, idx, st, stalled))
    return _aggregate(spec, mu, cost, "mirror", finals)


def _fixed_point_single(spec, mu, cost, w0, config) -> Tuple[_State, bool]:
    sqrt_case = spec.alpha.exponent < 1.0
    nu = ProbVector(w0)
    st = _eval_state(spec, nu, mu, cost)
    best = st
    trace = [st.value]
    tau = config.tau
    bad = 0
    oscillated = False
    sup = mu.w > 0
    logmu = np.where(sup, np.log(mu.w, where=sup), -np.inf)
    for _ in range(config.max_iter):
        if sqrt_case and st.entropy < _MU_BALL:
            # stationarity is only characterized away from mu; stop and let
            # the aggregator keep mu as its own candidate
            break
        lb = lambda_bar(spec, st.entropy, st.solution.primal_cost)
        target = st.solution.psi / lb + logmu
        cur = np.where(nu.w > 0, np.log(nu.w, where=nu.w > 0), -np.inf)
        lw = (1.0 - tau) * cur + tau * target
        lw = np.where(nu.w > 0, lw, -np.inf)
        m = lw.max()
        w = np.exp(lw - m)
        w[~np.isfinite(lw)] = 0.0
        nxt = ProbVector(w / w.sum())
        step = total_variation(nxt, nu)
        nst = _eval_state(spec, nxt, mu, cost)
        if nst.value > st.value + 1e-13:
            bad += 1
            if bad >= 3:
                tau *= 0.5
                bad = 0
                if tau < config.tau / 64.0:
                    oscillated = True
                    break
        else:
            bad = 0
        nu, st = nxt, nst
        trace.append(st.value)
        if st.value < best.value:
            best = st
        if step <= 1e-12:
            break
    if best.value < st.value:
        st = best
    st._trace = trace
    return st, oscillated


def minimize_fixed_point(spec: FunctionalSpec, mu: ProbVector, cost: PowerTypeCost,
                         config: MinimizeConfig = MinimizeConfig()
                         ) -> MinimizationResult:
    """Damped iteration nu <- nu^(1-tau) (e^{psi/lambda} mu)^tau, multistarted."""
    rng = np.random.default_rng(config.seed)
    finals = []
    for idx, w0 in enumerate(_starts(mu, config.multistarts, rng)):
        st, osc = _fixed_point_single(spec, mu, cost, w0, config)
        finals.append((st.value, idx, st, osc))
    return _aggregate(spec, mu, cost, "fixed_point", finals)


def minimize_truncation(spec: FunctionalSpec, mu: ProbVector, cost: PowerTypeCost,
                        levels: Sequence[float],
                        config: MinimizeConfig = MinimizeConfig()
                        ) -> MinimizationResult:
    """Continuation over truncated costs c ∧ level, warm-started level to level."""
    levels = [float(x) for x in levels]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ScheduleNotIncreasing(f"levels {levels} not strictly increasing")
    if levels[-1] < cost.max_cost:
        raise ScheduleNotIncreasing(
            f"final level {levels[-1]} below max cost {cost.max_cost}"
        )
    warm: Optional[ProbVector] = None
    value_trace = []
    result = None
    for lv in levels:
        ct = truncate_cost(cost, lv)
        rng = np.random.default_rng(config.seed)
        starts = _starts(mu, config.multistarts, rng)
        if warm is not None:
            starts.insert(0, warm.w.copy())
        finals = []
        for idx, w0 in enumerate(starts):
            st, osc = _fixed_point_single(spec, mu, ct, w0, config)
            finals.append((st.value, idx, st, osc))
        result = _aggregate(spec, mu, ct, "truncation", finals)
        warm = result.minimizer
        value_trace.append(result.value)
    return MinimizationResult(
        minimizer=result.minimizer,
        value=result.value,
        method="truncation",
        lambda_bar=result.lambda_bar,
        residual=result.residual,
        constant_c=result.constant_c,
        trace=tuple(value_trace),
        multistart_count=result.multistart_count,
        agreement_tv=result.agreement_tv,
        stalled=result.stalled,
    )
