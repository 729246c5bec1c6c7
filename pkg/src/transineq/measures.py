"""Probability vectors, entropies, exponential integrals and concentration profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import (
    AbsoluteContinuityViolated,
    DimensionMismatch,
    TooLargeForExact,
)
from .metric import FiniteMetricSpace, PowerTypeCost, SlopeOperator, slope

MASS_TOL = 1e-12


@dataclass(frozen=True)
class ProbVector:
    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1:
            raise DimensionMismatch(f"weights must be a vector, got shape {w.shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.w > 0)

    def restricted_to(self, mask) -> "ProbVector":
        w = np.where(mask, self.w, 0.0)
        return ProbVector(w / w.sum())


def prob_vector(weights) -> ProbVector:
    """Normalize nonnegative weights into a ProbVector."""
    w = np.asarray(weights, dtype=float)
    s = w.sum()
    if s <= 0:
        raise ValueError("weights must have positive total mass")
    return ProbVector(w / s)


def total_variation(nu: ProbVector, mu: ProbVector) -> float:
    return 0.5 * float(np.abs(nu.w - mu.w).sum())


def relative_entropy(nu: ProbVector, mu: ProbVector) -> float:
    """KL divergence sum nu_i log(nu_i/mu_i); +inf off absolute continuity.

    Evaluated as sum mu_i [(1+r_i) log1p(r_i) - r_i] + sum (nu_i - mu_i) with
    r_i = nu_i/mu_i - 1: each bracket is nonnegative, so no cancellation even
    for nu within a few ulps of mu (the naive form loses all digits there,
    which matters because downstream thresholds amplify H by huge factors).
    """
    if nu.n != mu.n:
        raise DimensionMismatch(f"sizes differ: {nu.n} vs {mu.n}")
    sup = nu.w > 0
    if np.any(mu.w[sup] == 0):
        return math.inf
    r = (nu.w[sup] - mu.w[sup]) / mu.w[sup]
    small = np.abs(r) < 1e-4
    g = np.empty_like(r)
    rs = r[small]
    g[small] = rs * rs * (0.5 + rs * (-1.0 / 6.0 + rs * (1.0 / 12.0 - rs / 20.0)))
    q = nu.w[sup][~small] / mu.w[sup][~small]
    g[~small] = q * np.log(q) - (q - 1.0)
    terms = mu.w[sup] * g
    order = np.argsort(terms)
    mass_defect = math.fsum(np.sort(nu.w[sup] - mu.w[sup]))
    return max(math.fsum(terms[order]) + mass_defect, 0.0)


def fisher_information(
    space: FiniteMetricSpace, nu: ProbVector, mu: ProbVector, slope_op: SlopeOperator
) -> float:
    """I(nu|mu) = sum nu_i |grad+ log(dnu/dmu)|(i)^2.

    Increments toward points outside supp(nu) use g = -inf there and so
    contribute nothing; points outside supp(nu) carry zero nu-weight.
    """
    if nu.n != mu.n:
        raise DimensionMismatch(f"sizes differ: {nu.n} vs {mu.n}")
    sup = nu.w > 0
    if np.any(mu.w[sup] == 0):
        raise AbsoluteContinuityViolated("supp(nu) not contained in supp(mu)")
    g = np.full(nu.n, -np.inf)
    g[sup] = np.log(nu.w[sup] / mu.w[sup])
    s = slope(space, slope_op, g)
    return float(np.dot(nu.w[sup], s[sup] ** 2))


@dataclass(frozen=True)
class ExpIntegral:
    value: float
    log_value: float
    overflow: bool


def exp_integral(mu: ProbVector, cost: PowerTypeCost, delta: float) -> ExpIntegral:
    """I_delta = sum_ij mu_i mu_j exp(delta c_ij), via log-sum-exp."""
    sup = mu.support
    logmu = np.log(mu.w[sup])
    logterms = logmu[:, None] + logmu[None, :] + delta * cost.cost[np.ix_(sup, sup)]
    lv = float(logsumexp(logterms))
    if lv > math.log(np.finfo(float).max):
        return ExpIntegral(value=math.inf, log_value=lv, overflow=True)
    return ExpIntegral(value=math.exp(lv), log_value=lv, overflow=False)


# ---------------------------------------------------------------------------
# concentration profiles


@dataclass(frozen=True)
class ConcentrationProfile:
    """alpha(r) = max over A with mu(A) >= 1/2 of 1 - mu(A_r), at the distinct radii."""

    radii: np.ndarray  # sorted, starts at 0
    alpha: np.ndarray  # nonincreasing, alpha[0] <= 1/2
    witness_sets: Tuple[int, ...]  # bitmask of the maximizing A per radius
    exact: bool

    def alpha_at(self, r: float) -> float:
        """Right-continuous piecewise-constant evaluation."""
        idx = int(np.searchsorted(self.radii, r + 1e-15, side="right")) - 1
        if idx < 0:
            return self.alpha[0]
        return float(self.alpha[idx])


_EXACT_LIMIT = 20


def _admissible_masks(w: np.ndarray) -> np.ndarray:
    n = len(w)
    masks = np.arange(1, 1 << n, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n)) & 1
    mass = bits @ w
    return masks[mass >= 0.5 - 1e-12]


def _tails_for_masks(
    masks: np.ndarray, w: np.ndarray, dtilde: np.ndarray, radii: np.ndarray
) -> np.ndarray:
    """Row t: 1 - mu(A_r) over the radii grid, for A = masks[t]."""
    n = len(w)
    bits = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    out = np.empty((len(masks), len(radii)))
    for t in range(len(masks)):
        dmin = dtilde[:, bits[t]].min(axis=1)
        out[t] = [w[dmin > r + 1e-12].sum() for r in radii]
    return out


def concentration_profile(
    mu: ProbVector, dtilde: np.ndarray, mode: str = "exact"
) -> ConcentrationProfile:
    n = mu.n
    radii = np.unique(np.concatenate([[0.0], dtilde.ravel()]))
    if mode == "exact":
        if n > _EXACT_LIMIT:
            raise TooLargeForExact(f"n={n} exceeds exact-mode limit {_EXACT_LIMIT}")
        masks = _admissible_masks(mu.w)
    elif mode == "sublevel":
        masks = _sublevel_masks(mu.w, dtilde)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    best = np.zeros(len(radii))
    wit = np.zeros(len(radii), dtype=np.int64)
    chunk = 4096
    for lo in range(0, len(masks), chunk):
        tails = _tails_for_masks(masks[lo : lo + chunk], mu.w, dtilde, radii)
        arg = tails.argmax(axis=0)
        val = tails[arg, np.arange(len(radii))]
        upd = val > best + 1e-15
        best[upd] = val[upd]
        wit[upd] = masks[lo + arg[upd]]
    # defensively clamp monotonicity dust
    best = np.minimum.accumulate(best)
    return ConcentrationProfile(
        radii=radii, alpha=best, witness_sets=tuple(int(x) for x in wit),
        exact=(mode == "exact"),
    )


def _sublevel_masks(w: np.ndarray, dtilde: np.ndarray) -> np.ndarray:
    """Candidate sets: prefixes of distance-to-point orderings and weight orderings."""
    n = len(w)
    cands = set()
    orderings = [np.argsort(dtilde[x], kind="stable") for x in range(n)]
    orderings.append(np.argsort(-w, kind="stable"))
    for order in orderings:
        mask = 0
        mass = 0.0
        for idx in order:
            mask |= 1 << int(idx)
            mass += w[idx]
            if mass >= 0.5 - 1e-12:
                cands.add(mask)
    return np.array(sorted(cands), dtype=np.int64)


@dataclass(frozen=True)
class FitConstants:
    a_prime: float
    r_o: float
    bracket: Tuple[float, float]


def _profile_feasible(
    profile: ConcentrationProfile, p_o: float, a_prime: float, r_o: float
) -> bool:
    """Check alpha(r) <= exp(-[(r - r_o)+]^p_o / a') for ALL r >= 0.

    alpha is piecewise constant so the continuum constraint binds at the
    right endpoint of each interval: alpha_k <= exp(-[(r_{k+1}-r_o)+]^p/a').
    """
    r = profile.radii
    al = profile.alpha
    for kk in range(len(r)):
        if al[kk] <= 0:
            continue
        r_next = r[kk + 1] if kk + 1 < len(r) else math.inf
        if not math.isfinite(r_next):
            return False  # alpha never reaches 0; cannot happen on finite spaces
        t = max(r_next - r_o, 0.0)
        if math.log(al[kk]) > -(t**p_o) / a_prime + 1e-12:
            return False
    return True


def fit_concentration_constants(
    profile: ConcentrationProfile, p_o: float, tol: float = 1e-6
) -> FitConstants:
    """Smallest a' such that the profile bound holds with r_o = 0 (bisection).

    The bound is feasible for every a' > 0 if r_o is left free (push r_o past
    the largest radius), so the fit anchors r_o = 0 and minimizes a' alone;
    the minimal feasible r_o at the returned a' is reported (it is 0).
    """
    if float(profile.alpha.max(initial=0.0)) <= 0.0:
        return FitConstants(a_prime=tol, r_o=0.0, bracket=(0.0, tol))
    hi = 1.0
    while not _profile_feasible(profile, p_o, hi, 0.0):
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("concentration fit diverged")
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _profile_feasible(profile, p_o, mid, 0.0):
            hi = mid
        else:
            lo = mid
    return FitConstants(a_prime=hi, r_o=0.0, bracket=(lo, hi))


def check_concentration_bound(
    mu: ProbVector,
    dtilde: np.ndarray,
    p_o: float,
    a_prime: float,
    r_o: float,
    masks: Optional[np.ndarray] = None,
) -> bool:
    """Full-enumeration check of mu(A_r) >= 1 - exp(-(r-r_o)^p/a') for all A, r.

    Every admissible subset is scanned (2^n), independent of the profile
    machinery's argmax bookkeeping.
    """
    n = mu.n
    if masks is None:
        if n > _EXACT_LIMIT:
            raise TooLargeForExact(f"n={n} exceeds exact-mode limit {_EXACT_LIMIT}")
        masks = _admissible_masks(mu.w)
    w = mu.w
    for lo in range(0, len(masks), 4096):
        block = masks[lo : lo + 4096]
        bits = ((block[:, None] >> np.arange(n)) & 1).astype(bool)
        for t in range(len(block)):
            dmin = dtilde[:, bits[t]].min(axis=1)
            # 1 - mu(A_r) is constant between consecutive distinct dmin values,
            # so the continuum bound binds at each right endpoint r_next
            vals = np.unique(dmin)
            for r_next in vals[1:]:
                al = w[dmin >= r_next - 1e-12].sum()
                if al <= 0:
                    continue
                tt = max(r_next - r_o, 0.0)
                if math.log(al) > -(tt**p_o) / a_prime + 1e-9:
                    return False
    return True
