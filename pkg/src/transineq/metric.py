"""Finite metric spaces, power-type cost functions and discrete slopes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    AsymmetricDistance,
    DimensionMismatch,
    DoublingUnbounded,
    NegativeDistance,
    TriangleViolation,
)

TRIANGLE_TOL = 1e-12

# 2048-point log grid used for numeric sup of x*phi'(x)/phi(x) and phi(2x)/phi(x)
_LOG_GRID = np.logspace(-6.0, 6.0, 2048)


@dataclass(frozen=True)
class FiniteMetricSpace:
    """Points with a validated distance matrix."""

    dist: np.ndarray
    points: Optional[np.ndarray] = None  # 1D coordinates for grid instances

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def diameter(self) -> float:
        return float(self.dist.max())


def validate_space(dist, points=None, tol: float = TRIANGLE_TOL) -> FiniteMetricSpace:
    """Check symmetry, positivity and the full triangle-inequality scan."""
    d = np.asarray(dist, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise AsymmetricDistance(f"expected a square matrix, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise NegativeDistance("distance matrix contains non-finite entries")
    if np.any(d < 0):
        raise NegativeDistance("distance matrix contains negative entries")
    n = d.shape[0]
    if np.any(np.abs(np.diag(d)) > tol):
        raise NegativeDistance("nonzero diagonal entries")
    if np.any(np.abs(d - d.T) > tol):
        i, j = np.unravel_index(np.argmax(np.abs(d - d.T)), d.shape)
        raise AsymmetricDistance(f"dist[{i}][{j}] != dist[{j}][{i}]")
    off = d + np.eye(n) * (1.0 + d.max(initial=0.0))
    if np.any(off <= 0):
        i, j = np.unravel_index(int(np.argmin(off)), d.shape)
        raise NegativeDistance(f"zero distance between distinct points {i}, {j}")
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    _assert_triangle(d, tol)
    d.setflags(write=False)
    pts = None
    if points is not None:
        pts = np.asarray(points, dtype=float)
        pts.setflags(write=False)
    return FiniteMetricSpace(dist=d, points=pts)


def _assert_triangle(d: np.ndarray, tol: float) -> None:
    n = d.shape[0]
    for k in range(n):
        slack = d - (d[:, k : k + 1] + d[k : k + 1, :])
        if np.any(slack > tol):
            i, j = np.unravel_index(int(np.argmax(slack)), d.shape)
            raise TriangleViolation(int(i), int(j), k, float(slack[i, j]))


# ---------------------------------------------------------------------------
# cost profiles (closed library: exact exponents, no user callables)


@dataclass(frozen=True)
class CostProfile:
    kind: str  # 'square' | 'power' | 'linear_plus_square'
    p: float = 2.0

    def __post_init__(self):
        if self.kind not in ("square", "power", "linear_plus_square"):
            raise ValueError(f"unknown profile {self.kind!r}")
        if self.kind == "power" and self.p < 1.0:
            raise ValueError("power profile needs p >= 1")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "square":
            return x * x
        if self.kind == "power":
            return x**self.p
        return x + x * x

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "square":
            return 2.0 * x
        if self.kind == "power":
            return self.p * x ** (self.p - 1.0)
        return 1.0 + 2.0 * x

    @property
    def exact_exponent(self) -> float:
        if self.kind == "square":
            return 2.0
        if self.kind == "power":
            return self.p
        return 2.0  # sup of (1+2x)/(1+x), attained in the limit x -> inf

    @property
    def exact_doubling(self) -> float:
        if self.kind == "square":
            return 4.0
        if self.kind == "power":
            return 2.0**self.p
        return 4.0


def doubling_ratio(phi: CostProfile, cap: float = 1e9) -> float:
    """sup phi(2x)/phi(x) over the log grid, checked against the cap."""
    vals = phi(2.0 * _LOG_GRID) / phi(_LOG_GRID)
    num = float(vals.max())
    out = max(num, phi.exact_doubling)
    if out > cap:
        raise DoublingUnbounded(f"doubling ratio {out:.3e} exceeds cap {cap:.3e}")
    return out


def cost_exponent(phi: CostProfile) -> float:
    """Exponent sup_x x*phi'(x)/phi(x); exact for the library members.

    The numeric sup over the log grid is computed as a cross-check and the
    analytic value is returned (the numeric sup can only approach it from
    below for profiles whose sup is attained in the limit).
    """
    doubling_ratio(phi)  # raises DoublingUnbounded for pathological profiles
    num = float((_LOG_GRID * phi.derivative(_LOG_GRID) / phi(_LOG_GRID)).max())
    exact = phi.exact_exponent
    if num > exact + 1e-9:
        raise ValueError(f"numeric exponent {num} exceeds analytic value {exact}")
    return exact


@dataclass(frozen=True)
class PowerTypeCost:
    """Cost c = phi(d), its exponent and the induced metric data."""

    phi: CostProfile
    exponent_po: float
    doubling_ratio_K: float
    cost: np.ndarray
    truncation_level: Optional[float] = None

    @property
    def n(self) -> int:
        return self.cost.shape[0]

    @property
    def max_cost(self) -> float:
        return float(self.cost.max())


def build_cost(
    space: FiniteMetricSpace, phi: CostProfile, truncate: Optional[float] = None
) -> PowerTypeCost:
    po = cost_exponent(phi)
    K = doubling_ratio(phi)
    if not (1.0 <= po <= K - 1.0 + 1e-12):
        raise ValueError(f"exponent {po} outside [1, K-1] with K={K}")
    c = np.asarray(phi(space.dist), dtype=float)
    np.fill_diagonal(c, 0.0)
    if truncate is not None:
        if truncate <= 0:
            raise ValueError("truncation level must be positive")
        c = np.minimum(c, truncate)
    c.setflags(write=False)
    return PowerTypeCost(
        phi=phi,
        exponent_po=po,
        doubling_ratio_K=K,
        cost=c,
        truncation_level=truncate,
    )


def induced_distance(space: FiniteMetricSpace, cost: PowerTypeCost) -> np.ndarray:
    """d~ = c^(1/p_o); asserts the triangle inequality on all triples."""
    dt = cost.cost ** (1.0 / cost.exponent_po)
    try:
        _assert_triangle(dt, 1e-10 * (1.0 + dt.max(initial=0.0)))
    except TriangleViolation as exc:
        raise TriangleViolation(*exc.triple, exc.slack) from None
    dt.setflags(write=False)
    return dt


# ---------------------------------------------------------------------------
# discrete slope operators


@dataclass(frozen=True)
class SlopeOperator:
    """Global slope max_y [g(y)-g(x)]+/d, or graph slope restricted to d <= r."""

    mode: str = "global"  # 'global' | 'graph'
    radius: Optional[float] = None

    def __post_init__(self):
        if self.mode not in ("global", "graph"):
            raise ValueError(f"unknown slope mode {self.mode!r}")
        if self.mode == "graph" and (self.radius is None or self.radius <= 0):
            raise ValueError("graph mode needs a positive radius")


def slope(space: FiniteMetricSpace, op: SlopeOperator, g) -> np.ndarray:
    """Per-point slope vector; isolated-in-radius points get 0."""
    g = np.asarray(g, dtype=float)
    if g.shape != (space.n,):
        raise DimensionMismatch(f"expected length-{space.n} vector, got {g.shape}")
    d = space.dist
    with np.errstate(divide="ignore", invalid="ignore"):
        inc = (g[None, :] - g[:, None]) / d
    np.fill_diagonal(inc, -np.inf)
    inc = np.where(np.isnan(inc), -np.inf, inc)
    if op.mode == "graph":
        inc = np.where(d <= op.radius, inc, -np.inf)
    return np.maximum(inc.max(axis=1), 0.0)
