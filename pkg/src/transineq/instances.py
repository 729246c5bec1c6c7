"""Instance builders and JSON ingestion for spaces, base measures and costs."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import InputParse
from .measures import ProbVector, prob_vector
from .metric import (
    CostProfile,
    FiniteMetricSpace,
    PowerTypeCost,
    build_cost,
    validate_space,
)


@dataclass(frozen=True)
class Instance:
    space: FiniteMetricSpace
    mu: ProbVector
    cost: PowerTypeCost


def grid_space(lo: float, hi: float, n: int) -> FiniteMetricSpace:
    """Uniform 1D grid with the Euclidean distance."""
    if n < 2 or hi <= lo:
        raise InputParse(f"bad grid spec lo={lo} hi={hi} n={n}")
    x = np.linspace(lo, hi, n)
    return validate_space(np.abs(x[:, None] - x[None, :]), points=x)


def gaussian_grid(
    n: int = 201, lo: float = -6.0, hi: float = 6.0, sigma: float = 1.0,
    center: float = 0.0,
) -> tuple:
    """Standard workhorse: discretized N(center, sigma^2) on a uniform grid."""
    space = grid_space(lo, hi, n)
    x = space.points
    mu = prob_vector(np.exp(-0.5 * ((x - center) / sigma) ** 2))
    return space, mu


def mixture_grid(
    n: int,
    lo: float,
    hi: float,
    centers: Sequence[float],
    sigmas: Sequence[float],
    weights: Optional[Sequence[float]] = None,
) -> tuple:
    """Gaussian mixture density sampled on a uniform grid."""
    space = grid_space(lo, hi, n)
    x = space.points
    if weights is None:
        weights = [1.0] * len(centers)
    if not (len(centers) == len(sigmas) == len(weights)):
        raise InputParse("mixture components have mismatched lengths")
    dens = np.zeros(n)
    for c, s, w in zip(centers, sigmas, weights):
        dens += w / s * np.exp(-0.5 * ((x - c) / s) ** 2)
    return space, prob_vector(dens)


def double_well_grid(n: int = 201, lo: float = -5.0, hi: float = 5.0,
                     depth: float = 8.0) -> tuple:
    """Standard Gaussian tilted into a symmetric double well.

    Density exp(-(x^2 - 4)^2 / depth): two smooth modes near +-2 with a
    genuine barrier between them, which is the regime where the variational
    functional keeps non-trivial interior minimizers over a range of a.
    """
    space = grid_space(lo, hi, n)
    x = space.points
    return space, prob_vector(np.exp(-((x * x - 4.0) ** 2) / depth))


def random_points_space(rng: np.random.Generator, n: int, dim: int = 2,
                        scale: float = 1.0) -> FiniteMetricSpace:
    """Euclidean distance matrix of n random points in R^dim."""
    pts = scale * rng.standard_normal((n, dim))
    diff = pts[:, None, :] - pts[None, :, :]
    return validate_space(np.sqrt((diff * diff).sum(axis=2)))


def random_instance(
    rng: np.random.Generator,
    n: int,
    kind: str = "square",
    p: float = 2.0,
    dim: int = 2,
    dirichlet: float = 1.0,
) -> Instance:
    """Random point cloud with a Dirichlet base measure and a library cost."""
    space = random_points_space(rng, n, dim=dim)
    mu = prob_vector(rng.gamma(dirichlet, size=n) + 1e-9)
    cost = build_cost(space, CostProfile(kind, p=p))
    return Instance(space=space, mu=mu, cost=cost)


# ---------------------------------------------------------------------------
# JSON ingestion


def _parse_space(obj: dict) -> FiniteMetricSpace:
    if not isinstance(obj, dict):
        raise InputParse("space must be an object")
    keys = set(obj)
    if "grid" in keys:
        if keys != {"grid"}:
            raise InputParse(f"unknown space fields {sorted(keys - {'grid'})}")
        g = obj["grid"]
        extra = set(g) - {"a", "b", "n"}
        if extra:
            raise InputParse(f"unknown grid fields {sorted(extra)}")
        return grid_space(float(g["a"]), float(g["b"]), int(g["n"]))
    if "dist" in keys:
        extra = keys - {"dist", "points"}
        if extra:
            raise InputParse(f"unknown space fields {sorted(extra)}")
        pts = obj.get("points")
        return validate_space(np.asarray(obj["dist"], dtype=float),
                              points=None if pts is None else np.asarray(pts))
    raise InputParse("space needs either 'grid' or 'dist'")


def _parse_mu(obj: dict, space: FiniteMetricSpace) -> ProbVector:
    if not isinstance(obj, dict):
        raise InputParse("mu must be an object")
    keys = set(obj)
    if "weights" in keys:
        if keys != {"weights"}:
            raise InputParse(f"unknown mu fields {sorted(keys - {'weights'})}")
        w = np.asarray(obj["weights"], dtype=float)
        if w.shape != (space.n,):
            raise InputParse(f"mu weights length {w.shape} vs n={space.n}")
        return prob_vector(w)
    if "density" in keys:
        extra = keys - {"density", "sigma", "center", "depth"}
        if extra:
            raise InputParse(f"unknown mu fields {sorted(extra)}")
        if space.points is None:
            raise InputParse("density-form mu needs a grid space")
        x = space.points
        name = obj["density"]
        if name == "gaussian":
            sigma = float(obj.get("sigma", 1.0))
            center = float(obj.get("center", 0.0))
            return prob_vector(np.exp(-0.5 * ((x - center) / sigma) ** 2))
        if name == "double_well":
            depth = float(obj.get("depth", 8.0))
            return prob_vector(np.exp(-((x * x - 4.0) ** 2) / depth))
        if name == "uniform":
            return prob_vector(np.ones_like(x))
        raise InputParse(f"unknown density {name!r}")
    raise InputParse("mu needs either 'weights' or 'density'")


def _parse_cost(obj: dict, space: FiniteMetricSpace) -> PowerTypeCost:
    if not isinstance(obj, dict):
        raise InputParse("cost must be an object")
    extra = set(obj) - {"phi", "p", "truncate"}
    if extra:
        raise InputParse(f"unknown cost fields {sorted(extra)}")
    kind = obj.get("phi", "square")
    try:
        profile = CostProfile(kind, p=float(obj.get("p", 2.0)))
        trunc = obj.get("truncate")
        return build_cost(space, profile,
                          truncate=None if trunc is None else float(trunc))
    except ValueError as exc:
        raise InputParse(str(exc)) from None


def parse_instance(obj: dict) -> Instance:
    """Strict parse of {'space': ..., 'mu': ..., 'cost': ...}."""
    if not isinstance(obj, dict):
        raise InputParse("instance must be a JSON object")
    extra = set(obj) - {"space", "mu", "cost"}
    if extra:
        raise InputParse(f"unknown instance fields {sorted(extra)}")
    for key in ("space", "mu", "cost"):
        if key not in obj:
            raise InputParse(f"instance missing {key!r}")
    space = _parse_space(obj["space"])
    mu = _parse_mu(obj["mu"], space)
    cost = _parse_cost(obj["cost"], space)
    return Instance(space=space, mu=mu, cost=cost)


def load_instance(path: Union[str, "object"]) -> Instance:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise InputParse(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputParse(f"bad JSON in {path}: {exc}") from None
    return parse_instance(obj)
