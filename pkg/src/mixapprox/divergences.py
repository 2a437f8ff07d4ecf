"""Distances and divergences between densities on shared grids.

All quantities are quadrature evaluations on a common lattice.  KL integration
is restricted to nodes where the first argument is positive; a zero of the
second argument at such a node is an absolute-continuity violation and raises,
it is never floored away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import (
    CHECK_SLACK,
    GridCompatibilityError,
    GridFunction,
    _lq_norm_values,
    sample_on_grid,
)

__all__ = [
    "AbsoluteContinuityError",
    "DivergenceReport",
    "Lemma13Report",
    "divergence_report",
    "lq_norm",
    "tv_distance",
    "kl_divergence",
    "empirical_distance",
    "kl_l2_bound_check",
]


class AbsoluteContinuityError(ValueError):
    """The approximant vanishes where the target has mass; KL is undefined."""


@dataclass(frozen=True)
class DivergenceReport:
    """One measured divergence value with its numerical context."""

    metric: str          # l1 | l2 | linf | tv | kl | dn
    order: float
    value: float
    grid_resolution: int
    truncation_loss: float


def divergence_report(metric: str, f: GridFunction, g: GridFunction) -> DivergenceReport:
    """Measure one named divergence between two grid densities."""
    orders = {"l1": 1.0, "l2": 2.0, "linf": math.inf}
    if metric in orders:
        value = lq_norm(f - g, orders[metric])
        order = orders[metric]
    elif metric == "tv":
        value, order = tv_distance(f, g), 1.0
    elif metric == "kl":
        value, order = kl_divergence(f, g), 1.0
    else:
        raise ValueError(f"unknown metric {metric!r}; expected l1, l2, linf, tv, kl")
    return DivergenceReport(
        metric=metric,
        order=order,
        value=value,
        grid_resolution=f.grid.points_per_axis,
        truncation_loss=f.truncation_loss + g.truncation_loss,
    )


def _common_grid(f: GridFunction, g: GridFunction):
    if not f.grid.same_lattice(g.grid):
        raise GridCompatibilityError("densities live on different grids")


def lq_norm(h: GridFunction, q) -> float:
    """Quadrature Lq norm; q = inf gives the max over nodes."""
    if not np.all(np.isfinite(h.values)):
        raise ValueError("grid function contains non-finite values")
    return _lq_norm_values(h.grid, h.values, q)


def tv_distance(f: GridFunction, g: GridFunction) -> float:
    """Half the L1 distance, on the same quadrature path as lq_norm."""
    _common_grid(f, g)
    return 0.5 * lq_norm(f - g, 1)


def kl_divergence(f: GridFunction, g: GridFunction) -> float:
    """Divergence sum of f log(f/g) over nodes where f > 0.

    Small negative quadrature residues (within -1e-9) clip to zero.
    """
    _common_grid(f, g)
    fv = f.values
    gv = g.values
    mask = fv > 0.0
    if np.any(gv[mask] < 1e-300):
        raise AbsoluteContinuityError(
            "approximant vanishes on a node where the target is positive"
        )
    integrand = np.zeros_like(fv)
    integrand[mask] = fv[mask] * (np.log(fv[mask]) - np.log(gv[mask]))
    value = f.grid.integrate(integrand)
    if -1e-9 <= value < 0.0:
        return 0.0
    return value


def empirical_distance(f, g, xs) -> float:
    """Root mean square difference of two evaluatable densities at sample points.

    The squared form divides the summed squared differences by the sample
    count; squaring the returned value recovers it.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        raise ValueError("empty sample")
    fd = np.asarray(f(xs), dtype=float)
    gd = np.asarray(g(xs), dtype=float)
    return float(np.sqrt(np.mean((fd - gd) ** 2)))


@dataclass(frozen=True)
class Lemma13Report:
    """KL versus the squared-L2-over-beta bound for lower-bounded densities."""

    kl: float
    l2_squared: float
    beta: float
    rhs: float
    passed: bool


def kl_l2_bound_check(f, g: GridFunction) -> Lemma13Report:
    """Check KL(f, g) <= ||f - g||_2^2 / beta on g's grid.

    `f` is a TargetDensity with a positive certified lower bound; `g` must be
    bounded below by a positive floor on the support.  beta is the smaller of
    the two lower bounds, since the inequality needs both densities in the
    lower-bounded class.
    """
    if f.beta_lower <= 0:
        raise ValueError("target density is not bounded below on its support")
    grid = g.grid
    if not grid.box.contains_box(f.support):
        raise ValueError("grid does not cover the target support")
    f_gf = sample_on_grid(f.pdf, grid)
    inside = f.support.contains_points(grid.mesh())
    g_min = float(g.values[inside].min())
    if g_min <= 0:
        raise ValueError("approximant is not bounded below on the support")
    beta = min(f.beta_lower, g_min)
    kl = kl_divergence(f_gf, g)
    l2sq = lq_norm(f_gf - g, 2) ** 2
    rhs = l2sq / beta
    return Lemma13Report(kl, l2sq, beta, rhs, bool(kl <= rhs * (1.0 + CHECK_SLACK)))
