"""Error terms of the tower ansatz and their L^p norms.

Both error terms use the analytic Laplacian of U, so no numerical
differentiation enters.  Exponentials are clamped at |arg| = 700 and every
clamped node is counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .ansatz import (AnnuliPartition, RadialField, RadialGrid, assemble_tower,
                     grid_for_table, tower_laplacian, DEFAULT_NODES)
from .cascade import CascadeTable, TowerConfig, build_table

EXP_CLAMP = 700.0
DEFAULT_P = 1.1

Potential = Union[float, Callable[[np.ndarray], np.ndarray]]


def clamped_exp(x):
    """exp with the argument clipped to [-700, 700]; returns (values, n_saturated)."""
    x = np.asarray(x, dtype=float)
    sat = int(np.count_nonzero(np.abs(x) > EXP_CLAMP))
    return np.exp(np.clip(x, -EXP_CLAMP, EXP_CLAMP)), sat


def potential_values(V: Potential, r):
    if callable(V):
        v = np.asarray(V(r), dtype=float)
        return np.broadcast_to(v, np.shape(r)).copy()
    return np.full(np.shape(r), float(V))


def default_potentials(table: CascadeTable):
    return table.config.v0_at_0, table.config.v1_at_0


@dataclass
class ResidualField:
    field: RadialField
    saturated: int
    mass0: float = math.nan
    mass1: float = math.nan


def residual_liouville(table: CascadeTable, U: RadialField, potentials=None, laplacian=None,
                       rho=None) -> ResidualField:
    """R = Delta U + rho (V0 e^U - nu V1 e^{-tau U})."""
    grid = U.grid
    if laplacian is None:
        laplacian = tower_laplacian(table, grid)
    V0, V1 = potentials if potentials is not None else default_potentials(table)
    rho = table.config.rho if rho is None else rho
    tau = table.tau
    e0, s0 = clamped_exp(U.values)
    e1, s1 = clamped_exp(-tau * U.values)
    r = grid.r
    R = laplacian + rho * (potential_values(V0, r) * e0
                           - table.config.nu_coeff * potential_values(V1, r) * e1)
    return ResidualField(RadialField(grid, R, "R"), s0 + s1)


def residual_meanfield(table: CascadeTable, U: RadialField, potentials=None,
                       laplacian=None) -> ResidualField:
    """Delta U + lam0 V0 e^U / int V0 e^U - lam1 tau V1 e^{-tau U} / int V1 e^{-tau U}."""
    grid = U.grid
    if laplacian is None:
        laplacian = tower_laplacian(table, grid)
    V0, V1 = potentials if potentials is not None else default_potentials(table)
    tau = table.tau
    r = grid.r
    e0, s0 = clamped_exp(U.values)
    e1, s1 = clamped_exp(-tau * U.values)
    f0 = potential_values(V0, r) * e0
    f1 = potential_values(V1, r) * e1
    mass0, mass1 = grid.integrate(f0), grid.integrate(f1)
    if not (mass0 > 0 and mass1 > 0):
        raise ValueError("vanishing mass; potentials must be positive")
    R = laplacian + table.lambda0 * f0 / mass0 - table.lambda1 * tau * f1 / mass1
    return ResidualField(RadialField(grid, R, "Rmf"), s0 + s1, mass0, mass1)


@dataclass
class ResidualReport:
    rho: float
    p: float
    per_annulus: np.ndarray
    total_norm: float
    mass0: float = math.nan
    mass1: float = math.nan
    saturated: int = 0
    slope_fit: dict | None = None


def lp_norm_on_annuli(field_: RadialField, partition: AnnuliPartition, p=DEFAULT_P,
                      rho=math.nan) -> ResidualReport:
    """(integral of |h|^p)^(1/p) over the pierced disk, split by annulus.

    Each grid node's trapezoid weight goes to the annulus containing the
    node, so the split is exactly additive.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    grid = field_.grid
    contrib = grid.area_weights * np.abs(field_.values) ** p
    lab = partition.labels(grid.t)
    per = np.bincount(lab, weights=contrib, minlength=partition.m)
    total = float(contrib.sum()) ** (1 / p)
    return ResidualReport(rho, p, per, total)


@dataclass
class SweepReport:
    kind: str
    p: float
    rhos: np.ndarray
    norms: np.ndarray
    reports: list = field(repr=False)
    slope: float = math.nan
    intercept: float = math.nan
    max_log_deviation: float = math.nan

    @property
    def passed(self):
        return bool(self.slope > 0 and self.max_log_deviation <= 0.5)

    def as_dict(self):
        return {"kind": self.kind, "p": self.p, "slope": self.slope,
                "intercept": self.intercept, "max_log_deviation": self.max_log_deviation,
                "passed": self.passed}


def residual_report(table: CascadeTable, kind="liouville", p=DEFAULT_P, n=DEFAULT_NODES,
                    potentials=None) -> ResidualReport:
    grid = grid_for_table(table, n)
    tw = assemble_tower(table, grid)
    if kind == "liouville":
        res = residual_liouville(table, tw.U, potentials, tw.laplacian)
    elif kind == "meanfield":
        res = residual_meanfield(table, tw.U, potentials, tw.laplacian)
    else:
        raise ValueError(f"unknown residual kind {kind!r}")
    rep = lp_norm_on_annuli(res.field, AnnuliPartition.from_table(table), p, table.config.rho)
    rep.mass0, rep.mass1, rep.saturated = res.mass0, res.mass1, res.saturated
    return rep


def fit_loglog(x, y):
    """OLS slope of log y against log x, with the max residual in log units."""
    lx, ly = np.log(np.asarray(x)), np.log(np.asarray(y))
    slope, icpt = np.polyfit(lx, ly, 1)
    dev = float(np.max(np.abs(ly - (slope * lx + icpt))))
    return float(slope), float(icpt), dev


def sweep_and_fit(config: TowerConfig, rhos: Sequence[float], p=DEFAULT_P, kind="liouville",
                  n=DEFAULT_NODES, potentials=None) -> SweepReport:
    rhos = np.sort(np.asarray(rhos, dtype=float))
    if rhos.size < 5:
        raise ValueError("need at least 5 rho values")
    if math.log10(rhos[-1] / rhos[0]) < 1.5:
        raise ValueError("rho values must span at least 1.5 decades")
    tables = [build_table(config.replace(rho=float(r))) for r in rhos]  # rejects bad configs first
    reps = [residual_report(tb, kind, p, n, potentials) for tb in tables]
    norms = np.array([r.total_norm for r in reps])
    slope, icpt, dev = fit_loglog(rhos, norms)
    for r in reps:
        r.slope_fit = {"slope": slope, "intercept": icpt, "max_log_deviation": dev}
    return SweepReport(kind, p, rhos, norms, reps, slope, icpt, dev)


def weighted_norm(values, y, alpha):
    """Norm sqrt(int |y|^{a-2}/(1+|y|^a)^2 |u|^2 dy) for radial u sampled on radii y.

    The radii should be log-spaced and wide enough for the weight to decay.
    """
    y = np.asarray(y, dtype=float)
    u = np.asarray(values, dtype=float)
    t = np.log(y)
    ly = (alpha - 2) * t - 2 * np.logaddexp(0.0, alpha * t)
    g = RadialGrid(t)
    return math.sqrt(g.integrate(np.exp(ly) * u * u))


def cross_term_bounds(table: CascadeTable):
    """Matrix C[j, i] of neighbor-bubble sizes seen from annulus j.

    (delta_i/delta_j)^{alpha_i} for i < j and (delta_j/delta_i)^{alpha_i} for
    i > j; the diagonal is zero.
    """
    m = table.m
    ld, al = table.log_delta, table.alpha
    C = np.zeros((m, m))
    for j in range(m):
        for i in range(m):
            if i < j:
                C[j, i] = math.exp(al[i] * (ld[i] - ld[j]))
            elif i > j:
                C[j, i] = math.exp(al[i] * (ld[j] - ld[i]))
    return C
