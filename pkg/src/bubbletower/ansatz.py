"""Projected tower ansatz on the pierced disk  eps < |x| < R.

Radial fields live on a grid uniform in t = log r.  The Dirichlet projection
of a radial function differs from it by a harmonic radial function, i.e. by
A + B t, so it is computed exactly from the two boundary values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bubbles import Bubble, eval_w_t
from .cascade import CascadeTable, ConfigError, LOG_TINY, nu

DEFAULT_NODES = 20001


@dataclass(frozen=True)
class RadialGrid:
    t: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1 or t.size < 3:
            raise ValueError("grid needs at least 3 nodes")
        if np.any(np.diff(t) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "t", t)

    @classmethod
    def uniform(cls, log_inner, log_outer, n=DEFAULT_NODES):
        if n < 3:
            raise ValueError("need n >= 3")
        if not log_inner < log_outer:
            raise ValueError("inner radius must be below the outer radius")
        t = np.linspace(log_inner, log_outer, n)
        t[0], t[-1] = log_inner, log_outer
        return cls(t)

    @property
    def n(self):
        return self.t.size

    @property
    def r(self):
        return np.exp(self.t)

    @property
    def h(self):
        """Spacing (the grid is uniform when built by ``uniform``)."""
        return (self.t[-1] - self.t[0]) / (self.n - 1)

    @property
    def trapezoid(self):
        w = np.empty(self.n)
        d = np.diff(self.t)
        w[0], w[-1] = d[0] / 2, d[-1] / 2
        w[1:-1] = (d[:-1] + d[1:]) / 2
        return w

    @property
    def area_weights(self):
        """Weights q with  sum(q f) ~ integral of f over the annulus (2D)."""
        return 2 * math.pi * np.exp(2 * self.t) * self.trapezoid

    def integrate(self, f):
        return float(self.area_weights @ np.asarray(f, dtype=float))


def grid_for_table(table: CascadeTable, n=DEFAULT_NODES) -> RadialGrid:
    if n < 1001:
        raise ValueError("grid needs at least 1001 nodes")
    return RadialGrid.uniform(table.log_epsilon, math.log(table.config.domain_radius), n)


@dataclass(frozen=True)
class RadialField:
    grid: RadialGrid
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.t.shape:
            raise ValueError("field length does not match the grid")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"field {self.label!r} has non-finite values")
        object.__setattr__(self, "values", v)

    def __sub__(self, other):
        return RadialField(self.grid, self.values - other.values, f"{self.label}-{other.label}")


@dataclass(frozen=True)
class AnnuliPartition:
    log_boundaries: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.log_boundaries, dtype=float)
        if np.any(np.diff(b) <= 0):
            raise ValueError("annulus boundaries must strictly increase")
        object.__setattr__(self, "log_boundaries", b)

    @classmethod
    def from_table(cls, table: CascadeTable):
        return cls(table.log_boundaries)

    @property
    def boundaries(self):
        return np.exp(self.log_boundaries)

    @property
    def m(self):
        return self.log_boundaries.size - 1

    def labels(self, t):
        """Annulus index 0..m-1 per node; A_j is (b_j, b_{j+1}], the hole edge joins A_1."""
        j = np.searchsorted(self.log_boundaries, np.asarray(t), side="left") - 1
        return np.clip(j, 0, self.m - 1)

    def masks(self, grid: RadialGrid):
        lab = self.labels(grid.t)
        return [lab == j for j in range(self.m)]


# --- projection -----------------------------------------------------------------

def project_radial_exact(bubble: Bubble, epsilon=None, domain_radius=1.0, *, log_epsilon=None):
    """Coefficients (A, B) with  P w = w + A + B log r  vanishing at eps and R."""
    if log_epsilon is None:
        if epsilon is None or not epsilon > 0:
            raise ValueError("need a positive epsilon")
        log_epsilon = math.log(epsilon)
    log_R = math.log(domain_radius)
    if not log_epsilon < log_R:
        raise ValueError("hole radius must be smaller than the domain radius")
    w_in = float(eval_w_t(bubble, log_epsilon))
    w_out = float(eval_w_t(bubble, log_R))
    B = -(w_out - w_in) / (log_R - log_epsilon)
    A = -w_out - B * log_R
    return A, B


def projected_bubble_t(bubble: Bubble, t, log_epsilon, domain_radius=1.0):
    A, B = project_radial_exact(bubble, domain_radius=domain_radius, log_epsilon=log_epsilon)
    return eval_w_t(bubble, t) + A + B * np.asarray(t)


def gamma_coefficient(bubble: Bubble, log_epsilon, h0=0.0):
    a = bubble.alpha
    return (-2 * a * bubble.log_delta + 4 * math.pi * a * h0) / (-log_epsilon / (2 * math.pi) + h0)


def remainder_bound(log_delta, alpha, log_epsilon):
    """delta^a + (eps/delta)^a + (1 + |log delta / log eps|) eps."""
    return (math.exp(alpha * log_delta) + math.exp(alpha * (log_epsilon - log_delta))
            + (1 + abs(log_delta / log_epsilon)) * math.exp(log_epsilon))


@dataclass
class ExpansionResult:
    values: np.ndarray
    gamma: float
    bound: float


def expansion_projection(bubble: Bubble, t, log_epsilon, h0=0.0) -> ExpansionResult:
    """Main terms  w - log(2 a^2 delta^a) + 4 pi a H - gamma G  on a centered disk.

    On a centered disk H(x, 0) is the constant h0, and G(x, 0) = -log|x|/(2 pi) + h0.
    """
    a = bubble.alpha
    g = gamma_coefficient(bubble, log_epsilon, h0)
    t = np.asarray(t, dtype=float)
    G = -t / (2 * math.pi) + h0
    vals = eval_w_t(bubble, t) - math.log(2 * a * a) - a * bubble.log_delta + 4 * math.pi * a * h0 - g * G
    return ExpansionResult(vals, g, remainder_bound(bubble.log_delta, a, log_epsilon))


def projection_gaps(table: CascadeTable, grid: RadialGrid):
    """Per bubble: (max |P w - expansion| on the grid, remainder bound)."""
    out = []
    for b in table_bubbles(table):
        pw = projected_bubble_t(b, grid.t, table.log_epsilon, table.config.domain_radius)
        ex = expansion_projection(b, grid.t, table.log_epsilon, table.config.h0)
        out.append((float(np.max(np.abs(pw - ex.values))), ex.bound))
    return out


# --- the tower --------------------------------------------------------------------

def table_bubbles(table: CascadeTable):
    return [Bubble(float(ld), float(a)) for ld, a in zip(table.log_delta, table.alpha)]


@dataclass
class Tower:
    U: RadialField
    contributions: np.ndarray = field(repr=False)  # (m, N), already weighted
    laplacian: np.ndarray = field(repr=False)      # analytic Delta U on the grid


def _check_solver_scope(table: CascadeTable):
    if table.log_epsilon < LOG_TINY / 2:
        raise ConfigError(
            f"log epsilon = {table.log_epsilon:.1f} is outside the solver range; "
            "increase rho or reduce m", "rho")


def assemble_tower(table: CascadeTable, grid: RadialGrid) -> Tower:
    _check_solver_scope(table)
    t = grid.t
    R = table.config.domain_radius
    contrib = np.empty((table.m, t.size))
    for k, (b, c) in enumerate(zip(table_bubbles(table), table.coeffs)):
        pw = projected_bubble_t(b, t, table.log_epsilon, R)
        pw[0] = pw[-1] = 0.0  # exact Dirichlet data
        contrib[k] = c * pw
    U = RadialField(grid, contrib.sum(axis=0), "U")
    return Tower(U, contrib, tower_laplacian(table, grid))


def tower_laplacian(table: CascadeTable, grid: RadialGrid):
    """Delta U = sum_i (-1)^i tau^{-nu(i)} |x|^{a_i - 2} e^{w_i}."""
    t = grid.t
    lap = np.zeros(t.size)
    for b, c in zip(table_bubbles(table), table.coeffs):
        lap -= c * np.exp((b.alpha - 2) * t + eval_w_t(b, t))
    return lap


def waje_prediction(table: CascadeTable, j, t):
    """Leading profile of U on the j-th annulus (0-based j)."""
    a = table.alpha[j]
    ld = table.log_delta[j]
    ly = np.asarray(t) - ld
    core = (-2 * ld - table.a[j] - math.log(table.config.rho)
            + (a - 2) * ly - 2 * np.logaddexp(0.0, a * ly))
    m = table.m
    H = table.config.h0
    far = (-1) ** (m + 1) * 2 * math.pi / table.tau ** nu(m) * (table.alpha[-1] + 2) * H
    return table.coeffs[j] * core + far


@dataclass
class WajeReport:
    per_annulus: np.ndarray
    argmax_t: np.ndarray
    deviation: np.ndarray = field(repr=False)


def check_expansion_waje(table: CascadeTable, U: RadialField) -> WajeReport:
    part = AnnuliPartition.from_table(table)
    t = U.grid.t
    dev = np.empty(t.size)
    per, arg = np.empty(table.m), np.empty(table.m)
    for j, mask in enumerate(part.masks(U.grid)):
        dev[mask] = np.abs(U.values[mask] - waje_prediction(table, j, t[mask]))
        k = np.argmax(dev[mask])
        per[j] = dev[mask][k]
        arg[j] = t[mask][k]
    return WajeReport(per, arg, dev)
