"""Radial Newton solvers for the Liouville and mean-field sinh-Poisson problems.

In t = log r the radial Laplacian is e^{-2t} d^2/dt^2.  Each interior node k
carries the finite-volume balance

    F_k = (u_{k+1} - 2 u_k + u_{k-1}) / h + h e^{2 t_k} g(u_k),

i.e. h r^2 (Delta u + g(u)) integrated over one cell, with Dirichlet rows
u = 0 at both radii.  The Jacobian is symmetric tridiagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from enum import Enum

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .ansatz import (AnnuliPartition, RadialField, RadialGrid, assemble_tower,
                     grid_for_table, table_bubbles, DEFAULT_NODES)
from .bubbles import eval_w_t
from .cascade import CascadeTable, build_table
from .residual import default_potentials, fit_loglog, potential_values

DEFAULT_WINDOW = (0.3, 0.7)


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-9
    max_iter: int = 50
    backtrack: float = 0.5
    min_step: float = 2.0 ** -20
    window: tuple = DEFAULT_WINDOW


@dataclass
class SolveReport:
    converged: bool
    status: str
    iterations: int
    final_residual_sup: float
    residual_history: list
    phi_sup: float = math.nan
    phi_h1: float = math.nan
    nodal_radii: list = field(default_factory=list)
    nodal_ok: bool = False
    farfield_coeff: float = math.nan
    farfield_rel_err: float = math.nan
    shift_scalars: tuple | None = None
    s0: float = math.nan
    s1: float = math.nan
    step_history: list = field(default_factory=list)

    def as_dict(self):
        d = asdict(self)
        d["shift_scalars"] = list(self.shift_scalars) if self.shift_scalars else None
        return d


# --- discrete pieces ---------------------------------------------------------------

def _second_difference(u, h):
    out = np.zeros_like(u)
    out[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h
    return out


def _banded(diag_extra, h, n):
    """Banded storage of d^2/dt^2 / h + diag(diag_extra) with Dirichlet rows."""
    ab = np.zeros((3, n))
    ab[0, 2:] = 1 / h
    ab[2, :-2] = 1 / h
    ab[1, 1:-1] = -2 / h + diag_extra[1:-1]
    ab[1, 0] = ab[1, -1] = 1.0
    return ab


def _sup(x):
    return float(np.max(np.abs(x)))


def _exp_parts(table, grid, potentials, u):
    V0, V1 = potentials if potentials is not None else default_potentials(table)
    r = grid.r
    w = grid.h * np.exp(2 * grid.t)
    e0 = potential_values(V0, r) * np.exp(u)
    e1 = table.config.nu_coeff * potential_values(V1, r) * np.exp(-table.tau * u)
    return w, e0, e1


def liouville_residual(table, grid, u, potentials=None, rho=None):
    rho = table.config.rho if rho is None else rho
    w, e0, e1 = _exp_parts(table, grid, potentials, u)
    F = _second_difference(u, grid.h) + w * rho * (e0 - e1)
    F[0], F[-1] = u[0], u[-1]
    return F


def liouville_jacobian(table, grid, u, potentials=None, rho=None):
    rho = table.config.rho if rho is None else rho
    w, e0, e1 = _exp_parts(table, grid, potentials, u)
    return _banded(w * rho * (e0 + table.tau * e1), grid.h, grid.n)


def _line_search(F_of, x, dx, r0, opts, admissible=lambda x: True):
    lam = 1.0
    while True:
        xn = x + lam * dx
        if admissible(xn):
            with np.errstate(over="ignore", invalid="ignore"):
                Fn = F_of(xn)
            rn = _sup(Fn) if np.all(np.isfinite(Fn)) else math.inf
            if rn < r0:
                return xn, Fn, rn, lam, True
        if lam <= opts.min_step:
            return x, None, r0, lam, False
        lam *= opts.backtrack


def _finish(report, table, grid, u, U, opts):
    phi = u - U
    report.phi_sup = _sup(phi)
    report.phi_h1 = math.sqrt(2 * math.pi * float(grid.trapezoid @ np.gradient(phi, grid.t) ** 2))
    field_u = RadialField(grid, u, "u")
    nod = nodal_analysis(field_u, table)
    report.nodal_radii, report.nodal_ok = nod.radii, nod.ok
    try:
        c, rel = check_farfield(field_u, table, opts.window)
        report.farfield_coeff, report.farfield_rel_err = c, rel
    except ValueError:
        pass
    return report


def newton_solve_liouville(table: CascadeTable, grid: RadialGrid | None = None, potentials=None,
                           options: SolveOptions = SolveOptions(), initial=None):
    """Damped Newton for Delta u + rho (V0 e^u - V1 e^{-tau u}) = 0 from the tower."""
    grid = grid or grid_for_table(table)
    U = assemble_tower(table, grid).U.values
    u = U.copy() if initial is None else np.asarray(initial, dtype=float).copy()
    F = liouville_residual(table, grid, u, potentials)
    hist, steps = [_sup(F)], []
    status = "max_iter"
    for it in range(options.max_iter + 1):
        if hist[-1] <= options.tol:
            status = "converged"
            break
        if it == options.max_iter:
            break
        try:
            du = solve_banded((1, 1), liouville_jacobian(table, grid, u, potentials), -F)
        except (LinAlgError, ValueError):
            status = "singular_jacobian"
            break
        if not np.all(np.isfinite(du)):
            status = "singular_jacobian"
            break
        u, Fn, rn, lam, ok = _line_search(
            lambda v: liouville_residual(table, grid, v, potentials), u, du, hist[-1], options)
        if not ok:
            status = "line_search_failed"
            break
        F = Fn
        hist.append(rn)
        steps.append(lam)
    rep = SolveReport(status == "converged", status, len(hist) - 1, hist[-1], hist,
                      step_history=steps)
    return _finish(rep, table, grid, u, U, options), RadialField(grid, u, "u")


# --- mean-field ----------------------------------------------------------------------

def _meanfield_parts(table, grid, potentials, u):
    V0, V1 = potentials if potentials is not None else default_potentials(table)
    r = grid.r
    f0 = potential_values(V0, r) * np.exp(u)
    f1 = potential_values(V1, r) * np.exp(-table.tau * u)
    return f0, f1


def meanfield_residual(table, grid, x, potentials=None):
    """Nodal rows followed by the two mass-consistency rows (relative form)."""
    n = grid.n
    u, s0, s1 = x[:n], x[n], x[n + 1]
    f0, f1 = _meanfield_parts(table, grid, potentials, u)
    w = grid.h * np.exp(2 * grid.t)
    lam0, lam1, tau = table.lambda0, table.lambda1, table.tau
    F = np.empty(n + 2)
    F[:n] = _second_difference(u, grid.h) + w * (lam0 * f0 / s0 - lam1 * tau * f1 / s1)
    F[0], F[n - 1] = u[0], u[-1]
    q = grid.area_weights
    F[n] = 1 - (q @ f0) / s0
    F[n + 1] = 1 - (q @ f1) / s1
    return F


def _meanfield_step(table, grid, x, F, potentials):
    n = grid.n
    u, s0, s1 = x[:n], x[n], x[n + 1]
    f0, f1 = _meanfield_parts(table, grid, potentials, u)
    w = grid.h * np.exp(2 * grid.t)
    lam0, lam1, tau = table.lambda0, table.lambda1, table.tau
    q = grid.area_weights
    ab = _banded(w * (lam0 * f0 / s0 + lam1 * tau * tau * f1 / s1), grid.h, n)
    # columns for s0, s1 (zero on the Dirichlet rows)
    c0 = -w * lam0 * f0 / s0 ** 2
    c1 = w * lam1 * tau * f1 / s1 ** 2
    c0[0] = c0[-1] = c1[0] = c1[-1] = 0.0
    # rows for the mass equations
    r0 = -q * f0 / s0
    r1 = q * tau * f1 / s1
    D = np.diag([(q @ f0) / s0 ** 2, (q @ f1) / s1 ** 2])
    X = solve_banded((1, 1), ab, np.column_stack([-F[:n], c0, c1]))
    Rr = np.vstack([r0, r1])
    S = D - Rr @ X[:, 1:]
    ds = np.linalg.solve(S, -F[n:] - Rr @ X[:, 0])
    du = X[:, 0] - X[:, 1:] @ ds
    return np.concatenate([du, ds]), float(np.linalg.cond(S))


def newton_solve_meanfield(table: CascadeTable, grid: RadialGrid | None = None, potentials=None,
                           options: SolveOptions = SolveOptions(), initial=None):
    """Bordered Newton on (u, s0, s1) with s0 = int V0 e^u and s1 = int V1 e^{-tau u}."""
    grid = grid or grid_for_table(table)
    n = grid.n
    U = assemble_tower(table, grid).U.values
    u0 = U.copy() if initial is None else np.asarray(initial, dtype=float).copy()
    f0, f1 = _meanfield_parts(table, grid, potentials, u0)
    q = grid.area_weights
    x = np.concatenate([u0, [q @ f0, q @ f1]])
    F_of = lambda v: meanfield_residual(table, grid, v, potentials)
    positive = lambda v: v[n] > 0 and v[n + 1] > 0 and math.isfinite(v[n]) and math.isfinite(v[n + 1])
    F = F_of(x)
    hist, steps = [_sup(F)], []
    status = "max_iter"
    for it in range(options.max_iter + 1):
        if hist[-1] <= options.tol:
            status = "converged"
            break
        if it == options.max_iter:
            break
        try:
            dx, _ = _meanfield_step(table, grid, x, F, potentials)
        except (LinAlgError, ValueError):
            status = "singular_jacobian"
            break
        if not np.all(np.isfinite(dx)):
            status = "singular_jacobian"
            break
        xn, Fn, rn, lam, ok = _line_search(F_of, x, dx, hist[-1], options, positive)
        if not ok:
            status = "line_search_failed" if positive(x + options.min_step * dx) else "mass_out_of_range"
            break
        x, F = xn, Fn
        hist.append(rn)
        steps.append(lam)
    u = x[:n]
    rep = SolveReport(status == "converged", status, len(hist) - 1, hist[-1], hist,
                      s0=float(x[n]), s1=float(x[n + 1]), step_history=steps)
    _finish(rep, table, grid, u, U, options)
    op = assemble_linear_operator(table, grid, "L_meanfield")
    rep.shift_scalars = op.shift_scalars(u - U)
    return rep, RadialField(grid, u, "u")


# --- linear operators ------------------------------------------------------------------

class OperatorKind(str, Enum):
    LIOUVILLE = "L_liouville"
    MEANFIELD = "L_meanfield"


@dataclass
class DiscreteOperator:
    """Delta + K on the log-radial grid, plus the averaging terms for the mean-field kind.

    ``K0`` and ``K1`` are the odd- and even-index bubble weights; the
    Liouville kind uses K = K0 + K1.
    """
    kind: OperatorKind
    grid: RadialGrid
    K0: np.ndarray
    K1: np.ndarray
    lambda0: float
    lambda1_tau2: float

    @property
    def K(self):
        return self.K0 + self.K1

    def _averages(self, phi):
        q = self.grid.area_weights
        return (q @ (self.K0 * phi)) / self.lambda0, (q @ (self.K1 * phi)) / self.lambda1_tau2

    def shift_scalars(self, phi):
        """(-1/lambda0) int K0 phi and (-1/(lambda1 tau^2)) int K1 phi."""
        a0, a1 = self._averages(np.asarray(phi, dtype=float))
        return -a0, -a1

    def apply(self, phi):
        """Operator values at interior nodes (NaN on the two boundary nodes)."""
        phi = np.asarray(phi, dtype=float)
        g = self.grid
        out = np.full(g.n, np.nan)
        lap = np.exp(-2 * g.t[1:-1]) * (phi[2:] - 2 * phi[1:-1] + phi[:-2]) / g.h ** 2
        out[1:-1] = lap + self.K[1:-1] * phi[1:-1]
        if self.kind is OperatorKind.MEANFIELD:
            a0, a1 = self._averages(phi)
            out[1:-1] -= self.K0[1:-1] * a0 + self.K1[1:-1] * a1
        return out

    def solve(self, rhs):
        """Dirichlet solve of  op(phi) = rhs  (finite-volume scaled rows)."""
        g = self.grid
        w = g.h * np.exp(2 * g.t)
        ab = _banded(w * self.K, g.h, g.n)
        b = w * np.asarray(rhs, dtype=float)
        b[0] = b[-1] = 0.0
        if self.kind is OperatorKind.LIOUVILLE:
            return solve_banded((1, 1), ab, b)
        # rank-2 correction: A phi - w K0 (a0) - w K1 (a1) = b, a_j = <c_j, phi>
        q = g.area_weights
        U = np.column_stack([w * self.K0, w * self.K1])
        U[0] = U[-1] = 0.0
        Cm = np.vstack([q * self.K0 / self.lambda0, q * self.K1 / self.lambda1_tau2])
        Z = solve_banded((1, 1), ab, np.column_stack([b, U]))
        S = np.eye(2) - Cm @ Z[:, 1:]
        a = np.linalg.solve(S, Cm @ Z[:, 0])
        return Z[:, 0] + Z[:, 1:] @ a


def assemble_linear_operator(table: CascadeTable, grid: RadialGrid, kind="L_liouville"):
    kind = OperatorKind(kind)
    t = grid.t
    K0, K1 = np.zeros(grid.n), np.zeros(grid.n)
    for i, b in enumerate(table_bubbles(table), start=1):
        k = np.exp((b.alpha - 2) * t + eval_w_t(b, t))
        if i % 2:
            K0 += k
        else:
            K1 += k
    return DiscreteOperator(kind, grid, K0, K1, table.lambda0, table.lambda1 * table.tau ** 2)


def kernel_scaled_residual(table: CascadeTable, j, n_nodes, p=1.1):
    """Norm of L applied to Z_0j over annulus j, and its deviation from the exact value.

    Returns (raw, excess): raw is the discrete L Z_0j; the exact L Z_0j equals
    the cross-bubble terms sum_{i != j} |x|^{a_i-2} e^{w_i} Z_0j, and excess is
    the norm of the difference (pure discretization error).
    """
    grid = grid_for_table(table, n_nodes)
    op = assemble_linear_operator(table, grid, "L_liouville")
    b = table_bubbles(table)[j]
    t, h = grid.t, grid.h
    s = b.alpha * (t - b.log_delta)
    Z = -np.tanh(0.5 * s)
    # second differences of Z - 1 below delta_j and Z + 1 above it: same
    # values, without cancellation against the plateaus
    lo = -2.0 / (1.0 + np.exp(-s))
    hi = 2.0 / (1.0 + np.exp(s))
    shifted = np.where((t[1:-1] < b.log_delta)[:, None],
                       np.stack([lo[:-2], lo[1:-1], lo[2:]], axis=1),
                       np.stack([hi[:-2], hi[1:-1], hi[2:]], axis=1))
    d2 = (shifted[:, 2] - 2 * shifted[:, 1] + shifted[:, 0]) / h ** 2
    LZ = np.full(grid.n, np.nan)
    LZ[1:-1] = np.exp(-2 * t[1:-1]) * d2 + op.K[1:-1] * Z[1:-1]
    exact = (op.K - np.exp((b.alpha - 2) * t + eval_w_t(b, t))) * Z
    mask = AnnuliPartition.from_table(table).masks(grid)[j].copy()
    mask[0] = mask[-1] = False
    q = grid.area_weights
    raw = float(q[mask] @ np.abs(LZ[mask]) ** p) ** (1 / p)
    exc = float(q[mask] @ np.abs(LZ[mask] - exact[mask]) ** p) ** (1 / p)
    return raw, exc


# --- diagnostics ------------------------------------------------------------------------

@dataclass
class TrendReport:
    kind: str
    rhos: list
    log_rho_abs: list
    ratios: list
    growth_exponent: float
    fit_deviation: float

    @property
    def passed(self):
        return bool(self.growth_exponent <= 1.3)


def smooth_test_function(seed, n_modes=5):
    """Seeded smooth radial function on the unit disk."""
    rng = np.random.default_rng(seed)
    coef = rng.normal(size=n_modes)
    k = np.arange(1, n_modes + 1)
    return lambda r: np.cos(np.pi * np.outer(np.asarray(r), k)) @ coef


def inverse_norm_ratio(table: CascadeTable, kind, h_fun, n_nodes=DEFAULT_NODES, p=1.1):
    grid = grid_for_table(table, n_nodes)
    op = assemble_linear_operator(table, grid, kind)
    hv = h_fun(grid.r)
    phi = op.solve(hv)
    if not np.all(np.isfinite(phi)):
        raise LinAlgError("singular discrete operator")
    h1 = math.sqrt(2 * math.pi * float(grid.trapezoid @ np.gradient(phi, grid.t) ** 2))
    hp = float(grid.area_weights @ np.abs(hv) ** p) ** (1 / p)
    return h1 / hp if hp > 0 else 0.0


def inverse_norm_trend(tables, kind="L_liouville", seed=0, n_nodes=DEFAULT_NODES, p=1.1):
    if len(tables) < 4:
        raise ValueError("need at least 4 rho values")
    h_fun = smooth_test_function(seed)
    tables = sorted(tables, key=lambda tb: -tb.config.rho)
    rhos = [tb.config.rho for tb in tables]
    ratios = [inverse_norm_ratio(tb, kind, h_fun, n_nodes, p) for tb in tables]
    L = [abs(math.log(r)) for r in rhos]
    g, _, dev = fit_loglog(L, ratios)
    return TrendReport(OperatorKind(kind).value, rhos, L, ratios, g, dev)


def check_farfield(u: RadialField, table: CascadeTable, window=DEFAULT_WINDOW):
    """Fit u ~ c log r on the window; returns (c, relative error vs the predicted c)."""
    lo, hi = window
    if not (0 < lo < hi):
        raise ValueError("bad window")
    r_in, r_out = math.exp(u.grid.t[0]), math.exp(u.grid.t[-1])
    if lo <= r_in or hi >= r_out:
        raise ValueError("window must lie strictly inside the domain")
    hits = [d for d in table.delta if lo <= d <= hi]
    if hits:
        raise ValueError(f"window [{lo}, {hi}] contains concentration scale(s) {hits}")
    r = u.grid.r
    sel = (r >= lo) & (r <= hi)
    lr = u.grid.t[sel]
    c = float(np.dot(u.values[sel], lr) / np.dot(lr, lr))
    pred = table.farfield_coefficient
    return c, abs(c - pred) / abs(pred)


@dataclass
class NodalReport:
    radii: list
    count_ok: bool
    placement_ok: bool

    @property
    def ok(self):
        return self.count_ok and self.placement_ok


def nodal_analysis(u: RadialField, table: CascadeTable) -> NodalReport:
    v = u.values[1:-1]
    t = u.grid.t[1:-1]
    s = np.sign(v)
    nz = np.nonzero(s)[0]
    radii = []
    for a, b in zip(nz[:-1], nz[1:]):
        if s[a] != s[b]:
            # linear interpolation in r between the straddling nodes
            ra, rb = math.exp(t[a]), math.exp(t[b])
            radii.append(float(ra + (rb - ra) * v[a] / (v[a] - v[b])))
    m = table.m
    count_ok = len(radii) == m - 1
    d = table.delta
    placement_ok = count_ok and all(d[j] < radii[j] < d[j + 1] for j in range(m - 1))
    return NodalReport(radii, count_ok, placement_ok)
