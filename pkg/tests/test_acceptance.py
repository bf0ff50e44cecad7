"""Acceptance criteria 1-10, one test each.

Every test records a PASS/FAIL line through the ``verdict`` fixture; the
lines are repeated in a summary section at the end of the pytest run.
"""

import math
import time

import numpy as np
import pytest

from bubbletower.ansatz import (assemble_tower, check_expansion_waje, grid_for_table,
                                projection_gaps)
from bubbletower.bubbles import check_kernel_ode, kernel_grid, oracle_integrals
from bubbletower.cascade import TowerConfig, build_table, identity_suite, validate_alpha1
from bubbletower.residual import sweep_and_fit
from bubbletower.solver import (inverse_norm_trend, kernel_scaled_residual,
                                newton_solve_liouville, newton_solve_meanfield)

REF = TowerConfig(m=2, tau=1.0, alpha1=2.5, rho=0.05)
PROJECTION_RHOS = (1e-1, 3e-2, 1e-2)
SWEEP = np.logspace(-3, -1, 7)
HALVINGS = (0.05, 0.025, 0.0125)
TREND_RHOS = (1e-1, 3e-2, 1e-2, 3e-3)
ALPHA_CANDIDATES = (2.2, 2.45, 2.7, 3.1, 3.35, 3.9, 4.3, 5.15, 5.7)


def _timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


def test_criterion_01_identities(verdict):
    def run():
        worst, n_cfg, short = 0.0, 0, []
        for m in (2, 3, 4, 5, 6):
            for tau in (0.5, 1.0, 1.7, 2.3):
                picks = [a for a in ALPHA_CANDIDATES if validate_alpha1(m, tau, a)[0]][:3]
                if len(picks) < 3:
                    short.append((m, tau))
                for a in picks:
                    rep = identity_suite(build_table(TowerConfig(m=m, tau=tau, alpha1=a, rho=0.1)))
                    worst = max(worst, rep.worst)
                    n_cfg += 1
        return worst, n_cfg, short

    (worst, n_cfg, short), dt = _timed(run)
    ok = worst <= 1e-10 and not short and n_cfg == 60 and dt < 5
    verdict(1, ok, f"{n_cfg} configs, worst rel error {worst:.1e}, {dt:.2f} s")


def test_criterion_02_oracles(verdict):
    def run():
        return {a: max(oracle_integrals(a).errors().values()) for a in (2.5, 4.0, 6.5, 9.0)}

    errs, dt = _timed(run)
    worst = max(errs.values())
    verdict(2, worst <= 1e-8 and dt < 2, f"worst error {worst:.1e}, {dt:.2f} s")


def test_criterion_03_projection(verdict):
    gaps, ratio = [], 0.0
    for rho in PROJECTION_RHOS:
        tb = build_table(REF.replace(rho=rho))
        pg = projection_gaps(tb, grid_for_table(tb))
        gaps.append(max(g for g, _ in pg))
        ratio = max(ratio, max(g / b for g, b in pg))
    mono = all(b < a for a, b in zip(gaps, gaps[1:]))
    verdict(3, mono and ratio <= 50,
            f"max gaps {', '.join(f'{g:.2e}' for g in gaps)}; worst gap/bound {ratio:.2f}")


def test_criterion_04_tower_expansion(verdict):
    dev, eta = [], None
    for rho in PROJECTION_RHOS:
        tb = build_table(REF.replace(rho=rho))
        eta = tb.eta
        dev.append(check_expansion_waje(tb, assemble_tower(tb, grid_for_table(tb)).U).per_annulus)
    dev = np.array(dev)
    mono = bool(np.all(dev[1:] < dev[:-1]))
    slopes = [np.polyfit(np.log(PROJECTION_RHOS), np.log(dev[:, j]), 1)[0]
              for j in range(dev.shape[1])]
    verdict(4, mono and min(slopes) >= eta / 2,
            f"decay exponents {', '.join(f'{s:.3f}' for s in slopes)} vs eta/2 = {eta / 2:.3f}")


def test_criterion_05_residual_scaling(verdict):
    parts, ok = [], True
    for kind in ("liouville", "meanfield"):
        rep, dt = _timed(lambda: sweep_and_fit(REF, SWEEP, 1.1, kind))
        good = (rep.slope > 0 and rep.max_log_deviation <= 0.5 and dt < 30
                and all(r.saturated == 0 for r in rep.reports))
        ok = ok and good
        parts.append(f"{kind} slope {rep.slope:.3f} dev {rep.max_log_deviation:.3f} ({dt:.1f} s)")
    verdict(5, ok, "; ".join(parts))


@pytest.fixture(scope="module")
def halving_runs():
    out = []
    for rho in HALVINGS:
        tb = build_table(REF.replace(rho=rho))
        (rep, u), dt = _timed(lambda: newton_solve_liouville(tb, grid_for_table(tb, 20001)))
        out.append((tb, rep, dt))
    return out


def test_criterion_06_liouville_solve(verdict, halving_runs):
    tb, rep, dt = halving_runs[0]
    sup = [r.phi_sup for _, r, _ in halving_runs]
    radii_ok = len(rep.nodal_radii) == 1 and tb.delta[0] < rep.nodal_radii[0] < tb.delta[1]
    ok = (rep.converged and rep.iterations <= 15 and rep.final_residual_sup <= 1e-9 and radii_ok
          and all(b < a for a, b in zip(sup, sup[1:]))
          and max(d for *_, d in halving_runs) < 10)
    verdict(6, ok, f"{rep.iterations} iterations, residual {rep.final_residual_sup:.1e}, "
                   f"nodal radius {rep.nodal_radii}, phi_sup {', '.join(f'{s:.2e}' for s in sup)}")


def test_criterion_07_farfield(verdict, halving_runs):
    tb, rep, _ = halving_runs[-1]
    ok = math.isfinite(rep.farfield_coeff) and rep.farfield_rel_err <= 0.10
    verdict(7, ok, f"c = {rep.farfield_coeff:.4f} vs {tb.farfield_coefficient:+.1f} "
                   f"(rel err {rep.farfield_rel_err:.3f}) at rho = {tb.config.rho}")


def test_criterion_08_meanfield_solve(verdict):
    tb = build_table(REF.replace(rho=0.01))
    assert tb.lambda0 == pytest.approx(10 * math.pi) and tb.lambda1 == pytest.approx(26 * math.pi)
    rep, _ = newton_solve_meanfield(tb, grid_for_table(tb, 20001))
    r0 = tb.lambda0 / rep.s0 / 0.01
    r1 = tb.lambda1 * tb.tau / rep.s1 / 0.01
    mass_ok = abs(r0 - 1) <= 0.2 and abs(r1 - 1) <= 0.2
    far_ok = math.isfinite(rep.farfield_coeff) and rep.farfield_rel_err <= 0.10
    ok = rep.converged and rep.final_residual_sup <= 1e-9 and mass_ok and rep.nodal_ok and far_ok
    verdict(8, ok, f"{rep.status} after {rep.iterations} iterations, residual "
                   f"{rep.final_residual_sup:.1e}; rho ratios {r0:.4f}, {r1:.4f}; "
                   f"nodal ok {rep.nodal_ok}; c = {rep.farfield_coeff:.3f}")


def test_criterion_09_linear_trend(verdict):
    tables = [build_table(REF.replace(rho=r)) for r in TREND_RHOS]
    parts, ok = [], True
    for kind in ("L_liouville", "L_meanfield"):
        a = inverse_norm_trend(tables, kind, n_nodes=20001)
        b = inverse_norm_trend(tables, kind, n_nodes=40001)
        # the growth exponent is only meaningful when the ratios are grid-resolved
        spread = max(abs(x / y - 1) for x, y in zip(a.ratios, b.ratios))
        good = a.passed and spread <= 0.05
        ok = ok and good
        parts.append(f"{kind} exponent {a.growth_exponent:.3f}, N vs 2N spread {spread:.1%}")
    verdict(9, ok, "; ".join(parts))


def test_criterion_10_kernels(verdict):
    parts, ok = [], True
    for alpha in (2.5, 6.5):
        e = [check_kernel_ode(alpha, kernel_grid(n)) for n in (1000, 2000, 4000)]
        r = (e[0] / e[1], e[1] / e[2])
        ok = ok and all(3.5 <= x <= 4.5 for x in r)
        parts.append(f"Y0 alpha={alpha} ratios {r[0]:.2f}, {r[1]:.2f}")
    tb = build_table(REF)
    for j in range(tb.m):
        raw = [kernel_scaled_residual(tb, j, n)[0] for n in (5001, 10001, 20001)]
        ok = ok and all(b < a for a, b in zip(raw, raw[1:]))
        parts.append(f"Z0_{j + 1} " + " > ".join(f"{x:.2e}" for x in raw))
    verdict(10, ok, "; ".join(parts))
