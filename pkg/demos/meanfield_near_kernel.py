"""Why the mean-field Newton stalls on the reference tower.

The difference Z0_1 - Z0_2 of the two radial kernel elements vanishes at
both ends of the disk and is nearly annihilated by the mean-field operator.
This script measures how small the operator makes it, how its inverse-norm
ratios jump with the grid, and what the bordered Newton solve reports.
"""

import numpy as np

from bubbletower import (TowerConfig, assemble_linear_operator, build_table, grid_for_table,
                         newton_solve_meanfield)
from bubbletower.solver import inverse_norm_ratio, smooth_test_function


def lp(grid, v, p=1.1):
    ok = np.isfinite(v)
    return float(grid.area_weights[ok] @ np.abs(v[ok]) ** p) ** (1 / p)


def main():
    cfg = TowerConfig(m=2, tau=1.0, alpha1=2.5, rho=0.01)
    tb = build_table(cfg)

    for n in (20001, 40001):
        g = grid_for_table(tb, n)
        psi = sum(-np.tanh(0.5 * a * (g.t - ld)) * (-1) ** j
                  for j, (a, ld) in enumerate(zip(tb.alpha, tb.log_delta)))
        for kind in ("L_liouville", "L_meanfield"):
            op = assemble_linear_operator(tb, g, kind)
            print(f"N = {n}  {kind:<12} ||op psi||_1.1 = {lp(g, op.apply(psi)):.3e}")
    print(f"psi at the two ends: {psi[0]:.1e}, {psi[-1]:.1e}\n")

    h = smooth_test_function(0)
    for kind in ("L_liouville", "L_meanfield"):
        r = [inverse_norm_ratio(tb, kind, h, n) for n in (20001, 40001)]
        print(f"{kind:<12} inverse-norm ratio N: {r[0]:.4g}   2N: {r[1]:.4g}")

    rep, _ = newton_solve_meanfield(tb)
    print(f"\nbordered Newton: {rep.status} after {rep.iterations} steps")
    print("residual history:", " ".join(f"{x:.2e}" for x in rep.residual_history))
    print(f"lambda0/(s0 rho) = {tb.lambda0 / rep.s0 / cfg.rho:.4f}, "
          f"lambda1 tau/(s1 rho) = {tb.lambda1 * tb.tau / rep.s1 / cfg.rho:.4f}")


if __name__ == "__main__":
    main()
