"""Sign-changing bubble towers for sinh-Poisson type equations on a pierced disk."""

from .cascade import (CascadeTable, ConfigError, EpsilonUnderflow, TowerConfig, build_table,
                      identity_suite, validate_alpha1)
from .bubbles import Bubble, KernelElement, eval_kernel, eval_w, oracle_integrals
from .ansatz import AnnuliPartition, RadialField, RadialGrid, assemble_tower, grid_for_table
from .residual import lp_norm_on_annuli, residual_liouville, residual_meanfield, sweep_and_fit
from .solver import (SolveOptions, SolveReport, assemble_linear_operator, check_farfield,
                     inverse_norm_trend, newton_solve_liouville, newton_solve_meanfield,
                     nodal_analysis)

__version__ = "0.1.0"
