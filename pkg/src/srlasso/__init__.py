"""Square-root LASSO: solvers, uniqueness certificates and solution-map sensitivity."""

from .errors import (DualInfeasible, IllConditioned, Indeterminate, InRange,
                     IntermediateFails, InvalidConfig, NotConverged,
                     RankDeficient, SrLassoError, StrongFails, TooLarge,
                     ZeroResidual, Degenerate)
from .linalg import (ColumnSelection, SvdSummary, nullspace_projector,
                     pseudoinverse, range_test, smw_eigen_bound, smw_inverse,
                     svd_summary)
from .solvers import (PrimalDualPair, ProblemInstance, SolverSettings,
                      brute_force_oracle, dual_from_primal, duality_gap,
                      solve_lasso, solve_srlasso)

__version__ = "0.1.0"
