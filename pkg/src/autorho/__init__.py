"""Penalized B-spline smoothing with an automatic search interval for the smoothing parameter."""

__version__ = "0.1.0"

from .bandla import (BandMatrix, LowerBandMatrix, btb, cholesky_band, dense_sym_eigenvalues,
                     frobenius_sq, solve_lower_band, solve_upper_band)
from .basis import (KnotVector, design_matrix, equidistant_knots, eval_row, quantile_knots,
                    random_knots, xs_between_knots)
from .eigext import (EigenSummary, TrapezoidFactor, all_eigenvalues, build_E, eigen_summary,
                     max_eigen, mean_eigen, min_eigen)
from .errors import *  # noqa: F401,F403
from .gridsearch import CriterionCurve, boundary_warning, evaluate, make_grid, select_optimum
from .interval import (ApproxSpectrum, SearchInterval, approx_spectrum, auto_interval,
                       exact_interval, heuristic_upper_bound, newton_root, redf, wide_interval)
from .penalty import (PenaltyFactor, derivative_factor, derivative_gram, general_diff,
                      make_penalty, standard_diff)
from .pls import PlsFit, PlsProblem, gcv_of, new_problem, pls_objective, reml_of, solve_at
