"""Recovery of optimal trajectories from moments of occupation measures.

Moments in, atoms out: each (time, coordinate) marginal is fitted by a
nonnegative combination of grid atoms through a min-max linear program, the
atoms become way-points, and the assembled process hot-starts a local
shooting method whose cost can certify global optimality against a moment
relaxation bound.
"""
from .lp import LpSolution, LpStandardForm, solve_ipm, solve_simplex_reference
from .momentfile import load_moments, save_moments
from .moments import AffineMap, Box, MomentVector, enumerate_indices, monomial_matrix, rescale_moments
from .oracle import OcpProblem, SampledProcess, check_adjoint_identity, invariant_moments, occupation_moments
from .polynomial import Polynomial
from .reconstruct import (
    AtomicMeasure,
    CoordinateSeries,
    assemble_process,
    build_grid,
    extract_support,
    fit_atomic,
    polynomial_density_baseline,
    reconstruct_coordinate,
)
from .refine import ControlParameterization, certify_global, local_optimize, simulate

__version__ = "0.1.0"
