"""Jacobi spectral Galerkin and collocation solvers for pseudo-parabolic problems on (-1, 1)."""
from .expr import diff, evaluate, parse, substitute
from .forms import (
    BoundaryBasis,
    DiffMatrix,
    FormMatrices,
    apply_B,
    assemble_A,
    assemble_A_N,
    diff_matrix,
    project_A,
    weighted_grad,
)
from .jacobi import JacobiBasis, QuadratureRule, gauss_lobatto, jacobi_deriv, jacobi_eval
from .solver import (
    ProblemSpec,
    SolveConfig,
    Trajectory,
    collocation_initial,
    collocation_rhs,
    galerkin_initial,
    galerkin_rhs,
    integrate,
)
from .spaces import (
    BoundaryField,
    SpectralField,
    inner_N,
    inner_w,
    interpolate,
    norm_sobolev,
    project_H10,
    project_L2,
    quadrature_gap,
)
from .study import ConvergenceReport, StudyConfig, fit_rate, manufacture_forcing, run_study

__version__ = "0.1.0"
