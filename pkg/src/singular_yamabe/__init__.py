"""Numerical singular Yamabe solutions on a half-cylinder.

The construction starts from a periodic radial profile, corrects a decaying
kernel perturbation order by order into an approximate solution, and closes
the gap with a contraction iteration for the exact solution.
"""

__version__ = "0.1.0"

from .approx import ApproxSolution, KernelSeed, build, solve_correction, taylor_coeff
from .estimator import SingularYamabeSolver
from .exceptions import (AdmissibilityError, OutputError, SolverError, ValidationError,
                         YamabeError)
from .fields import CylinderField, FieldGrid, decay_rate, weighted_norm
from .floquet import ModeSystem, indicial_root, mode_system, monodromy
from .index_set import IndexSet, check_mu, generate, generate_bfs
from .linear import LinearSolver, apply_L, invert
from .nonlinear import N, P, Q, ContractionConfig, SolveReport, iterate, verify
from .radial import (PeriodicSolution, RadialParams, constant_solution, hamiltonian,
                     solve_periodic)
from .sphere import build_basis, eigenvalue, multiplicity

__all__ = [
    "ApproxSolution", "KernelSeed", "build", "solve_correction", "taylor_coeff",
    "SingularYamabeSolver",
    "AdmissibilityError", "OutputError", "SolverError", "ValidationError", "YamabeError",
    "CylinderField", "FieldGrid", "decay_rate", "weighted_norm",
    "ModeSystem", "indicial_root", "mode_system", "monodromy",
    "IndexSet", "check_mu", "generate", "generate_bfs",
    "LinearSolver", "apply_L", "invert",
    "N", "P", "Q", "ContractionConfig", "SolveReport", "iterate", "verify",
    "PeriodicSolution", "RadialParams", "constant_solution", "hamiltonian", "solve_periodic",
    "build_basis", "eigenvalue", "multiplicity",
]
