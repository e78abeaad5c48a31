"""Shared orchestration: profiles, root tables and index sets from plain settings."""

from __future__ import annotations

from .floquet import indicial_root, monodromy
from .index_set import IndexSet, generate
from .radial import PeriodicSolution, RadialParams, constant_solution, solve_periodic
from .sphere import eigenvalue

MAX_ROOT_DEGREE = 60


def make_profile(n: int, psi_min_ratio: float | None = None) -> PeriodicSolution:
    """Constant profile (``psi_min_ratio`` None or 1) or the Delaunay orbit with that ratio."""
    if psi_min_ratio is None:
        return solve_periodic(RadialParams(n))
    return solve_periodic(RadialParams.from_ratio(n, psi_min_ratio))


def roots_up_to(psi: PeriodicSolution, rho_max: float) -> dict[int, float]:
    """Indicial roots ``rho_k`` of degrees ``k >= 1`` up to the first one above ``rho_max``."""
    out = {}
    for k in range(1, MAX_ROOT_DEGREE + 1):
        out[k] = indicial_root(psi, eigenvalue(k, psi.n))
        if out[k] > rho_max:
            break
    return out


def index_for(psi: PeriodicSolution, mu_max: float) -> IndexSet:
    """Index set of all positive indicial roots up to ``mu_max``."""
    roots = [r for r in roots_up_to(psi, mu_max).values() if r <= mu_max]
    return generate(roots, mu_max)


def roots_table(psi: PeriodicSolution, max_degree: int) -> list[dict]:
    """Rows ``(degree, lambda, rho, |det M - 1|)`` for degrees ``1..max_degree``."""
    rows = []
    for k in range(1, max_degree + 1):
        lam = eigenvalue(k, psi.n)
        rho = indicial_root(psi, lam)
        det_err = 0.0 if psi.is_constant else abs(monodromy(psi, lam).det - 1.0)
        rows.append({"degree": k, "lambda": lam, "rho": rho, "det_error": det_err})
    return rows
