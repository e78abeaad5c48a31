"""Bounded right inverse of the linearized operator on a half-cylinder.

Modes whose indicial root lies below the weight ``mu`` are inverted by the
Wronskian (variation of parameters) formulas with integrals running to
infinity; all other modes solve a decaying two-point boundary value problem
with zero data at ``t0``. All work is done on the weighted unknown
``e^(mu t) w`` so that no quantity under- or overflows along the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import LinAlgError, solve_banded
from scipy.signal import lfilter
from scipy.special import roots_legendre

from ._validation import check_mu_value
from .exceptions import (DiscretizationError, ExtendTruncationError, IndexConflictError,
                         TailTruncationError, WrongBranchError)
from .fields import CylinderField, FieldGrid, fd_weights, derivative
from .floquet import ModeSystem, mode_systems
from .index_set import IndexSet, check_mu
from .radial import PeriodicSolution, potential
from .sphere import SphereBasis

TRUNCATION_BUDGET = math.exp(-12.0) * (1.0 + 1e-9)
_GL_X, _GL_W = roots_legendre(16)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@lru_cache(maxsize=256)
def _exp_weights(offsets: tuple, sigma_h: float) -> np.ndarray:
    """Weights ``w_j`` with ``int_0^1 e^(-sigma_h x) g(x) dx ~ sum w_j g(offsets_j)``.

    Exact for ``g`` polynomial of degree ``len(offsets) - 1`` up to the
    (16-point Gauss-Legendre) quadrature of the smooth weight.
    """
    s = np.asarray(offsets, dtype=float)
    k = len(s)
    V = np.vander(s, k, increasing=True)  # V[j, m] = s_j^m
    moments = np.array([np.sum(_GL_W * np.exp(-sigma_h * _GL_X) * _GL_X**m) for m in range(k)])
    return np.linalg.solve(V.T, moments)


def segment_integrals(g: np.ndarray, sigma: float, h: float) -> np.ndarray:
    """``u_k = int_{t_k}^{t_{k+1}} e^(-sigma (s - t_k)) g(s) ds`` for ``k = 0..N-2``.

    Sixth-order Lagrange interpolation of ``g`` on six neighbouring nodes
    (shifted one-sided near the ends).
    """
    g = np.asarray(g, dtype=float)
    N = g.shape[-1]
    sh = float(sigma * h)
    u = np.zeros(g.shape[:-1] + (N - 1,))
    off = (-2, -1, 0, 1, 2, 3)
    w = _exp_weights(off, sh)
    for o, wj in zip(off, w):
        u[..., 2:N - 3] += wj * g[..., 2 + o:N - 3 + o]
    for k in (0, 1, N - 3, N - 2):
        start = min(max(k - 2, 0), N - 6)
        offk = tuple(range(start - k, start - k + 6))
        wk = _exp_weights(offk, sh)
        u[..., k] = sum(wi * g[..., k + o] for o, wi in zip(offk, wk))
    return h * u


def tail_integral(g: np.ndarray, sigma: float, grid: FieldGrid, tail_decay: float = 0.0):
    """``J[g](t) = int_t^inf e^(-sigma (s - t)) g(s) ds`` on the grid.

    Beyond the grid end, ``g`` is continued from its last period as
    ``g(s + P) = e^(-tail_decay P) g(s)`` and summed geometrically, which is
    exact for (periodic) x (exponential) data and linear in ``g``.

    Raises
    ------
    TailTruncationError
        If ``sigma + tail_decay <= 0`` (the continued integral diverges).
    """
    if not sigma + tail_decay > 0:
        raise TailTruncationError(f"tail integral diverges (sigma={sigma}, decay={tail_decay})",
                                  sigma=sigma, tail_decay=tail_decay)
    h = grid.h
    P = grid.period
    M = grid.steps_per_period
    N = grid.size
    u = segment_integrals(g, sigma, h)
    # integral over the last period, weighted from its left end
    k0 = N - 1 - M
    damp = np.exp(-sigma * h * np.arange(M))
    Y = u[..., k0:N - 1] @ damp
    tail = math.exp(-tail_decay * P) * Y / (-math.expm1(-(sigma + tail_decay) * P))
    e = math.exp(-sigma * h)
    seq = np.concatenate([np.asarray(tail)[..., None], u[..., ::-1]], axis=-1)
    out = lfilter([1.0], [1.0, -e], seq, axis=-1)
    return out[..., ::-1]


def _on_grid(ms: ModeSystem, grid: FieldGrid):
    return grid.periodic(ms.p_plus, ms.grid), grid.periodic(ms.p_minus, ms.grid)


def low_mode_weighted(ms: ModeSystem, F: np.ndarray, mu: float, grid: FieldGrid,
                      tail_decay: float = 0.0) -> np.ndarray:
    """Weighted solution ``e^(mu t) w`` of ``L_i w = f`` given ``F = e^(mu t) f``.

    Implements ``w = psi^+ int_t^inf psi^- f / W - psi^- int_t^inf psi^+ f / W``
    and, for the nonconstant mode 0, the additional term
    ``+ a p^+ int_t^inf int_s^inf p^+ f / W`` coming from the linearly growing
    companion ``a t p^+ + p^-``.
    """
    if not ms.rho < mu:
        raise WrongBranchError(f"rho={ms.rho} >= mu={mu}: use the boundary-value branch",
                               rho=ms.rho, mu=mu)
    W = ms.wronskian
    if ms.kind == "constant":
        pp = pm = 1.0
    else:
        pp, pm = _on_grid(ms, grid)
    A = tail_integral(pm * F / W, mu - ms.rho, grid, tail_decay)
    B = tail_integral(pp * F / W, mu + ms.rho, grid, tail_decay)
    out = pp * A - pm * B
    if ms.kind == "mode0":
        C = tail_integral(B, mu, grid, tail_decay)
        out = out + ms.a * pp * C
    return out


def solve_mode_low(ms: ModeSystem, f_i, mu: float, grid: FieldGrid,
                   tail_decay: float = 0.0) -> np.ndarray:
    """Decaying solution of ``L_i w = f_i`` for a mode with ``rho_i < mu``.

    Parameters
    ----------
    ms : ModeSystem
    f_i : array_like or callable
        Right-hand side on ``grid.t`` (or a function of ``t``).
    mu : float
        Weight; ``sup e^(mu t)|f_i|`` must be finite.
    grid : FieldGrid

    Returns
    -------
    numpy.ndarray
        ``w_i`` on ``grid.t``.
    """
    t = grid.t
    f = f_i(t) if callable(f_i) else np.asarray(f_i, dtype=float)
    F = np.exp(mu * t) * f
    return np.exp(-mu * t) * low_mode_weighted(ms, F, mu, grid, tail_decay)


def _banded_operator(q: np.ndarray, grid: FieldGrid, mu: float) -> np.ndarray:
    """Banded form of ``e^(mu t) (d^2/dt^2 + q) e^(-mu t)`` with Dirichlet end rows."""
    N = grid.size
    h = grid.h
    ab = np.zeros((9, N))
    u = 4
    # boundary rows on the scale of the stencil rows keep the pivoting benign
    ab[u, 0] = 1.0 / h**2
    ab[u, N - 1] = 1.0 / h**2

    def put(rows, offsets, weights):
        rows = np.atleast_1d(rows)
        for o, w in zip(offsets, weights):
            cols = rows + o
            ab[u + rows - cols, cols] += w / h**2 * math.exp(-mu * o * h)

    central = (-2, -1, 0, 1, 2)
    put(np.arange(2, N - 2), central, fd_weights(central, 2))
    put(1, tuple(range(-1, 5)), fd_weights(tuple(range(-1, 5)), 2))
    put(N - 2, tuple(range(-4, 2)), fd_weights(tuple(range(-4, 2)), 2))
    ab[u, 1:N - 1] += q[1:N - 1]
    return ab


def solve_mode_high(ms: ModeSystem, f_i, grid: FieldGrid, mu: float = 0.0,
                    budget: float = TRUNCATION_BUDGET) -> np.ndarray:
    """Two-point problem ``L_i w = f_i``, ``w(t0) = w(T) = 0`` for ``rho_i > mu``.

    Fourth-order differences, solved as a banded system in the weighted
    unknown ``e^(mu t) w`` (rows scaled by ``e^(mu t)``).

    Raises
    ------
    ExtendTruncationError
        If ``T - t0 < 4`` or ``exp(-(rho - mu)(T - t0))`` exceeds ``budget``.
    DiscretizationError
        If the banded system is singular.
    """
    span = grid.T - grid.t0
    if span < 4.0:
        raise ExtendTruncationError(f"truncation length {span:.3g} < 4", span=span)
    gap = ms.rho - mu
    if gap > 0 and math.exp(-gap * span) > budget:
        raise ExtendTruncationError(
            f"boundary truncation estimate {math.exp(-gap * span):.3g} exceeds {budget:.3g}; "
            f"extend the grid beyond T={grid.T:.6g}", rho=ms.rho, mu=mu, span=span)
    t = grid.t
    f = f_i(t) if callable(f_i) else np.asarray(f_i, dtype=float)
    q = grid.periodic(ms.q, ms.grid)
    ab = _banded_operator(q, grid, mu)
    F = np.exp(mu * t) * f
    F[0] = 0.0
    F[-1] = 0.0
    try:
        what = solve_banded((4, 4), ab, F)
    except (LinAlgError, ValueError) as exc:
        raise DiscretizationError(f"banded solve failed for degree {ms.degree}: {exc}") from exc
    if not np.all(np.isfinite(what)):
        raise DiscretizationError(f"non-finite solution in degree {ms.degree}")
    # pivoting leaves rounding in the imposed rows
    what[0] = 0.0
    what[-1] = 0.0
    return np.exp(-mu * t) * what


def truncation_span(roots: dict[int, float], mu: float, minimum: float = 20.0,
                    factor: float = 12.0) -> float:
    """``max(minimum, factor / sigma_min)`` with ``sigma_min = min |mu - rho_i|``."""
    gaps = [abs(mu - r) for r in roots.values()] + [mu]
    if min(gaps) == 0.0:
        raise IndexConflictError(f"mu={mu} coincides with an indicial root", mu=mu)
    return max(minimum, factor / min(gaps))


@dataclass
class LinearSolver:
    """Linearized operator and its bounded inverse on a fixed grid.

    Parameters
    ----------
    psi : PeriodicSolution
    basis : SphereBasis
    grid : FieldGrid
    mu : float
        Weight (decay order); must exceed 1 and avoid every indicial root.
    systems : dict, optional
        Mode systems by degree; computed when omitted.
    index : IndexSet, optional
        If given, ``mu`` is also checked against the full index set.
    tol_admit : float
    tail_decay : float
        Extra decay assumed when continuing data beyond the grid end.
    budget : float
        Boundary-truncation budget of the boundary-value branch.
    """

    psi: PeriodicSolution
    basis: SphereBasis
    grid: FieldGrid
    mu: float
    systems: dict | None = None
    index: IndexSet | None = None
    tol_admit: float = 1e-3
    tail_decay: float = 0.0
    budget: float = TRUNCATION_BUDGET
    branches: dict = field(default_factory=dict, init=False)

    def __post_init__(self):
        self.mu = check_mu_value(self.mu)
        D = self.basis.max_degree
        if self.systems is None:
            self.systems = mode_systems(self.psi, D)
        missing = [k for k in range(D + 1) if k not in self.systems]
        if missing:
            raise ValueError(f"mode systems missing for degrees {missing}")
        if self.index is not None:
            res = check_mu(self.index, self.mu, self.tol_admit)
            if not res:
                raise IndexConflictError(f"mu={self.mu} is not admissible: {res.reason}",
                                         mu=self.mu, nearest=res.nearest, distance=res.distance)
        for k in range(D + 1):
            rho = self.systems[k].rho
            if abs(rho - self.mu) <= self.tol_admit:
                raise IndexConflictError(f"mu={self.mu} coincides with indicial root {rho} "
                                         f"of degree {k}", mu=self.mu, degree=k, rho=rho)
            self.branches[k] = "low" if rho < self.mu else "high"
        psi_t = self.psi.psi(self.grid.t)
        self._V = potential(self.psi.n, psi_t)
        self._shift = 0.25 * (self.psi.n - 2) ** 2

    @property
    def n(self) -> int:
        return self.psi.n

    def q(self, degree: int) -> np.ndarray:
        return self._V - self._shift - self.basis.eigenvalues[self.basis.modes_of_degree(degree)[0]]

    def apply(self, w: CylinderField) -> CylinderField:
        """``L w`` mode by mode with fourth-order differences in ``t``."""
        lam = self.basis.eigenvalues[:, None]
        c = w.coeffs
        out = derivative(c, w.grid.h, 2) + (self._V - self._shift)[None, :] * c - lam * c
        return CylinderField(w.grid, w.basis, out)

    def invert(self, f: CylinderField) -> CylinderField:
        """Bounded inverse: low modes by Wronskian integrals, others by boundary-value solves."""
        g = self.grid
        F = f.coeffs * np.exp(self.mu * g.t)[None, :]
        what = np.zeros_like(F)
        degrees = self.basis.degrees
        for k in np.unique(degrees):
            rows = np.flatnonzero(degrees == k)
            active = rows[np.any(F[rows] != 0.0, axis=1)]
            if not active.size:
                continue
            ms = self.systems[int(k)]
            if self.branches[int(k)] == "low":
                what[active] = low_mode_weighted(ms, F[active], self.mu, g, self.tail_decay)
            else:
                for r in active:
                    what[r] = np.exp(self.mu * g.t) * solve_mode_high(
                        ms, f.coeffs[r], g, self.mu, self.budget)
        return CylinderField(g, self.basis, what * np.exp(-self.mu * g.t)[None, :])

    def inverse_bound(self, f: CylinderField) -> float:
        """Measured ratio ``||L^-1 f||_mu / ||f||_mu`` for given data."""
        from .fields import weighted_norm

        den = weighted_norm(f, self.mu)
        return weighted_norm(self.invert(f), self.mu) / den if den > 0 else 0.0


def apply_L(field: CylinderField, psi: PeriodicSolution) -> CylinderField:
    """Linearization about ``psi`` applied to a field (fourth-order in ``t``)."""
    n = psi.n
    V = potential(n, psi.psi(field.grid.t)) - 0.25 * (n - 2) ** 2
    c = field.coeffs
    lam = field.basis.eigenvalues[:, None]
    out = derivative(c, field.grid.h, 2) + V[None, :] * c - lam * c
    return CylinderField(field.grid, field.basis, out)


def invert(f: CylinderField, psi: PeriodicSolution, mu: float, systems: dict | None = None,
           index: IndexSet | None = None, **kwargs) -> CylinderField:
    """Convenience wrapper building a :class:`LinearSolver` for one solve."""
    return LinearSolver(psi, f.basis, f.grid, mu, systems, index, **kwargs).invert(f)
