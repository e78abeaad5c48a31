"""Contraction iteration turning an approximate solution into an exact one.

The correction ``w`` solves ``L w = -N(v_hat) - P(w)`` on ``[t0, T]`` and is
found as the fixed point of ``T(w) = L^-1[-N(v_hat) - P(w)]``. Residuals are
assembled from pieces that are individually small (``N(v_hat)``, ``L w`` and
``P(w)``) so that weighted norms stay meaningful far out on the cylinder.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import roots_legendre

from ._validation import check_int, check_mu_value, check_real
from .approx import ApproxSolution, default_window, power_tail
from .exceptions import (BallEscapeError, InvalidParameterError, NoContractionError,
                         PositivityViolationError, SolverError)
from .fields import CylinderField, FieldGrid, decay_rate, derivative, weighted_norm
from .linear import LinearSolver, truncation_span
from .radial import exponent

GAUSS_NODES = 12


def _coefficients(n: int) -> tuple[float, float, float, float]:
    p = exponent(n)
    return p, 4.0 / (n - 2), 0.25 * n * (n - 2), 0.25 * n * (n + 2)


def N(v: CylinderField, n: int | None = None) -> CylinderField:
    """Yamabe operator ``v_tt + Delta v - (n-2)^2/4 v + n(n-2)/4 v^p`` on a field.

    Second ``t``-derivatives are fourth-order differences, the Laplacian is
    exact on the harmonic expansion and the power is taken on quadrature nodes
    and projected back.

    Raises
    ------
    PositivityViolationError
        If ``v <= 0`` at some node.
    """
    n = v.basis.n if n is None else n
    p, _, c, _ = _coefficients(n)
    nodal = v.nodal()
    if np.any(nodal <= 0.0):
        raise PositivityViolationError("field is not positive on the grid",
                                       minimum=float(np.min(nodal)))
    power = v.basis.analyze(c * np.exp(p * np.log(nodal))).T
    lam = v.basis.eigenvalues[:, None]
    out = derivative(v.coeffs, v.grid.h, 2) - (lam + 0.25 * (n - 2) ** 2) * v.coeffs + power
    return CylinderField(v.grid, v.basis, out)


@dataclass(frozen=True)
class Background:
    """Nodal data of ``v_hat = psi + phi`` needed by ``P`` and ``Q``."""

    n: int
    psi: np.ndarray
    phi: np.ndarray

    @classmethod
    def from_approx(cls, v_hat: ApproxSolution, grid: FieldGrid) -> "Background":
        psi = v_hat.psi_values(grid)[:, None]
        phi = v_hat.phi_coeffs(grid).T @ v_hat.basis.values if len(v_hat.phi) else \
            np.zeros((grid.size, len(v_hat.basis.quadrature)))
        return cls(v_hat.n, psi, phi)

    @property
    def v_hat(self) -> np.ndarray:
        return self.psi + self.phi


def _ratio_power_diff(psi, x, q):
    """``(psi + x)^q - psi^q`` for positive ``psi + x``."""
    s = x / psi
    if np.any(s <= -1.0):
        raise PositivityViolationError("v_hat + w is not positive on the grid",
                                       minimum=float(np.min(psi + x)))
    return psi**q * np.expm1(q * np.log1p(s))


def P_nodal(w: np.ndarray, bg: Background) -> np.ndarray:
    """``P(w) = c[(v_hat+w)^p - v_hat^p] - n(n+2)/4 psi^q w`` at the nodes.

    Evaluated as ``c v_hat^p R(w/v_hat) + n(n+2)/4 (v_hat^q - psi^q) w`` with
    ``R(s) = (1+s)^p - 1 - p s`` so that nothing of size ``O(1)`` cancels.
    """
    p, q, c, d = _coefficients(bg.n)
    vh = bg.v_hat
    if np.any(vh <= 0.0):
        raise PositivityViolationError("v_hat is not positive on the grid",
                                       minimum=float(np.min(vh)))
    return c * vh**p * power_tail(w / vh, p, 2) + d * _ratio_power_diff(bg.psi, bg.phi, q) * w


def Q_nodal(w: np.ndarray, bg: Background, nodes: int = GAUSS_NODES) -> np.ndarray:
    """``Q(w) = n(n+2)/4 int_0^1 [(v_hat + s w)^q - psi^q] ds`` by Gauss-Legendre in ``s``."""
    _, q, _, d = _coefficients(bg.n)
    x, wt = roots_legendre(nodes)
    out = np.zeros(np.broadcast(w, bg.phi).shape)
    for xi, wi in zip(0.5 * (x + 1.0), 0.5 * wt):
        out += wi * _ratio_power_diff(bg.psi, bg.phi + xi * w, q)
    return d * out


def P(w: CylinderField, v_hat: ApproxSolution) -> CylinderField:
    """Nonlinear remainder ``P(w)`` projected on the basis."""
    bg = Background.from_approx(v_hat, w.grid)
    return CylinderField.from_nodal(w.grid, w.basis, P_nodal(w.nodal(), bg))


def Q(w: CylinderField, v_hat: ApproxSolution) -> CylinderField:
    """Factor ``Q(w)`` with ``P(w) = w Q(w)``, projected on the basis."""
    bg = Background.from_approx(v_hat, w.grid)
    return CylinderField.from_nodal(w.grid, w.basis, Q_nodal(w.nodal(), bg))


@dataclass
class ContractionConfig:
    """Settings of the contraction iteration.

    Parameters
    ----------
    mu : float
        Weight of the norm; must exceed 1 and be admissible.
    t0 : float
        Left end of the half-cylinder.
    ball_radius : float, optional
        Radius ``B`` of the ball in ``C^0_mu``; by default twice the norm of
        the first iterate ``L^-1 N(v_hat)``.
    max_iters : int
    convergence_tol : float
        Stop once an update is below ``convergence_tol * B``.
    warmup : int
        Iterations excluded from the contraction-factor estimate.
    escalation_attempts : int
        Further attempts with a larger ``t0`` after a failure.
    t_base : float
        Reference point of the escalation rule.
    t_step : float
        Field grid step.
    tol_admit : float
    """

    mu: float
    t0: float = 8.0
    ball_radius: float | None = None
    max_iters: int = 60
    convergence_tol: float = 1e-10
    warmup: int = 2
    escalation_attempts: int = 4
    t_base: float = 0.0
    t_step: float = 0.005

    def __post_init__(self):
        self.mu = check_mu_value(self.mu)
        self.t0 = check_real(self.t0, "t0")
        if self.ball_radius is not None:
            self.ball_radius = check_real(self.ball_radius, "ball_radius", positive=True)
        self.max_iters = check_int(self.max_iters, "max_iters", minimum=1)
        self.convergence_tol = check_real(self.convergence_tol, "convergence_tol", positive=True)
        self.warmup = check_int(self.warmup, "warmup", minimum=0)
        self.escalation_attempts = check_int(self.escalation_attempts, "escalation_attempts",
                                             minimum=0)
        self.t_step = check_real(self.t_step, "t_step", positive=True)
        if self.t0 < self.t_base:
            raise InvalidParameterError("t0 must not lie below t_base", t0=self.t0,
                                        t_base=self.t_base)

    def next_t0(self, t0: float) -> float:
        """Enlarged left end: the offset from ``t_base`` grows by 1.5 (at least by 2)."""
        off = t0 - self.t_base
        return self.t_base + max(1.5 * off, off + 2.0)


@dataclass
class SolveReport:
    """Outcome of a contraction run.

    Attributes
    ----------
    iterates : list of dict
        Per iteration: ``norm`` of ``w_k``, ``update`` norm and ``ratio`` of
        successive updates (all in ``C^0_mu``).
    contraction_factor : float
        Largest update ratio after warm-up (0 when fewer updates exist).
    initial_residual, final_residual : float
        ``C^0_mu`` norms of ``N(v_hat)`` and ``N(v)``.
    verified_mu : float
        Fitted decay rate of ``sup |v - v_hat|``; ``inf`` if at the floor.
    C_prime : float
        ``sup e^(mu t) |v - v_hat|``.
    """

    mu: float
    t0: float
    ball_radius: float
    iterates: list = field(default_factory=list)
    contraction_factor: float = 0.0
    initial_residual: float = 0.0
    final_residual: float = 0.0
    fixed_point_gap: float = 0.0
    converged: bool = False
    verified_mu: float = math.nan
    C_prime: float = math.nan
    grid: dict = field(default_factory=dict)
    attempts: list = field(default_factory=list)

    @property
    def n_iter(self) -> int:
        return len(self.iterates)

    @property
    def reduction(self) -> float:
        if self.final_residual == 0.0:
            return math.inf
        return self.initial_residual / self.final_residual

    def to_dict(self) -> dict:
        out = asdict(self)
        out["n_iter"] = self.n_iter
        out["reduction"] = self.reduction
        return out


@dataclass
class Solution:
    """Exact solution ``v = v_hat + w`` on a field grid."""

    v_hat: ApproxSolution
    w: CylinderField
    report: SolveReport

    @property
    def grid(self) -> FieldGrid:
        return self.w.grid

    def field(self) -> CylinderField:
        return self.v_hat.field(self.grid) + self.w

    def nodal(self) -> np.ndarray:
        return self.field().nodal()

    def difference(self) -> CylinderField:
        """``v - v_hat`` without cancellation."""
        return self.w


def solve_grid(v_hat: ApproxSolution, mu: float, t0: float, t_step: float = 0.005) -> FieldGrid:
    """Field grid on ``[t0, T_trunc]`` for the weight ``mu``."""
    roots = {k: ms.rho for k, ms in v_hat.systems.items()}
    span = truncation_span(roots, mu)
    return FieldGrid.build(t0, v_hat.psi.nominal_period, span, t_step)


def _attempt(v_hat: ApproxSolution, cfg: ContractionConfig, t0: float):
    mu = cfg.mu
    grid = solve_grid(v_hat, mu, t0, cfg.t_step)
    lin = LinearSolver(v_hat.psi, v_hat.basis, grid, mu, v_hat.systems)
    bg = Background.from_approx(v_hat, grid)
    if np.any(bg.v_hat <= 0.0):
        raise PositivityViolationError("v_hat is not positive on the grid", t0=t0,
                                       minimum=float(np.min(bg.v_hat)))
    resid = v_hat.residual(grid)
    basis = v_hat.basis

    def T(w: CylinderField) -> CylinderField:
        pw = CylinderField.from_nodal(grid, basis, P_nodal(w.nodal(), bg))
        return lin.invert(-(resid + pw))

    w = CylinderField.zeros(grid, basis)
    report = SolveReport(mu, t0, 0.0, grid={"t0": t0, "T": grid.T, "h": grid.h,
                                            "size": grid.size, "modes": len(basis)})
    report.initial_residual = weighted_norm(resid, mu)
    B = cfg.ball_radius
    prev_update = None
    for k in range(cfg.max_iters):
        new = T(w)
        update = weighted_norm(new - w, mu)
        norm = weighted_norm(new, mu)
        if B is None:
            B = 2.0 * norm
            report.ball_radius = B
        elif not report.ball_radius:
            report.ball_radius = B
        ratio = update / prev_update if prev_update else math.nan
        report.iterates.append({"iter": k + 1, "norm": norm, "update": update, "ratio": ratio})
        w = new
        if norm > B * (1.0 + 1e-12) and B > 0:
            raise BallEscapeError(f"iterate left the ball: ||w||={norm:.3e} > B={B:.3e}",
                                  t0=t0, iteration=k + 1, norm=norm, B=B)
        if k >= cfg.warmup and prev_update and ratio >= 1.0:
            raise NoContractionError(f"update ratio {ratio:.3g} >= 1 after warm-up", t0=t0,
                                     iteration=k + 1, ratio=ratio)
        if update <= cfg.convergence_tol * B or B == 0.0:
            report.converged = True
            break
        prev_update = update
    ratios = [it["ratio"] for it in report.iterates[cfg.warmup:] if np.isfinite(it["ratio"])]
    report.contraction_factor = max(ratios, default=0.0)
    if not report.converged:
        raise NoContractionError(f"no convergence in {cfg.max_iters} iterations", t0=t0,
                                 last_update=report.iterates[-1]["update"])
    # N(v_hat + w) = N(v_hat) + L w + P(w), each term small
    pw = CylinderField.from_nodal(grid, basis, P_nodal(w.nodal(), bg))
    final = resid + lin.apply(w) + pw
    report.final_residual = weighted_norm(final, mu)
    report.fixed_point_gap = weighted_norm(T(w) - w, mu)
    return Solution(v_hat, w, report)


def iterate(v_hat: ApproxSolution, cfg: ContractionConfig) -> tuple[Solution, SolveReport]:
    """Picard iteration ``w <- L^-1[-N(v_hat) - P(w)]`` from ``w = 0``.

    On ball escape, lack of contraction or loss of positivity the left end
    ``t0`` is enlarged by :meth:`ContractionConfig.next_t0`, up to
    ``escalation_attempts`` times.

    Returns
    -------
    solution : Solution
    report : SolveReport
        Includes ``verified_mu`` and ``C_prime`` over the default window.

    Raises
    ------
    BallEscapeError, NoContractionError, PositivityViolationError
        From the last attempt when all attempts fail.
    """
    t0 = cfg.t0
    attempts = []
    for a in range(cfg.escalation_attempts + 1):
        try:
            sol = _attempt(v_hat, cfg, t0)
        except (BallEscapeError, NoContractionError, PositivityViolationError) as exc:
            attempts.append({"t0": t0, "outcome": exc.kind, "message": str(exc)})
            if a == cfg.escalation_attempts:
                exc.details["attempts"] = attempts
                raise
            t0 = cfg.next_t0(t0)
            continue
        attempts.append({"t0": t0, "outcome": "converged"})
        rep = sol.report
        rep.attempts = attempts
        rep.verified_mu, rep.C_prime = verify(sol, v_hat, cfg.mu)
        return sol, rep
    raise SolverError("unreachable")  # pragma: no cover


def verify(v, v_hat=None, mu: float | None = None, window: tuple[float, float] | None = None):
    """Decay rate and constant of ``v - v_hat``.

    Parameters
    ----------
    v : Solution or CylinderField
        With a :class:`Solution` the stored correction is used directly;
        with a field, ``v_hat`` (field or :class:`ApproxSolution`) is
        subtracted.
    mu : float
        Weight for ``C' = sup e^(mu t) |v - v_hat|``.
    window : tuple, optional
        Fit window, ``[t0 + 2, t0 + 10]`` by default.

    Returns
    -------
    rate : float
        ``inf`` when the difference is at the floating-point floor.
    C_prime : float
    """
    if isinstance(v, Solution):
        diff = v.w
        period = v.v_hat.psi.nominal_period
        mu = v.report.mu if mu is None else mu
    else:
        if isinstance(v_hat, ApproxSolution):
            period = v_hat.psi.nominal_period
            v_hat = v_hat.field(v.grid)
        else:
            period = None
        diff = v - v_hat
    if mu is None:
        raise InvalidParameterError("mu is required")
    grid = diff.grid
    window = default_window(grid.t0) if window is None else window
    sup = diff.sup_theta()
    rate = decay_rate(grid.t, sup, window, period)
    C = float(np.max(np.exp(mu * grid.t) * sup))
    return rate, C
