"""Positive periodic solutions of the reduced radial equation.

The radially symmetric Yamabe equation on the cylinder reduces to

    psi'' - (n-2)^2/4 psi + n(n-2)/4 psi^((n+2)/(n-2)) = 0,

whose positive periodic solutions are the constant ``psi_c`` and a one-parameter
family of oscillating (Delaunay-type) profiles. The family is parameterized by
the minimum value ``psi_min`` of the profile over a period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from ._validation import check_dimension, check_real
from .exceptions import IntegrationError, InvalidParameterError, NotPeriodicOrbitError
from .periodic import PeriodGrid

RTOL = 1e-13
ATOL = 1e-15


def constant_solution(n: int) -> float:
    """Unique positive constant solution of the radial equation.

    Parameters
    ----------
    n : int
        Dimension, at least 3.

    Returns
    -------
    float
        ``psi_c`` with ``psi_c^(4/(n-2)) = (n-2)/n``.
    """
    n = check_dimension(n)
    return ((n - 2) / n) ** ((n - 2) / 4)


def exponent(n: int) -> float:
    """Critical exponent ``(n+2)/(n-2)``."""
    return (n + 2) / (n - 2)


def hamiltonian(n: int, psi, dpsi):
    """First integral ``psi'^2/2 - (n-2)^2/8 psi^2 + (n-2)^2/8 psi^(2n/(n-2))``."""
    c = (n - 2) ** 2 / 8.0
    psi = np.asarray(psi, dtype=float)
    dpsi = np.asarray(dpsi, dtype=float)
    out = 0.5 * dpsi**2 - c * psi**2 + c * np.power(psi, 2.0 * n / (n - 2))
    return float(out) if out.ndim == 0 else out


def potential(n: int, psi):
    """Zeroth-order coefficient ``n(n+2)/4 psi^(4/(n-2))`` of the linearization."""
    return 0.25 * n * (n + 2) * np.power(psi, 4.0 / (n - 2))


def radial_rhs(n: int, psi):
    """Second derivative ``psi''`` implied by the radial equation."""
    return 0.25 * (n - 2) ** 2 * psi - 0.25 * n * (n - 2) * np.power(psi, exponent(n))


def radial_residual(n: int, psi, dpsi2):
    """Residual ``psi'' - (n-2)^2/4 psi + n(n-2)/4 psi^p`` for given samples."""
    return np.asarray(dpsi2) - radial_rhs(n, np.asarray(psi, dtype=float))


def _system(n):
    c1 = 0.25 * (n - 2) ** 2
    c2 = 0.25 * n * (n - 2)
    p = exponent(n)

    def f(t, y):
        return [y[1], c1 * y[0] - c2 * y[0] ** p if y[0] > 0 else c1 * y[0]]

    return f


@dataclass(frozen=True)
class RadialParams:
    """Dimension and neck parameter of a radial periodic solution.

    ``psi_min=None`` (or a value equal to ``psi_c`` within ``1e-12`` relative)
    selects the constant solution.
    """

    n: int
    psi_min: float | None = None

    def __post_init__(self):
        n = check_dimension(self.n)
        object.__setattr__(self, "n", n)
        pc = constant_solution(n)
        if self.psi_min is None:
            object.__setattr__(self, "psi_min", pc)
            return
        value = check_real(self.psi_min, "psi_min")
        if not value > 0:
            raise InvalidParameterError(f"psi_min must be positive, got {value}", psi_min=value)
        if value > pc * (1 + 1e-12):
            raise NotPeriodicOrbitError(
                f"psi_min={value} exceeds the constant solution {pc}; no positive periodic "
                "orbit has this minimum", psi_min=value, psi_c=pc)
        object.__setattr__(self, "psi_min", min(value, pc))

    @classmethod
    def from_ratio(cls, n: int, ratio: float) -> "RadialParams":
        """Parameters with ``psi_min = ratio * psi_c``."""
        ratio = check_real(ratio, "psi_min_ratio")
        return cls(n, ratio * constant_solution(check_dimension(n)))

    @property
    def is_constant(self) -> bool:
        return abs(self.psi_min - constant_solution(self.n)) <= 1e-12 * constant_solution(self.n)


@dataclass(frozen=True)
class PeriodicSolution:
    """A positive periodic solution with dense evaluation.

    Attributes
    ----------
    params : RadialParams
    period : float
        Period of the orbit, ``math.inf`` for the constant solution.
    hamiltonian : float
        Energy level of the orbit.
    psi_max : float
        Maximum of the orbit.
    """

    params: RadialParams
    period: float
    hamiltonian: float
    psi_max: float
    _half: object = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def psi_min(self) -> float:
        return self.params.psi_min

    @property
    def is_constant(self) -> bool:
        return math.isinf(self.period)

    @property
    def nominal_period(self) -> float:
        """Period used for grids: the orbit period, or ``2 pi / sqrt(n-2)`` if constant."""
        if self.is_constant:
            return 2.0 * math.pi / math.sqrt(self.n - 2)
        return self.period

    def __call__(self, t):
        """Return ``(psi(t), psi'(t))`` for scalar or array ``t``."""
        t = np.asarray(t, dtype=float)
        if self.is_constant:
            return np.full_like(t, self.psi_min), np.zeros_like(t)
        tau = np.mod(t, self.period)
        upper = tau > 0.5 * self.period
        tau = np.where(upper, self.period - tau, tau)
        y = self._half(tau.ravel()).reshape((2,) + t.shape)
        return y[0], np.where(upper, -y[1], y[1])

    def psi(self, t):
        return self(t)[0]

    def dpsi(self, t):
        return self(t)[1]

    def samples(self, grid: PeriodGrid) -> tuple[np.ndarray, np.ndarray]:
        """Samples of ``(psi, psi')`` on a period grid."""
        return self(grid.t)

    def period_grid(self, size: int | None = None) -> PeriodGrid:
        """Period grid resolving the orbit to roughly machine precision."""
        if size is None:
            size = self.default_grid_size()
        return PeriodGrid(self.nominal_period, size)

    def default_grid_size(self, tol: float = 1e-14, max_size: int = 4096) -> int:
        if self.is_constant:
            return 32
        size = 64
        while size < max_size:
            psi, _ = self(PeriodGrid(self.period, size).t)
            if PeriodGrid(self.period, size).tail_fraction(psi, 0.25) < tol:
                break
            size *= 2
        return size

    def ode_residual(self, size: int | None = None) -> float:
        """Sup over one period of ``|psi'' - rhs(psi)|`` using spectral ``psi''``."""
        grid = self.period_grid(size)
        psi, dpsi = self.samples(grid)
        return float(np.max(np.abs(grid.deriv(dpsi) - radial_rhs(self.n, psi))))


def psi_max_from_energy(n: int, energy: float) -> float:
    """Upper turning point: the root above ``psi_c`` of ``H(psi, 0) = energy``."""
    pc = constant_solution(n)
    g = lambda x: hamiltonian(n, x, 0.0) - energy
    if g(pc) >= 0:
        return pc
    return brentq(g, pc, 1.0, xtol=1e-15, rtol=1e-15)


def solve_periodic(params: RadialParams, *, rtol: float = RTOL, atol: float = ATOL,
                   max_time: float = 1e4) -> PeriodicSolution:
    """Integrate the radial equation from its minimum and detect the period.

    The orbit is launched from ``(psi_min, 0)``; the half-period is the first
    time ``psi'`` returns to zero from above (at the maximum). Evenness about
    ``t = 0`` and the half period extends the interpolant to all ``t``.

    Parameters
    ----------
    params : RadialParams
        Dimension and neck size; constant parameters return the constant orbit.
    rtol, atol : float
        Tolerances of the eighth-order Dormand-Prince integrator.
    max_time : float
        Give up if no turning point is found before this time.

    Returns
    -------
    PeriodicSolution

    Raises
    ------
    IntegrationError
        If the integrator fails or finds no turning point.
    """
    n = params.n
    if params.is_constant:
        pc = constant_solution(n)
        return PeriodicSolution(params, math.inf, hamiltonian(n, pc, 0.0), pc)

    def turning(t, y):
        return y[1]

    turning.terminal = True
    turning.direction = -1

    y0 = [params.psi_min, 0.0]
    res = solve_ivp(_system(n), (0.0, max_time), y0, method="DOP853", rtol=rtol, atol=atol,
                    events=turning, dense_output=True)
    if res.status == -1:
        raise IntegrationError(f"radial integration failed: {res.message}", n=n,
                               psi_min=params.psi_min)
    if not res.t_events[0].size:
        raise IntegrationError("no turning point found; period detection failed", n=n,
                               psi_min=params.psi_min)
    half = float(res.t_events[0][0])
    # the integrator's dense output beyond the last step is not used
    ymax = res.y_events[0][0]
    energy = hamiltonian(n, params.psi_min, 0.0)
    if ymax[0] <= params.psi_min:
        raise IntegrationError("turning point is not a maximum", n=n, psi_min=params.psi_min)
    sol = res.sol

    def half_eval(tau):
        return sol(np.clip(tau, 0.0, half))

    return PeriodicSolution(params, 2.0 * half, energy, float(ymax[0]), half_eval)


def trajectory(psi: PeriodicSolution, n_periods: int = 10, samples_per_period: int = 400,
               rtol: float = RTOL, atol: float = ATOL):
    """Fresh integration from the minimum over several periods.

    Returns
    -------
    t, values, derivatives : numpy.ndarray
    drift : numpy.ndarray
        ``(H(t) - H(0)) / max(1, |H(0)|)`` along the trajectory.
    """
    n = psi.n
    h0 = hamiltonian(n, psi.psi_min, 0.0)
    span = n_periods * psi.nominal_period
    t_eval = np.linspace(0.0, span, n_periods * samples_per_period + 1)
    res = solve_ivp(_system(n), (0.0, span), [psi.psi_min, 0.0], method="DOP853",
                    rtol=rtol, atol=atol, t_eval=t_eval)
    if not res.success:
        raise IntegrationError(f"re-integration failed: {res.message}")
    h = hamiltonian(n, res.y[0], res.y[1])
    return res.t, res.y[0], res.y[1], (h - h0) / max(1.0, abs(h0))


def hamiltonian_drift(psi: PeriodicSolution, n_periods: int = 10, samples_per_period: int = 400,
                      rtol: float = RTOL, atol: float = ATOL) -> float:
    """Relative energy drift of a fresh integration over several periods.

    Returns ``max |H(t) - H(0)| / max(1, |H(0)|)`` over a sampled grid.
    """
    drift = trajectory(psi, n_periods, samples_per_period, rtol, atol)[3]
    return float(np.max(np.abs(drift)))
