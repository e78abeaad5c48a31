"""Floquet analysis of the angular mode operators.

Mode ``i`` of the linearization about a periodic ``psi`` is the Hill operator

    L_i eta = eta'' + q_i(t) eta,   q_i = n(n+2)/4 psi^(4/(n-2)) - (n-2)^2/4 - lambda_i.

For ``lambda_i > 0`` its kernel has an exponential dichotomy
``psi_i^+ = e^(-rho t) p^+``, ``psi_i^- = e^(rho t) p^-`` with periodic ``p^+-``.
For ``lambda = 0`` and nonconstant ``psi`` the kernel is spanned by the
translation mode ``psi'`` and a linearly growing companion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import EllipticModeError, IntegrationError, OscillatoryModeError
from .periodic import PeriodGrid
from .radial import ATOL, RTOL, PeriodicSolution, exponent, potential
from .sphere import eigenvalue

JORDAN_TOL = 1e-8


def mode_potential(psi_values, n: int, lam: float):
    """``q(t) = V(psi) - (n-2)^2/4 - lambda``."""
    return potential(n, psi_values) - 0.25 * (n - 2) ** 2 - lam


def _aug_rhs(n: int, lam: float, kind: str, rho: float = 0.0):
    c1 = 0.25 * (n - 2) ** 2
    c2 = 0.25 * n * (n - 2)
    cv = 0.25 * n * (n + 2)
    p = exponent(n)
    e4 = 4.0 / (n - 2)

    if kind == "matrix":
        def f(t, y):
            s = y[0]
            q = cv * s**e4 - c1 - lam
            return [y[1], c1 * s - c2 * s**p, y[4], y[5], -q * y[2], -q * y[3]]
    elif kind == "periodic":
        # p'' = 2 rho p' - (rho^2 + q) p  (rho may be negative)
        def f(t, y):
            s = y[0]
            q = cv * s**e4 - c1 - lam
            return [y[1], c1 * s - c2 * s**p, y[3], 2.0 * rho * y[3] - (rho * rho + q) * y[2]]
    else:  # pragma: no cover
        raise ValueError(kind)
    return f


@dataclass(frozen=True)
class Monodromy:
    """Monodromy of ``L_i eta = 0`` over one period.

    The matrix is stored as ``scaled * exp(log_scale)`` so that very unstable
    modes do not overflow. ``det`` is the product of the determinants of the
    per-segment transition matrices, each of which is well conditioned.
    """

    scaled: np.ndarray
    log_scale: float
    det: float
    period: float
    segment_dets: tuple = field(repr=False, default=())

    @property
    def matrix(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.scaled * math.exp(self.log_scale)

    @property
    def trace(self) -> float:
        with np.errstate(over="ignore"):
            return float(np.trace(self.scaled) * math.exp(self.log_scale))

    def multipliers(self) -> tuple[float, float]:
        """Eigenvalues ``(large, small)`` from the characteristic polynomial.

        Uses ``lambda^2 - tr lambda + det = 0`` with the cancellation-free root
        pair ``(tr + sign(tr) sqrt(tr^2 - 4 det)) / 2`` and ``det / large``.
        Complex pairs are returned as ``nan``.
        """
        tr = self.trace
        disc = tr * tr - 4.0 * self.det
        if not math.isfinite(tr):
            return math.inf, 0.0
        if disc < 0:
            return math.nan, math.nan
        big = 0.5 * (tr + math.copysign(math.sqrt(disc), tr))
        return big, self.det / big

    def log_dominant(self) -> float:
        """``log`` of the larger multiplier magnitude, overflow-safe."""
        tr_s = float(np.trace(self.scaled))
        # big ~ tr when |tr| >> 1; solve in scaled units otherwise
        if self.log_scale > 50.0:
            det_s = self.det * math.exp(-2.0 * self.log_scale)
            disc = tr_s * tr_s - 4.0 * det_s
            big_s = 0.5 * (abs(tr_s) + math.sqrt(max(disc, 0.0)))
            return math.log(big_s) + self.log_scale
        big, _ = self.multipliers()
        return math.log(abs(big))

    def is_jordan(self, tol: float = JORDAN_TOL) -> bool:
        m = self.matrix
        return abs(self.trace - 2.0) < tol and float(np.max(np.abs(m - np.eye(2)))) > 1e3 * tol


def monodromy(psi: PeriodicSolution, lam: float, segments: int | None = None,
              rtol: float = RTOL, atol: float = ATOL) -> Monodromy:
    """Fundamental matrix of ``L_i eta = 0`` over one period of a nonconstant ``psi``.

    The period is split into ``segments`` pieces; each piece is integrated
    from the identity together with ``psi`` itself (restarted from the dense
    evaluator), and the pieces are multiplied with running rescaling.

    Parameters
    ----------
    psi : PeriodicSolution
        Nonconstant periodic solution.
    lam : float
        Sphere eigenvalue.
    segments : int, optional
        Number of pieces; by default about one per unit of ``sqrt(lambda) P / 2``
        so that every piece stays well conditioned.

    Returns
    -------
    Monodromy
    """
    if psi.is_constant:
        return _constant_monodromy(psi, lam)
    f = _aug_rhs(psi.n, lam, "matrix")
    P = psi.period
    if segments is None:
        segments = max(8, int(math.ceil(0.5 * math.sqrt(lam + 1.0) * P)))
    edges = np.linspace(0.0, P, segments + 1)
    M = np.eye(2)
    log_scale = 0.0
    dets = []
    for a, b in zip(edges[:-1], edges[1:]):
        s0, ds0 = psi(a)
        y0 = [float(s0), float(ds0), 1.0, 0.0, 0.0, 1.0]
        res = solve_ivp(f, (a, b), y0, method="DOP853", rtol=rtol, atol=atol)
        if not res.success:
            raise IntegrationError(f"monodromy integration failed: {res.message}", lam=lam)
        S = res.y[2:, -1].reshape(2, 2)
        dets.append(float(np.linalg.det(S)))
        M = S @ M
        s = float(np.max(np.abs(M)))
        M /= s
        log_scale += math.log(s)
    return Monodromy(M, log_scale, float(np.prod(dets)), P, tuple(dets))


def _constant_monodromy(psi: PeriodicSolution, lam: float) -> Monodromy:
    n = psi.n
    k2 = lam - (n - 2)
    P = psi.nominal_period
    if k2 > 0:
        r = math.sqrt(k2)
        c, s = math.cosh(r * P), math.sinh(r * P)
        M = np.array([[c, s / r], [r * s, c]])
    elif k2 < 0:
        w = math.sqrt(-k2)
        c, s = math.cos(w * P), math.sin(w * P)
        M = np.array([[c, s / w], [-w * s, c]])
    else:
        M = np.array([[1.0, P], [0.0, 1.0]])
    sc = float(np.max(np.abs(M)))
    return Monodromy(M / sc, math.log(sc), 1.0, P)


def indicial_root(psi: PeriodicSolution, lam: float, mono: Monodromy | None = None) -> float:
    """Indicial root of the mode with sphere eigenvalue ``lam``.

    Constant ``psi``: ``sqrt(lambda - (n-2))``. Nonconstant ``psi``: the
    logarithm of the dominant monodromy multiplier divided by the period, with
    the convention ``rho = 0`` for ``lambda = 0``.

    Raises
    ------
    OscillatoryModeError
        Constant ``psi`` with ``lambda <= n - 2``.
    EllipticModeError
        Nonconstant ``psi``, ``lambda > 0`` and multipliers on the unit circle.
    """
    n = psi.n
    if psi.is_constant:
        if lam <= n - 2:
            raise OscillatoryModeError(
                f"lambda={lam} <= n-2={n - 2}: the constant-coefficient mode oscillates",
                lam=lam, n=n)
        return math.sqrt(lam - (n - 2))
    if mono is None:
        mono = monodromy(psi, lam)
    if lam == 0:
        return 0.0
    tr = mono.trace
    if abs(tr) <= 2.0 + JORDAN_TOL:
        raise EllipticModeError(f"multipliers of lambda={lam} lie on the unit circle (tr={tr})",
                                lam=lam, trace=tr)
    if tr < 0:
        raise EllipticModeError(f"negative multipliers for lambda={lam} (tr={tr}); the periodic "
                                "parts would be anti-periodic", lam=lam, trace=tr)
    return mono.log_dominant() / mono.period


@dataclass(frozen=True, eq=False)
class ModeSystem:
    """Kernel structure of one mode operator ``L_i``.

    Periodic parts are stored as samples on ``grid`` together with their
    derivatives. The kernel is ``psi^+ = e^(-rho t) p^+`` and
    ``psi^- = e^(rho t) p^-``, except for ``kind == "mode0"`` where
    ``psi^- = a t p^+ + p^-``; ``kind == "oscillatory"`` is the constant-orbit
    mode 0 with ``p^+ = cos``, ``p^- = sin`` and ``rho = 0``.

    Attributes
    ----------
    degree : int
    lam : float
        Sphere eigenvalue.
    rho : float
        Indicial root.
    kind : {"floquet", "constant", "mode0", "oscillatory"}
    wronskian : float
        ``psi^+ (psi^-)' - psi^- (psi^+)'``.
    a : float or None
        Growth constant of the mode-0 companion solution.
    """

    degree: int
    lam: float
    rho: float
    kind: str
    grid: PeriodGrid
    q: np.ndarray = field(repr=False)
    p_plus: np.ndarray = field(repr=False)
    dp_plus: np.ndarray = field(repr=False)
    p_minus: np.ndarray = field(repr=False)
    dp_minus: np.ndarray = field(repr=False)
    wronskian: float = 0.0
    a: float | None = None
    monodromy: Monodromy | None = field(default=None, repr=False)

    @property
    def mode0_a(self) -> float | None:
        return self.a

    def periodic_parts(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Interpolated ``(p^+(t), p^-(t))``."""
        return self.grid.interpolate(self.p_plus, t), self.grid.interpolate(self.p_minus, t)

    def basis_plus(self, t) -> tuple[np.ndarray, np.ndarray]:
        """``(psi^+(t), psi^+'(t))``."""
        t = np.asarray(t, dtype=float)
        p = self.grid.interpolate(self.p_plus, t)
        dp = self.grid.interpolate(self.dp_plus, t)
        e = np.exp(-self.rho * t)
        return e * p, e * (dp - self.rho * p)

    def basis_minus(self, t) -> tuple[np.ndarray, np.ndarray]:
        """``(psi^-(t), psi^-'(t))``."""
        t = np.asarray(t, dtype=float)
        p = self.grid.interpolate(self.p_minus, t)
        dp = self.grid.interpolate(self.dp_minus, t)
        if self.kind == "mode0":
            pp = self.grid.interpolate(self.p_plus, t)
            dpp = self.grid.interpolate(self.dp_plus, t)
            return self.a * t * pp + p, self.a * (pp + t * dpp) + dp
        e = np.exp(self.rho * t)
        return e * p, e * (dp + self.rho * p)

    def kernel_residuals(self) -> tuple[float, float]:
        """Sup over one period of ``|L_i psi^+-|`` scaled by ``e^(+-rho t)``.

        Evaluated with spectral derivatives of the stored periodic parts.
        """
        g = self.grid
        r = self.rho
        pp, pm = self.p_plus, self.p_minus
        if self.kind == "oscillatory":
            res_p = g.deriv(pp, 2) + self.q * pp
            res_m = g.deriv(pm, 2) + self.q * pm
        else:
            res_p = g.deriv(pp, 2) - 2 * r * g.deriv(pp) + (r * r + self.q) * pp
            res_m = g.deriv(pm, 2) + 2 * r * g.deriv(pm) + (r * r + self.q) * pm
            if self.kind == "mode0":
                res_m = res_m + 2.0 * self.a * g.deriv(pp)
        return float(np.max(np.abs(res_p))), float(np.max(np.abs(res_m)))

    def wronskian_samples(self) -> np.ndarray:
        """Wronskian evaluated at every grid point (constant in exact arithmetic)."""
        pp, dpp, pm, dpm = self.p_plus, self.dp_plus, self.p_minus, self.dp_minus
        if self.kind == "mode0":
            t = self.grid.t
            return self.a * pp**2 + pp * dpm - pm * dpp + 0.0 * t
        return pp * dpm - pm * dpp + 2.0 * self.rho * pp * pm

    def periodicity_error(self) -> float:
        """Mismatch of the periodic parts across one period (0 for closed forms)."""
        return float(getattr(self, "_periodicity", 0.0))


def _normalize(p, dp):
    k = int(np.argmax(np.abs(p)))
    s = p[k]
    return p / s, dp / s


def _periodic_part(psi: PeriodicSolution, lam: float, rho: float, x0, grid: PeriodGrid,
                   backward: bool, sweeps: int = 40, tol: float = 1e-14):
    """Periodic factor of the decaying (backward) or growing (forward) solution.

    Integrates the equation for ``p = e^(+-rho t) eta`` in its stable
    direction; repeating the sweep is a power iteration towards the Floquet
    eigenvector.
    """
    P = psi.period
    sign_rho = rho if backward else -rho
    f = _aug_rhs(psi.n, lam, "periodic", sign_rho)
    # initial periodic-part state from the monodromy eigenvector (eta, eta')
    state = np.array([x0[0], x0[1] + sign_rho * x0[0]], dtype=float)
    state /= np.max(np.abs(state))
    t_samples = grid.t
    mismatch = math.inf
    for _ in range(sweeps):
        if backward:
            span = (P, 0.0)
            t_eval = np.concatenate([[P], t_samples[:0:-1], [0.0]])
            y0 = [psi.psi_min, 0.0, state[0], state[1]]
        else:
            span = (0.0, P)
            t_eval = np.concatenate([t_samples, [P]])
            y0 = [psi.psi_min, 0.0, state[0], state[1]]
        res = solve_ivp(f, span, y0, method="DOP853", rtol=RTOL, atol=ATOL, t_eval=t_eval)
        if not res.success:
            raise IntegrationError(f"periodic-part integration failed: {res.message}", lam=lam)
        end = res.y[2:, -1]
        scale = np.max(np.abs(end))
        new = end / scale
        sgn = 1.0 if np.dot(new, state) >= 0 else -1.0
        mismatch = float(np.max(np.abs(sgn * new - state)))
        state = sgn * new
        if mismatch < tol:
            break
    if backward:
        p = np.concatenate([[res.y[2, -1]], res.y[2, 1:-1][::-1]])
        dp = np.concatenate([[res.y[3, -1]], res.y[3, 1:-1][::-1]])
        start, stop = res.y[2:, -1], res.y[2:, 0]
    else:
        p = res.y[2, :-1]
        dp = res.y[3, :-1]
        start, stop = res.y[2:, 0], res.y[2:, -1]
    # relative mismatch between the two ends of the period
    period_err = float(np.max(np.abs(stop - start)) / np.max(np.abs(p)))
    p, dp = _normalize(p, dp)
    return p, dp, period_err


def floquet_basis(psi: PeriodicSolution, lam: float, grid: PeriodGrid | None = None,
                  degree: int | None = None) -> ModeSystem:
    """Floquet kernel basis of a mode with ``lambda > 0``.

    ``p^+`` and ``p^-`` are normalized to sup-norm 1 over one period (sup over
    the period grid) with their largest-magnitude sample positive, and the
    Wronskian is taken at ``t = 0``.
    """
    grid = psi.period_grid() if grid is None else grid
    n = psi.n
    s, _ = psi.samples(grid)
    q = mode_potential(s, n, lam)
    if psi.is_constant:
        rho = indicial_root(psi, lam)
        one = np.ones(grid.size)
        zero = np.zeros(grid.size)
        return ModeSystem(degree if degree is not None else -1, lam, rho, "constant", grid, q,
                          one, zero, one.copy(), zero.copy(), 2.0 * rho)
    mono = monodromy(psi, lam)
    rho = indicial_root(psi, lam, mono)
    M = mono.scaled
    # eigenvectors of the scaled matrix for the small/large multipliers
    lam_big_s = math.exp(rho * psi.period - mono.log_scale)
    lam_small_s = mono.det * math.exp(-rho * psi.period - mono.log_scale)
    x_minus = _eigvec(M, lam_small_s)
    x_plus = _eigvec(M, lam_big_s)
    pp, dpp, err_p = _periodic_part(psi, lam, rho, x_minus, grid, backward=True)
    pm, dpm, err_m = _periodic_part(psi, lam, rho, x_plus, grid, backward=False)
    W = float(pp[0] * dpm[0] - pm[0] * dpp[0] + 2.0 * rho * pp[0] * pm[0])
    ms = ModeSystem(degree if degree is not None else -1, lam, rho, "floquet", grid, q,
                    pp, dpp, pm, dpm, W, None, mono)
    object.__setattr__(ms, "_periodicity", max(err_p, err_m))
    return ms


def _eigvec(M, ev):
    a = np.array([M[0, 1], ev - M[0, 0]])
    b = np.array([ev - M[1, 1], M[1, 0]])
    v = a if np.max(np.abs(a)) >= np.max(np.abs(b)) else b
    return v / np.max(np.abs(v))


def mode0_basis(psi: PeriodicSolution, grid: PeriodGrid | None = None) -> ModeSystem:
    """Kernel basis of ``L_0``.

    Nonconstant ``psi``: ``p^+ = psi' / ||psi'||_inf`` (translation mode) and
    the even solution ``u`` with ``u(0) = 1``, ``u'(0) = 0`` split as
    ``u = a t p^+ + p^-``. Constant ``psi``: ``cos`` and ``sin`` of
    ``sqrt(n-2) t`` (``kind="oscillatory"``).
    """
    grid = psi.period_grid() if grid is None else grid
    n = psi.n
    s, ds = psi.samples(grid)
    q = mode_potential(s, n, 0.0)
    if psi.is_constant:
        w = math.sqrt(n - 2)
        c, sn = np.cos(w * grid.t), np.sin(w * grid.t)
        return ModeSystem(0, 0.0, 0.0, "oscillatory", grid, q, c, -w * sn, sn, w * c, w)
    from .radial import radial_rhs

    scale = float(np.max(np.abs(ds)))
    pp = ds / scale
    dpp = radial_rhs(n, s) / scale
    f = _aug_rhs(n, 0.0, "periodic", 0.0)
    P = psi.period
    res = solve_ivp(f, (0.0, P), [psi.psi_min, 0.0, 1.0, 0.0], method="DOP853", rtol=RTOL,
                    atol=ATOL, t_eval=np.concatenate([grid.t, [P]]))
    if not res.success:
        raise IntegrationError(f"mode-0 integration failed: {res.message}")
    u, du = res.y[2, :-1], res.y[3, :-1]
    alpha = res.y[3, -1] / dpp[0]
    a = alpha / P
    t = grid.t
    pm = u - a * t * pp
    dpm = du - a * pp - a * t * dpp
    W = float(-pm[0] * dpp[0])
    mono = monodromy(psi, 0.0)
    ms = ModeSystem(0, 0.0, 0.0, "mode0", grid, q, pp, dpp, pm, dpm, W, float(a), mono)
    object.__setattr__(ms, "_periodicity", float(abs(res.y[2, -1] - 1.0)))
    return ms


def mode_system(psi: PeriodicSolution, degree: int, grid: PeriodGrid | None = None) -> ModeSystem:
    """Kernel structure of all harmonics of the given degree."""
    grid = psi.period_grid() if grid is None else grid
    if degree == 0:
        return mode0_basis(psi, grid)
    return floquet_basis(psi, eigenvalue(degree, psi.n), grid, degree)


def mode_systems(psi: PeriodicSolution, max_degree: int,
                 grid: PeriodGrid | None = None) -> dict[int, ModeSystem]:
    """Mode systems for degrees ``0..max_degree`` on a shared period grid."""
    grid = psi.period_grid() if grid is None else grid
    return {k: mode_system(psi, k, grid) for k in range(max_degree + 1)}


def indicial_roots(psi: PeriodicSolution, max_degree: int) -> dict[int, float]:
    """Indicial roots of degrees ``1..max_degree``."""
    n = psi.n
    return {k: indicial_root(psi, eigenvalue(k, n)) for k in range(1, max_degree + 1)}
