"""Fields on a truncated half-cylinder ``[t0, T] x S^(n-1)``.

A field is stored spectrally: one coefficient function of ``t`` per harmonic,
sampled on a uniform grid whose step divides the period of the background
orbit, so periodic data repeat exactly from one period to the next.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.ndimage import maximum_filter1d

from ._validation import check_real
from .exceptions import InvalidParameterError
from .periodic import PeriodGrid
from .sphere import SphereBasis


@lru_cache(maxsize=64)
def fd_weights(offsets: tuple, order: int) -> np.ndarray:
    """Finite-difference weights for derivative ``order`` at 0 on integer ``offsets``.

    Solves the moment (Vandermonde) conditions, so the stencil is exact for
    polynomials of degree ``len(offsets) - 1``.
    """
    s = np.asarray(offsets, dtype=float)
    k = len(s)
    A = np.vander(s, k, increasing=True).T
    b = np.zeros(k)
    b[order] = math.factorial(order)
    return np.linalg.solve(A, b)


def stencil_rows(N: int, order: int):
    """``(row, offsets, weights)`` for a fourth-order derivative on ``N`` points.

    Interior rows use centered 5-point stencils; the two rows nearest each
    end use 6-point (second derivative) or 5-point (first derivative)
    one-sided stencils.
    """
    width = 6 if order == 2 else 5
    central = tuple(range(-2, 3))
    rows = []
    for r in (0, 1):
        off = tuple(range(-r, width - r))
        rows.append((r, off, fd_weights(off, order)))
        off_end = tuple(-o for o in reversed(off))
        rows.append((N - 1 - r, off_end, fd_weights(off_end, order)))
    return central, fd_weights(central, order), rows


def derivative(values: np.ndarray, h: float, order: int = 2) -> np.ndarray:
    """Fourth-order finite-difference derivative along the last axis.

    Stencils are applied to differences ``v[r+o] - v[r]`` (the weights sum to
    zero), so constants differentiate to exactly zero and rounding scales with
    the local variation of the data.
    """
    v = np.asarray(values, dtype=float)
    N = v.shape[-1]
    if N < 7:
        raise InvalidParameterError("need at least 7 grid points for finite differences")
    central, wc, rows = stencil_rows(N, order)
    out = np.zeros_like(v)
    mid = v[..., 2:N - 2]
    for o, w in zip(central, wc):
        if o:
            out[..., 2:N - 2] += w * (v[..., 2 + o:N - 2 + o] - mid)
    for r, off, w in rows:
        out[..., r] = sum(wi * (v[..., r + o] - v[..., r]) for o, wi in zip(off, w) if o)
    return out / h**order


class FieldGrid:
    """Uniform grid on ``[t0, t0 + n_periods * P]`` with ``steps_per_period`` steps per period.

    Parameters
    ----------
    t0 : float
        Left end (the boundary of the half-cylinder).
    period : float
        Period of the background orbit (nominal period if constant).
    steps_per_period : int
    n_periods : int
    """

    def __init__(self, t0: float, period: float, steps_per_period: int, n_periods: int):
        self.t0 = float(t0)
        self.period = float(period)
        self.steps_per_period = int(steps_per_period)
        self.n_periods = int(n_periods)
        if self.n_periods < 1 or self.steps_per_period < 8:
            raise InvalidParameterError("field grid needs >= 1 period and >= 8 steps per period")
        self.h = self.period / self.steps_per_period
        self.size = self.n_periods * self.steps_per_period + 1
        self.t = self.t0 + self.h * np.arange(self.size)
        self._cache: dict = {}

    @classmethod
    def build(cls, t0: float, period: float, span: float, t_step: float = 0.005) -> "FieldGrid":
        """Grid covering at least ``span`` beyond ``t0`` with step at most ``t_step``."""
        check_real(span, "span", positive=True)
        check_real(t_step, "t_step", positive=True)
        m = int(math.ceil(period / t_step - 1e-9))
        k = int(math.ceil(span / period - 1e-9))
        return cls(t0, period, max(m, 8), max(k, 1))

    def __repr__(self) -> str:
        return (f"FieldGrid(t0={self.t0}, T={self.T:.6g}, h={self.h:.6g}, "
                f"size={self.size})")

    @property
    def T(self) -> float:
        return float(self.t[-1])

    def with_t0(self, t0: float) -> "FieldGrid":
        return FieldGrid(t0, self.period, self.steps_per_period, self.n_periods)

    def refined(self, factor: int = 2) -> "FieldGrid":
        return FieldGrid(self.t0, self.period, self.steps_per_period * factor, self.n_periods)

    def periodic(self, samples: np.ndarray, pgrid: PeriodGrid) -> np.ndarray:
        """Values on this grid of periodic functions given by samples on ``pgrid``."""
        if abs(pgrid.period - self.period) > 1e-12 * self.period:
            raise InvalidParameterError("period grid and field grid periods differ")
        key = (pgrid.size, pgrid.period)
        E = self._cache.get(key)
        if E is None:
            phases = self.t[: self.steps_per_period]
            E = pgrid.interpolation_matrix(phases)
            self._cache[key] = E
        one = np.asarray(samples) @ E.T
        reps = np.concatenate([np.tile(one, self.n_periods), one[..., :1]], axis=-1)
        return reps


@dataclass
class CylinderField:
    """Field ``w(t, theta) = sum_i w_i(t) X_i(theta)`` on a field grid.

    Attributes
    ----------
    grid : FieldGrid
    basis : SphereBasis
    coeffs : numpy.ndarray
        Shape ``(n_modes, grid.size)``.
    """

    grid: FieldGrid
    basis: SphereBasis
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        want = (len(self.basis), self.grid.size)
        if self.coeffs.shape != want:
            raise InvalidParameterError(f"coefficient array has shape {self.coeffs.shape}, "
                                        f"expected {want}")

    @classmethod
    def zeros(cls, grid: FieldGrid, basis: SphereBasis) -> "CylinderField":
        return cls(grid, basis, np.zeros((len(basis), grid.size)))

    @classmethod
    def from_nodal(cls, grid, basis, nodal: np.ndarray) -> "CylinderField":
        """Project nodal values of shape ``(grid.size, n_nodes)`` onto the basis."""
        return cls(grid, basis, basis.analyze(nodal).T)

    @classmethod
    def radial(cls, grid, basis, values: np.ndarray) -> "CylinderField":
        """Field ``v(t)`` independent of the angle."""
        c = np.zeros((len(basis), grid.size))
        c[0] = np.asarray(values) / basis.constant_value
        return cls(grid, basis, c)

    @property
    def t0(self) -> float:
        return self.grid.t0

    @property
    def t_grid(self) -> np.ndarray:
        return self.grid.t

    @property
    def modes(self) -> np.ndarray:
        return self.coeffs

    def nodal(self) -> np.ndarray:
        """Values at quadrature nodes, shape ``(grid.size, n_nodes)``."""
        return self.coeffs.T @ self.basis.values

    def sup_theta(self) -> np.ndarray:
        """``sup_theta |w(t, .)|`` over quadrature nodes for each ``t``."""
        return np.max(np.abs(self.nodal()), axis=1)

    def _like(self, coeffs):
        return CylinderField(self.grid, self.basis, coeffs)

    def _check(self, other):
        if other.grid is not self.grid and not (other.grid.size == self.grid.size
                                                and np.array_equal(other.grid.t, self.grid.t)):
            raise InvalidParameterError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, CylinderField):
            self._check(other)
            return self._like(self.coeffs + other.coeffs)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, CylinderField):
            self._check(other)
            return self._like(self.coeffs - other.coeffs)
        return NotImplemented

    def __neg__(self):
        return self._like(-self.coeffs)

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return self._like(scalar * self.coeffs)
        return NotImplemented

    __rmul__ = __mul__

    def copy(self) -> "CylinderField":
        return self._like(self.coeffs.copy())


def weighted_norm(field: CylinderField, mu: float, k: int = 0,
                  window: tuple[float, float] | None = None) -> float:
    """Discrete ``C^k_mu`` norm: ``sum_{j<=k} max e^(mu t) |grad^j w|``.

    ``t``-derivatives are fourth-order finite differences; angular derivatives
    are exact for the harmonic expansion. The maximum runs over grid times
    (restricted to ``window`` if given) and quadrature nodes.
    """
    if k not in (0, 1, 2):
        raise InvalidParameterError(f"derivative order must be 0, 1 or 2, got {k}")
    g = field.grid
    basis = field.basis
    c = field.coeffs
    mask = slice(None)
    if window is not None:
        mask = (g.t >= window[0] - 1e-12) & (g.t <= window[1] + 1e-12)
    weight = np.exp(mu * g.t)[mask][:, None]
    total = float(np.max(weight * np.abs(field.nodal()[mask])))
    if k >= 1:
        ct = derivative(c, g.h, 1)
        wt = (ct.T @ basis.values)[mask]
        grad2 = wt**2 + basis.gradient_norm(c.T)[mask] ** 2
        total += float(np.max(weight * np.sqrt(grad2)))
    if k >= 2:
        ctt = derivative(c, g.h, 2)
        wtt = (ctt.T @ basis.values)[mask]
        mixed = basis.gradient_norm(ct.T)[mask]
        hess = basis.hessian_norm(c.T)[mask]
        total += float(np.max(weight * np.sqrt(wtt**2 + 2.0 * mixed**2 + hess**2)))
    return total


def _slope(t, v, window, floor):
    if window is not None:
        sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
        t, v = t[sel], v[sel]
    keep = v > floor
    if keep.sum() < 2:
        return math.inf
    return float(-np.polyfit(t[keep], np.log(v[keep]), 1)[0])


def decay_rate(t: np.ndarray, values: np.ndarray, window: tuple[float, float] | None = None,
               period: float | None = None, floor: float = 1e-280) -> float:
    """Least-squares exponential decay rate of sampled magnitudes.

    Without ``period`` this is the slope of ``log|values|`` over ``window``.

    With a period, the block maxima ``M(t) = max_{[t, t+period]} |v|`` are
    used and the rate is the least-squares ``r`` of the model
    ``log M(t) = h(t) - r t`` with ``h`` periodic, sampled at ``t`` and
    ``t + period`` for ``t`` in the window; this is the mean of
    ``log(M(t) / M(t + period)) / period``. For ``v = g(t) e^(-r0 t)`` with
    ``g`` periodic it returns ``r0`` exactly, however strongly ``g``
    oscillates and however short the window. It needs samples up to
    ``window[1] + 2 period``; with less data the slope of ``log M`` over the
    window is returned instead.

    Returns ``inf`` when the values sit at the floating-point floor.
    """
    t = np.asarray(t, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    if window is None:
        window = (t[0], t[-1])
    if period is None or not period > 0 or not math.isfinite(period):
        return _slope(t, v, window, floor)
    h = t[1] - t[0]
    m = max(int(round(period / h)), 1)
    env = maximum_filter1d(v, size=m + 1, origin=-((m + 1) // 2), mode="nearest")
    sel = np.flatnonzero((t >= window[0] - 1e-12) & (t <= window[1] + 1e-12))
    if sel.size == 0:
        return math.inf
    if sel[-1] + 2 * m >= t.size:
        return _slope(t, env, window, floor)
    a, b = env[sel], env[sel + m]
    if np.all(a <= floor) or np.all(b <= floor):
        return math.inf
    keep = (a > floor) & (b > floor)
    if not np.any(keep):
        return math.inf
    return float(np.mean(np.log(a[keep] / b[keep])) / (t[m] - t[0]))
    tref = t[0]
    for _ in range(max_iter):
        shifted = logv + rate * (t - tref)
        env = maximum_filter1d(shifted, size=m + 1, origin=-((m + 1) // 2), mode="nearest")
        new = _slope(t, np.exp(env - rate * (t - tref)), window, 0.0)
        if not math.isfinite(new):
            return new
        if abs(new - rate) < 1e-10:
            return new
        rate = new
    return rate
