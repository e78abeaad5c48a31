"""Spectral structure of the Laplacian on round spheres.

Two orthonormal bases are provided:

* :class:`RealHarmonicsS2` -- all real spherical harmonics on S^2 up to a
  degree, evaluated through a stable normalized associated-Legendre recurrence;
* :class:`ZonalHarmonics` -- the axially symmetric harmonics on S^(n-1) for any
  ``n >= 3`` (normalized Gegenbauer polynomials of ``cos(theta)``).

Both carry a product quadrature that integrates the basis products used by the
solvers exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import comb, eval_gegenbauer, gammaln, roots_gegenbauer, roots_legendre

from ._validation import check_dimension, check_int
from .exceptions import DegreeOverflowError, InvalidParameterError, UnsupportedDimensionError


def eigenvalue(k: int, n: int) -> float:
    """Eigenvalue ``k(k+n-2)`` of ``-Laplacian`` on degree-``k`` harmonics of S^(n-1)."""
    return float(k * (k + n - 2))


def multiplicity(k: int, n: int) -> int:
    """Dimension of the space of degree-``k`` spherical harmonics on S^(n-1)."""
    k = check_int(k, "k", minimum=0)
    n = check_dimension(n)
    lead = int(comb(n + k - 1, k, exact=True))
    low = int(comb(n + k - 3, k - 2, exact=True)) if k >= 2 else 0
    return lead - low


def eigenvalue_ladder(n: int, count: int) -> np.ndarray:
    """First ``count`` eigenvalues of ``-Laplacian`` on S^(n-1), repeated per multiplicity."""
    out: list[float] = []
    k = 0
    while len(out) < count:
        out.extend([eigenvalue(k, n)] * multiplicity(k, n))
        k += 1
    return np.asarray(out[:count])


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere S^dim in R^(dim+1)."""
    return 2.0 * math.pi ** ((dim + 1) / 2) / math.gamma((dim + 1) / 2)


@dataclass(frozen=True)
class ModeIndex:
    """Flat position ``i``, degree and within-degree order of a basis function."""

    i: int
    degree: int
    order: int = 0


@dataclass(frozen=True)
class SphereQuadrature:
    """Product quadrature on a sphere.

    ``points`` has one row of angular coordinates per node: ``(theta, phi)`` on
    S^2 or ``(theta,)`` for zonal rules on S^(n-1).
    """

    points: np.ndarray
    weights: np.ndarray
    exact_degree: int

    @property
    def nodes(self) -> list[tuple[tuple[float, ...], float]]:
        return [(tuple(p), float(w)) for p, w in zip(self.points, self.weights)]

    def __len__(self) -> int:
        return len(self.weights)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Integrate nodal values (last axis) against the sphere measure."""
        return np.asarray(values) @ self.weights


class SphereBasis:
    """Finite orthonormal basis of spherical harmonics with nodal tables.

    Subclasses fill ``modes``, ``quadrature`` and the nodal tables of values
    and angular derivatives. Coefficient arrays carry modes on their last axis
    and nodal arrays carry quadrature nodes on their last axis.
    """

    n: int
    max_degree: int
    modes: tuple[ModeIndex, ...]
    quadrature: SphereQuadrature
    values: np.ndarray  # (modes, nodes)

    def __len__(self) -> int:
        return len(self.modes)

    def __repr__(self) -> str:
        return (f"{type(self).__name__}(n={self.n}, max_degree={self.max_degree}, "
                f"modes={len(self)}, nodes={len(self.quadrature)})")

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([m.degree for m in self.modes])

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.array([eigenvalue(k, self.n) for k in self.degrees])

    def mode(self, i: int) -> ModeIndex:
        if not 0 <= i < len(self.modes):
            raise DegreeOverflowError(f"mode {i} is outside the basis of {len(self)} modes",
                                      mode=i, size=len(self))
        return self.modes[i]

    def modes_of_degree(self, k: int) -> list[int]:
        return [m.i for m in self.modes if m.degree == k]

    @property
    def constant_value(self) -> float:
        """Value of the normalized constant harmonic, ``|S^(n-1)|^(-1/2)``."""
        return 1.0 / math.sqrt(sphere_area(self.n - 1))

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Nodal values of ``sum_i c_i X_i``."""
        return np.asarray(coeffs) @ self.values

    def analyze(self, nodal: np.ndarray) -> np.ndarray:
        """Mode coefficients of a nodal field by quadrature projection."""
        return np.asarray(nodal) @ (self.values * self.quadrature.weights).T

    def project(self, field, idx: ModeIndex | int) -> float:
        """L^2 inner product of ``field`` with ``X_idx``.

        ``field`` is either a callable taking the node coordinate columns, or
        an array of nodal values.
        """
        i = idx.i if isinstance(idx, ModeIndex) else int(idx)
        self.mode(i)
        if callable(field):
            nodal = np.asarray(field(*self.quadrature.points.T), dtype=float)
        else:
            nodal = np.asarray(field, dtype=float)
        return float(self.quadrature.integrate(nodal * self.values[i]))

    def gram(self) -> np.ndarray:
        return (self.values * self.quadrature.weights) @ self.values.T

    @cached_property
    def triple_products(self) -> np.ndarray:
        """Tensor ``G[i, j, m] = integral of X_i X_j X_m``."""
        v = self.values
        w = self.quadrature.weights
        return np.einsum("ia,ja,ma,a->ijm", v, v, v, w, optimize=True)

    def product_expand(self, i: ModeIndex | int, j: ModeIndex | int) -> np.ndarray:
        """Coefficients ``c`` with ``X_i X_j = sum_m c_m X_m``.

        Raises
        ------
        DegreeOverflowError
            If ``deg(i) + deg(j)`` exceeds the basis degree.
        """
        mi = self.mode(i.i if isinstance(i, ModeIndex) else int(i))
        mj = self.mode(j.i if isinstance(j, ModeIndex) else int(j))
        if mi.degree + mj.degree > self.max_degree:
            raise DegreeOverflowError(
                f"product of degrees {mi.degree} and {mj.degree} exceeds basis degree "
                f"{self.max_degree}", degree=mi.degree + mj.degree, max_degree=self.max_degree)
        if 3 * self.max_degree <= self.quadrature.exact_degree:
            return self.triple_products[mi.i, mj.i].copy()
        return self.analyze(self.values[mi.i] * self.values[mj.i])

    def product_coeffs(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Coefficients of the product of two expansions, truncated to the basis."""
        return self.analyze(self.synthesize(a) * self.synthesize(b))

    # angular derivatives -------------------------------------------------
    def gradient_norm(self, coeffs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian_norm(self, coeffs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient_dot(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Nodal inner product of the angular gradients of two expansions."""
        raise NotImplementedError


def _default_exact_degree(max_degree: int) -> int:
    return max(4 * max_degree + 4, 3 * max_degree)


def normalized_legendre(lmax: int, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalized associated Legendre functions and their theta-derivatives.

    Returns arrays ``P[l, m, k]`` and ``dP[l, m, k]`` for ``0 <= m <= l <= lmax``
    at polar angles ``theta[k]`` (away from the poles), normalized so that
    ``2 pi * integral of P[l, m]^2 d(cos theta) = 1``. No Condon-Shortley phase.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x = np.cos(theta)
    s = np.sin(theta)
    P = np.zeros((lmax + 1, lmax + 1, theta.size))
    P[0, 0] = 1.0 / math.sqrt(4.0 * math.pi)
    for m in range(1, lmax + 1):
        P[m, m] = math.sqrt((2 * m + 1) / (2 * m)) * s * P[m - 1, m - 1]
    for m in range(0, lmax):
        P[m + 1, m] = math.sqrt(2 * m + 3) * x * P[m, m]
    for m in range(0, lmax + 1):
        for l in range(m + 2, lmax + 1):
            a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
    dP = np.zeros_like(P)
    for l in range(1, lmax + 1):
        for m in range(0, l + 1):
            c = math.sqrt((2 * l + 1) * (l * l - m * m) / (2 * l - 1))
            dP[l, m] = (l * x * P[l, m] - c * P[l - 1, m]) / s
    return P, dP


class RealHarmonicsS2(SphereBasis):
    """Real orthonormal spherical harmonics on S^2 up to ``max_degree``.

    Within each degree the order runs ``m = 0, 1, -1, 2, -2, ...`` with
    ``cos(m phi)`` for ``m > 0`` and ``sin(|m| phi)`` for ``m < 0``. In
    particular ``X_1`` is the zonal harmonic ``sqrt(3/(4 pi)) cos(theta)``.

    Parameters
    ----------
    max_degree : int
        Largest harmonic degree in the basis.
    exact_degree : int, optional
        Polynomial degree integrated exactly by the quadrature; defaults to
        ``max(4 D + 4, 3 D)``.
    n : int
        Must be 3.
    """

    def __init__(self, max_degree: int, exact_degree: int | None = None, n: int = 3):
        if check_dimension(n) != 3:
            raise UnsupportedDimensionError(
                f"full harmonic bases are implemented on S^2 only (n=3), got n={n}", n=n)
        self.n = 3
        self.max_degree = check_int(max_degree, "max_degree", minimum=0)
        E = _default_exact_degree(self.max_degree) if exact_degree is None else int(exact_degree)
        if E < 2 * self.max_degree:
            raise InvalidParameterError("quadrature must integrate products of basis functions")
        n_theta = E // 2 + 1
        n_phi = E + 1
        x, wx = roots_legendre(n_theta)
        theta = np.arccos(x)
        phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
        T, F = np.meshgrid(theta, phi, indexing="ij")
        W = np.outer(wx, np.full(n_phi, 2.0 * np.pi / n_phi))
        self.quadrature = SphereQuadrature(np.column_stack([T.ravel(), F.ravel()]),
                                           W.ravel(), E)
        self.modes = tuple(self._enumerate(self.max_degree))
        self._tables(T.ravel(), F.ravel())

    @staticmethod
    def _enumerate(D):
        i = 0
        for l in range(D + 1):
            for m in [0] + [s * k for k in range(1, l + 1) for s in (1, -1)]:
                yield ModeIndex(i, l, m)
                i += 1

    def _raw(self, theta, phi):
        """Values and first/second angular derivatives of every mode at points."""
        D = self.max_degree
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        P, dP = normalized_legendre(D, theta)
        s = np.sin(theta)
        cot = np.cos(theta) / s
        nm = len(self.modes)
        shape = (nm, theta.size)
        V, Vt, Vp, Vtt, Vtp, Vpp = (np.zeros(shape) for _ in range(6))
        for md in self.modes:
            l, m = md.degree, md.order
            k = abs(m)
            if m == 0:
                trig, dtrig = np.ones_like(phi), np.zeros_like(phi)
                scale = 1.0
            elif m > 0:
                trig, dtrig = np.cos(k * phi), -k * np.sin(k * phi)
                scale = math.sqrt(2.0)
            else:
                trig, dtrig = np.sin(k * phi), k * np.cos(k * phi)
                scale = math.sqrt(2.0)
            p = scale * P[l, k]
            dp = scale * dP[l, k]
            ddp = -cot * dp - (l * (l + 1) - k * k / s**2) * p
            V[md.i] = p * trig
            Vt[md.i] = dp * trig
            Vp[md.i] = p * dtrig
            Vtt[md.i] = ddp * trig
            Vtp[md.i] = dp * dtrig
            Vpp[md.i] = -k * k * p * trig
        return V, Vt, Vp, Vtt, Vtp, Vpp

    def _tables(self, theta, phi):
        V, Vt, Vp, Vtt, Vtp, Vpp = self._raw(theta, phi)
        self.values = V
        self._d = (Vt, Vp, Vtt, Vtp, Vpp)
        self._sin = np.sin(theta)
        self._cot = np.cos(theta) / self._sin

    def eval_harmonic(self, idx: ModeIndex | int, theta, phi=None) -> np.ndarray:
        """Value of ``X_idx`` at ``(theta, phi)``; ``theta`` may be an ``(..., 2)`` array."""
        i = idx.i if isinstance(idx, ModeIndex) else int(idx)
        md = self.mode(i)
        if phi is None:
            pts = np.asarray(theta, dtype=float)
            theta, phi = pts[..., 0], pts[..., 1]
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        shape = np.broadcast(theta, phi).shape
        theta, phi = np.broadcast_to(theta, shape).ravel(), np.broadcast_to(phi, shape).ravel()
        P, _ = normalized_legendre(md.degree, theta)
        k = abs(md.order)
        if md.order == 0:
            out = P[md.degree, 0]
        elif md.order > 0:
            out = math.sqrt(2.0) * P[md.degree, k] * np.cos(k * phi)
        else:
            out = math.sqrt(2.0) * P[md.degree, k] * np.sin(k * phi)
        return out.reshape(shape) if shape else float(out[0])

    def evaluate(self, coeffs: np.ndarray, theta, phi) -> np.ndarray:
        """Evaluate ``sum_i c_i X_i`` at arbitrary points (broadcast over leading axes)."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        V = self._raw(theta, phi)[0]
        return np.asarray(coeffs) @ V

    def gradient_components(self, coeffs):
        Vt, Vp = self._d[0], self._d[1]
        return coeffs @ Vt, (coeffs @ Vp) / self._sin

    def gradient_norm(self, coeffs: np.ndarray) -> np.ndarray:
        gt, gp = self.gradient_components(np.asarray(coeffs))
        return np.hypot(gt, gp)

    def gradient_dot(self, a, b):
        at, ap = self.gradient_components(np.asarray(a))
        bt, bp = self.gradient_components(np.asarray(b))
        return at * bt + ap * bp

    def hessian_norm(self, coeffs: np.ndarray) -> np.ndarray:
        c = np.asarray(coeffs)
        Vt, Vp, Vtt, Vtp, Vpp = self._d
        s, cot = self._sin, self._cot
        ft, fp = c @ Vt, c @ Vp
        htt = c @ Vtt
        hpp = (c @ Vpp) / s**2 + cot * ft
        htp = (c @ Vtp - cot * fp) / s
        return np.sqrt(htt**2 + hpp**2 + 2.0 * htp**2)


class ZonalHarmonics(SphereBasis):
    """Axially symmetric orthonormal harmonics on S^(n-1).

    ``X_k(theta) = C_k^alpha(cos theta) / norm_k`` with ``alpha = (n-2)/2``;
    the flat index equals the degree. Zonal fields stay zonal under products,
    so this basis closes for all axially symmetric computations in any
    dimension.
    """

    def __init__(self, n: int, max_degree: int, exact_degree: int | None = None):
        self.n = check_dimension(n)
        self.max_degree = check_int(max_degree, "max_degree", minimum=0)
        E = _default_exact_degree(self.max_degree) if exact_degree is None else int(exact_degree)
        if E < 2 * self.max_degree:
            raise InvalidParameterError("quadrature must integrate products of basis functions")
        self.alpha = 0.5 * (self.n - 2)
        npts = E // 2 + 1
        x, w = roots_gegenbauer(npts, self.alpha)
        w = w * sphere_area(self.n - 2)
        theta = np.arccos(x)
        self.quadrature = SphereQuadrature(theta[:, None], w, E)
        self.modes = tuple(ModeIndex(k, k, 0) for k in range(self.max_degree + 1))
        self._norms = np.array([self._norm(k) for k in range(self.max_degree + 1)])
        self._x = x
        self.values, self._dF, self._ddF = self._raw(x)

    def _norm(self, k: int) -> float:
        a = self.alpha
        # integral of C_k^a(x)^2 (1-x^2)^(a-1/2) over [-1, 1]
        log_h = (math.log(math.pi) + (1 - 2 * a) * math.log(2.0) + gammaln(k + 2 * a)
                 - gammaln(k + 1) - math.log(k + a) - 2 * gammaln(a))
        return math.sqrt(math.exp(log_h) * sphere_area(self.n - 2))

    def _raw(self, x):
        a = self.alpha
        ks = np.arange(self.max_degree + 1)
        F = np.array([eval_gegenbauer(k, a, x) for k in ks])
        dF = np.array([2 * a * eval_gegenbauer(k - 1, a + 1, x) if k >= 1 else 0 * x
                       for k in ks])
        ddF = np.array([4 * a * (a + 1) * eval_gegenbauer(k - 2, a + 2, x) if k >= 2 else 0 * x
                        for k in ks])
        nrm = self._norms[:, None]
        return F / nrm, dF / nrm, ddF / nrm

    def eval_harmonic(self, idx: ModeIndex | int, theta) -> np.ndarray:
        """Value of ``X_idx`` at polar angle(s) ``theta``."""
        i = idx.i if isinstance(idx, ModeIndex) else int(idx)
        self.mode(i)
        theta = np.asarray(theta, dtype=float)
        out = eval_gegenbauer(i, self.alpha, np.cos(theta)) / self._norms[i]
        return float(out) if out.ndim == 0 else out

    def evaluate(self, coeffs: np.ndarray, theta) -> np.ndarray:
        x = np.cos(np.atleast_1d(np.asarray(theta, dtype=float)))
        return np.asarray(coeffs) @ self._raw(x)[0]

    def gradient_norm(self, coeffs: np.ndarray) -> np.ndarray:
        return np.abs(np.asarray(coeffs) @ self._dF) * np.sqrt(1.0 - self._x**2)

    def gradient_dot(self, a, b):
        return (np.asarray(a) @ self._dF) * (np.asarray(b) @ self._dF) * (1.0 - self._x**2)

    def hessian_norm(self, coeffs: np.ndarray) -> np.ndarray:
        c = np.asarray(coeffs)
        x = self._x
        d1 = c @ self._dF
        htt = (1.0 - x**2) * (c @ self._ddF) - x * d1
        hoo = -x * d1
        return np.sqrt(htt**2 + (self.n - 2) * hoo**2)


def build_basis(n: int, max_degree: int, kind: str = "auto",
                exact_degree: int | None = None) -> SphereBasis:
    """Construct a harmonic basis.

    ``kind`` is ``"full"`` (S^2 only), ``"zonal"``, or ``"auto"`` (full for
    ``n = 3``, zonal otherwise).
    """
    n = check_dimension(n)
    if kind == "auto":
        kind = "full" if n == 3 else "zonal"
    if kind == "full":
        return RealHarmonicsS2(max_degree, exact_degree, n=n)
    if kind == "zonal":
        return ZonalHarmonics(n, max_degree, exact_degree)
    raise InvalidParameterError(f"unknown basis kind {kind!r}")
