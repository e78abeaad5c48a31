"""Scikit-learn style front end for the full construction."""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_dimension, check_mu_value, check_seed
from .approx import build
from .exceptions import IndexConflictError, InvalidParameterError
from .index_set import check_mu
from .nonlinear import ContractionConfig, iterate
from .pipeline import index_for, make_profile
from .sphere import RealHarmonicsS2


class SingularYamabeSolver(BaseEstimator):
    """Positive solution of the Yamabe equation on a half-cylinder.

    ``fit`` builds the periodic profile, the approximate solution of order
    ``mu`` from the kernel seed and the exact correction by contraction.
    ``predict`` evaluates the solution at points ``(t, angles...)``.

    Parameters
    ----------
    n : int
        Dimension, ``n >= 3``.
    psi_min_ratio : float or None
        ``psi_min / psi_c`` of the Delaunay profile; ``None`` for the constant one.
    mu : float
        Target decay order.
    seed : mapping, optional
        Kernel coefficients by flat mode index.
    t0 : float
    t_step : float
    basis : {"auto", "full", "zonal"}
    tol_admit : float
    max_iters : int
    convergence_tol : float
    escalation_attempts : int

    Attributes
    ----------
    psi_ : PeriodicSolution
    index_ : IndexSet
    approx_ : ApproxSolution
    solution_ : Solution
    report_ : SolveReport
    verified_mu_ : float

    Examples
    --------
    >>> est = SingularYamabeSolver(n=6, mu=2.9, seed={1: 0.05}).fit()
    >>> est.report_.converged
    True
    """

    def __init__(self, n=3, psi_min_ratio=None, mu=2.1, seed=None, t0=8.0, t_step=0.005,
                 basis="auto", tol_admit=1e-3, max_iters=60, convergence_tol=1e-10,
                 escalation_attempts=4):
        self.n = n
        self.psi_min_ratio = psi_min_ratio
        self.mu = mu
        self.seed = seed
        self.t0 = t0
        self.t_step = t_step
        self.basis = basis
        self.tol_admit = tol_admit
        self.max_iters = max_iters
        self.convergence_tol = convergence_tol
        self.escalation_attempts = escalation_attempts

    def fit(self, X=None, y=None):
        """Run the construction; ``X`` and ``y`` are ignored."""
        n = check_dimension(self.n)
        mu = check_mu_value(self.mu)
        if self.basis not in ("auto", "full", "zonal"):
            raise InvalidParameterError(f"unknown basis kind {self.basis!r}")
        seed = check_seed(self.seed or {})
        self.psi_ = make_profile(n, self.psi_min_ratio)
        self.index_ = index_for(self.psi_, mu + 1.0)
        res = check_mu(self.index_, mu, self.tol_admit)
        if not res:
            raise IndexConflictError(f"mu={mu} is not admissible: {res.reason}", mu=mu,
                                     nearest=res.nearest, distance=res.distance)
        self.approx_ = build(self.psi_, seed, mu, self.index_, t0=self.t0, kind=self.basis,
                             tol_admit=self.tol_admit)
        cfg = ContractionConfig(mu, self.t0, max_iters=self.max_iters,
                                convergence_tol=self.convergence_tol,
                                escalation_attempts=self.escalation_attempts,
                                t_step=self.t_step)
        self.solution_, self.report_ = iterate(self.approx_, cfg)
        self.verified_mu_ = self.report_.verified_mu
        w = self.solution_.w
        self._w_spline = CubicSpline(w.grid.t, w.coeffs, axis=1)
        return self

    def _angles(self, X):
        basis = self.approx_.basis
        full = isinstance(basis, RealHarmonicsS2)
        if full and X.shape[1] == 3:
            return lambda c: basis.evaluate(c, X[:, 1], X[:, 2])
        if not full and X.shape[1] == 2:
            return lambda c: basis.evaluate(c, X[:, 1])
        raise InvalidParameterError(
            f"expected columns (t, theta{', phi' if full else ''}), got {X.shape[1]}")

    def coefficients(self, t) -> np.ndarray:
        """Harmonic coefficients of ``v`` at times ``t``, shape ``(n_modes, len(t))``."""
        check_is_fitted(self, "solution_")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        g = self.solution_.grid
        if np.any(t < g.t0 - 1e-12) or np.any(t > g.T + 1e-12):
            raise InvalidParameterError(f"times must lie in [{g.t0}, {g.T}]")
        ap = self.approx_
        c = np.zeros((len(ap.basis), t.size))
        c[0] = ap.psi.psi(t) / ap.basis.constant_value
        for _, blk in ap.phi.items():
            c += blk.evaluate(t)
        return c + self._w_spline(t)

    def predict(self, X):
        """Values ``v(t, theta)`` at rows of ``X``.

        Columns are ``(t, theta, phi)`` for the full basis on ``S^2`` and
        ``(t, theta)`` (polar angle) for the zonal basis.
        """
        check_is_fitted(self, "solution_")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        evaluate = self._angles(X)
        c = self.coefficients(X[:, 0])
        V = evaluate(np.eye(c.shape[0]))  # (modes, points)
        return np.sum(c * V, axis=0)

    def score(self, X=None, y=None) -> float:
        """Verified decay order of ``v - v_hat``."""
        check_is_fitted(self, "solution_")
        return float(self.verified_mu_)
