"""Approximate solutions of prescribed order.

Starting from a decaying kernel combination ``eta = sum c_i p_i^+ X_i e^(-rho_i t)``
the builder removes, order by order, every term of the nonlinear residual
whose rate lies below the target ``mu``. Each order solves the periodic mode
problems ``L_m(c(t) e^(-r t)) = a(t) e^(-r t)`` exactly in the
:mod:`~singular_yamabe.terms` algebra; a resonance ``r = rho_m`` produces an
extra power of ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import binom

from ._validation import check_mu_value, check_seed
from .exceptions import (IndexConflictError, InductionViolationError, InvalidParameterError,
                         PositivityViolationError, SeedTooLargeError)
from .fields import CylinderField, FieldGrid, decay_rate as _fit_rate, derivative
from .floquet import ModeSystem, mode_systems
from .index_set import IndexSet, check_mu, generate
from .periodic import PeriodGrid
from .radial import PeriodicSolution, exponent
from .sphere import SphereBasis, build_basis, eigenvalue
from .terms import ExpPoly, Series, rate_key

RATE_TOL = 0.05
SERIES_SWITCH = 0.05
SERIES_TERMS = 16


def taylor_coeff(n: int, k: int) -> float:
    """Generalized binomial coefficient of ``(1+s)^((n+2)/(n-2))`` at order ``k``."""
    return float(binom(exponent(n), k))


def power_tail(s: np.ndarray, p: float, order: int) -> np.ndarray:
    """``(1+s)^p - sum_{k<order} binom(p, k) s^k`` without cancellation.

    A direct power series is used where ``|s| < 0.05``; elsewhere the closed
    form is evaluated (with ``log1p``/``expm1`` for the first two orders).

    Raises
    ------
    PositivityViolationError
        If ``1 + s <= 0`` anywhere.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s <= -1.0):
        raise PositivityViolationError("base of the fractional power is not positive",
                                       minimum=float(np.min(1.0 + s)))
    small = np.abs(s) < SERIES_SWITCH
    out = np.empty_like(s)
    if np.any(small):
        x = s[small]
        acc = np.zeros_like(x)
        for k in range(order + SERIES_TERMS, order - 1, -1):
            acc = acc * x + binom(p, k)
        out[small] = acc * x**order
    big = ~small
    if np.any(big):
        x = s[big]
        val = np.expm1(p * np.log1p(x)) + (1.0 if order == 0 else 0.0)
        for k in range(1, order):
            val = val - binom(p, k) * x**k
        out[big] = val
    return out


@dataclass(frozen=True)
class KernelSeed:
    """Coefficients ``c_i`` of ``eta = sum c_i p_i^+ X_i e^(-rho_i t)`` by flat mode index."""

    coefficients: dict

    def __post_init__(self):
        object.__setattr__(self, "coefficients", check_seed(self.coefficients))

    @property
    def is_zero(self) -> bool:
        return not any(self.coefficients.values())

    def active(self) -> dict[int, float]:
        return {i: c for i, c in self.coefficients.items() if c != 0.0}

    def validate(self, basis: SphereBasis, systems: dict, mu: float) -> None:
        """Reject mode 0 and modes with ``rho_i + rho_1 >= mu``."""
        rho1 = systems[1].rho if 1 in systems else 1.0
        for i in self.active():
            md = basis.mode(i)
            if md.degree == 0:
                raise InvalidParameterError("mode 0 has no decaying kernel element; seeds must "
                                            "use modes of degree >= 1", mode=i)
            rho = systems[md.degree].rho
            if not rho + rho1 < mu:
                raise InvalidParameterError(
                    f"seed mode {i} (degree {md.degree}, rho={rho:.6g}) has rho + rho_1 >= mu "
                    f"= {mu}; such modes only contribute beyond the target order", mode=i)


@dataclass
class CorrectionRecord:
    """One order of the construction.

    Attributes
    ----------
    rate : float
        Order ``rho~_k``.
    witness : tuple
        Coefficients realizing ``rate`` from the seed rates.
    block : ExpPoly
        Correction ``sum_j t^j c_j(t) X_m e^(-rate t)`` (modes on axis 1).
    rhs_sup : float
        Size of the residual coefficients removed at this order.
    max_degree : int
        Largest harmonic degree carrying data.
    degree_bound : int
        Bound from the witness (sum of seed degrees).
    resonant_modes : list of int
    min_divisor : float
        Smallest ``|z|`` divisor met in the antiderivatives.
    solve_residual : float
        ``sup |L_m c - a| / sup |a|`` over the solved modes.
    """

    rate: float
    witness: tuple
    block: ExpPoly
    rhs_sup: float
    max_degree: int
    degree_bound: int
    resonant_modes: list
    min_divisor: float
    solve_residual: float

    @property
    def t_power(self) -> int:
        return self.block.powers

    def summary(self) -> dict:
        return {"rate": self.rate, "witness": list(self.witness), "t_power": self.t_power,
                "max_degree": self.max_degree, "degree_bound": self.degree_bound,
                "rhs_sup": self.rhs_sup, "correction_sup": self.block.sup(),
                "resonant_modes": list(self.resonant_modes), "min_divisor": self.min_divisor,
                "solve_residual": self.solve_residual}


def _kernel_blocks(ms: ModeSystem) -> tuple[ExpPoly, ExpPoly]:
    g = ms.grid
    plus = ExpPoly(ms.rho, ms.p_plus[None], g)
    if ms.kind == "mode0":
        minus = ExpPoly(0.0, np.stack([ms.p_minus, ms.a * ms.p_plus]), g)
    else:
        minus = ExpPoly(-ms.rho, ms.p_minus[None], g)
    return plus, minus


def apply_mode_operator(ms: ModeSystem, block: ExpPoly) -> ExpPoly:
    """``L_m`` applied exactly to a scalar term block."""
    return block.derivative().derivative() + block.scale(ms.q)


def solve_correction(ms: ModeSystem, rhs: ExpPoly, resonance_tol: float = 1e-8):
    """Solve ``L_m(c e^(-r t)) = a e^(-r t)`` in the periodic term class.

    Variation of parameters with exact antiderivatives: ``w = psi^+ A - psi^- B``
    with ``A' = -psi^- a / W`` and ``B' = -psi^+ a / W``. Positive-rate
    integrands integrate from infinity, negative-rate ones give the purely
    periodic particular solution (which differs from an integral started at
    ``t0`` only by a multiple of ``psi^+``). The nonconstant mode 0 uses its
    linearly growing companion as ``psi^-``. At a resonance ``r = rho_m`` the
    antiderivative raises the power of ``t`` by one.

    Returns
    -------
    block : ExpPoly
        Solution with rate ``r``.
    info : dict
        ``min_divisor``, ``resonant`` and ``residual`` (relative).
    """
    if rhs.coeffs.ndim != 2:
        raise ValueError("solve_correction acts on a single mode")
    r = rhs.rate
    asup = rhs.sup()
    if asup == 0.0:
        return ExpPoly(r, np.zeros((1, ms.grid.size)), ms.grid), {
            "min_divisor": math.inf, "resonant": False, "residual": 0.0}
    plus, minus = _kernel_blocks(ms)
    W = ms.wronskian
    A, dA = (minus * rhs).scale(-1.0 / W).antiderivative(resonance_tol)
    B, dB = (plus * rhs).scale(-1.0 / W).antiderivative(resonance_tol)
    w = (plus * A).with_rate(r) - (minus * B).with_rate(r)
    w = w.trimmed(1e-15 * max(w.sup(), 1e-300))
    resonant = w.powers > rhs.powers
    check = apply_mode_operator(ms, w) - rhs
    res = check.sup() / asup
    return w, {"min_divisor": min(dA, dB), "resonant": bool(resonant), "residual": float(res)}


def nonlinear_residual_expansion(phi: Series, psi_samples: np.ndarray, n: int,
                                 triple: np.ndarray, cut: float) -> Series:
    """Term blocks of ``sum_{k>=2} a_k psi^(p-k) phi^k`` with rates ``<= cut``.

    ``a_k = n(n-2)/4 binom(p, k)`` with ``p = (n+2)/(n-2)``; the expansion stops
    once all powers exceed ``cut`` (or the binomial series terminates).
    """
    p = exponent(n)
    c = 0.25 * n * (n - 2)
    out = Series()
    if not len(phi):
        return out
    rmin = min(phi.rates)
    base = phi.truncate(cut)
    power = base
    k = 1
    while True:
        k += 1
        if k * rmin > cut + 1e-9:
            break
        power = power.product(base, triple, cut)
        if not len(power):
            break
        ak = c * binom(p, k)
        if ak != 0.0:
            out = out + power.scale(ak * psi_samples ** (p - k))
        elif float(p).is_integer() and k > p:
            break
    return out


def _seed_series(seed: KernelSeed, basis: SphereBasis, systems: dict) -> Series:
    out = Series()
    M = len(basis)
    for i, ci in seed.active().items():
        ms = systems[basis.mode(i).degree]
        coeffs = np.zeros((1, M, ms.grid.size))
        coeffs[0, i] = ci * ms.p_plus
        out.add(ExpPoly(ms.rho, coeffs, ms.grid))
    return out


@dataclass
class ApproxSolution:
    """``v_hat = psi + eta + eta~`` together with the correction ledger.

    Attributes
    ----------
    psi : PeriodicSolution
    seed : KernelSeed
    mu : float
    basis : SphereBasis
    systems : dict
        Mode systems by degree on ``pgrid``.
    pgrid : PeriodGrid
    eta : Series
        Kernel part.
    corrections : list of CorrectionRecord
    orders : list of float
        Orders ``rho~_k < mu`` that were removed.
    interactions : IndexSet or None
        Combinations of the seed rates with coefficient sum >= 2.
    """

    psi: PeriodicSolution
    seed: KernelSeed
    mu: float
    basis: SphereBasis
    systems: dict
    pgrid: PeriodGrid
    eta: Series
    corrections: list = field(default_factory=list)
    orders: list = field(default_factory=list)
    interactions: IndexSet | None = None
    index: IndexSet | None = None
    taylor_order: int = 2
    induction_residual: float = 0.0

    @property
    def n(self) -> int:
        return self.psi.n

    @property
    def correction_series(self) -> Series:
        out = Series()
        for rec in self.corrections:
            out.add(rec.block)
        return out

    @property
    def phi(self) -> Series:
        """``eta + eta~``."""
        return self.eta + self.correction_series

    @property
    def min_divisor(self) -> float:
        return min((r.min_divisor for r in self.corrections), default=math.inf)

    # evaluation -----------------------------------------------------------
    def phi_coeffs(self, grid: FieldGrid) -> np.ndarray:
        """Mode coefficients of ``v_hat - psi`` on a field grid."""
        return self.phi.on_field_grid(grid, len(self.basis))

    def psi_values(self, grid: FieldGrid) -> np.ndarray:
        return self.psi.psi(grid.t)

    def field(self, grid: FieldGrid) -> CylinderField:
        """``v_hat`` as a cylinder field."""
        f = CylinderField(grid, self.basis, self.phi_coeffs(grid))
        f.coeffs[0] += self.psi_values(grid) / self.basis.constant_value
        return f

    def nodal(self, grid: FieldGrid) -> np.ndarray:
        return self.field(grid).nodal()

    def _rate_nodal(self, grid: FieldGrid) -> dict[float, np.ndarray]:
        out = {}
        for r, blk in self.phi.items():
            out[r] = blk.on_field_grid(grid).T @ self.basis.values
        return out

    def residual_nodal(self, grid: FieldGrid) -> np.ndarray:
        """``N(v_hat)`` at quadrature nodes, shape ``(grid.size, n_nodes)``.

        With ``L psi``-terms and ``L eta`` vanishing identically and every
        removed order cancelled by construction, the residual equals the part
        of ``sum a_k psi^(p-k) phi^k`` whose rates were not removed. The powers
        are accumulated rate by rate on the nodes, and the binomial tail beyond
        the last explicit power is evaluated directly, so no large terms are
        subtracted.
        """
        n = self.n
        p = exponent(n)
        c = 0.25 * n * (n - 2)
        psi_t = self.psi_values(grid)[:, None]
        parts = self._rate_nodal(grid)
        if not parts:
            return np.zeros((grid.size, len(self.basis.quadrature)))
        phi_nodal = sum(parts.values())
        if np.any(psi_t + phi_nodal <= 0.0):
            raise PositivityViolationError("approximate solution is not positive on the grid",
                                           minimum=float(np.min(psi_t + phi_nodal)))
        removed = {rate_key(r) for r in self.orders}
        rmin = min(parts)
        # explicit powers up to K-1, with K the first power whose rates all exceed
        # every removed order
        top = max(removed) if removed else 0.0
        K = max(2, int(math.floor(top / rmin + 1e-9)) + 1)
        out = np.zeros_like(phi_nodal)
        low = {r: v for r, v in parts.items()}
        for k in range(2, K):
            new: dict[float, np.ndarray] = {}
            for r1, v1 in low.items():
                for r2, v2 in parts.items():
                    key = rate_key(r1 + r2)
                    prod = v1 * v2
                    new[key] = new[key] + prod if key in new else prod
            coef = c * binom(p, k) * psi_t ** (p - k)
            keep = {r: v for r, v in new.items() if r not in removed}
            for v in keep.values():
                out += coef * v
            low = new
        # all terms of order >= K have rates above every removed order
        out += c * psi_t**p * power_tail(phi_nodal / psi_t, p, K)
        return out

    def residual(self, grid: FieldGrid) -> CylinderField:
        """``N(v_hat)`` projected on the basis."""
        return CylinderField.from_nodal(grid, self.basis, self.residual_nodal(grid))

    def residual_sup(self, grid: FieldGrid) -> np.ndarray:
        return np.max(np.abs(self.residual_nodal(grid)), axis=1)

    def decay_rate(self, grid: FieldGrid, window: tuple[float, float] | None = None) -> float:
        """Fitted decay rate of ``sup_theta |N(v_hat)|`` over ``window``."""
        if window is None:
            window = default_window(grid.t0)
        return _fit_rate(grid.t, self.residual_sup(grid), window, self.psi.nominal_period)

    def gradient_decay_rate(self, grid: FieldGrid,
                            window: tuple[float, float] | None = None) -> float:
        """Fitted decay rate of ``sup_theta |grad N(v_hat)|`` (projected residual)."""
        if window is None:
            window = default_window(grid.t0)
        res = self.residual(grid)
        ct = derivative(res.coeffs, grid.h, 1)
        g2 = (ct.T @ self.basis.values) ** 2 + self.basis.gradient_norm(res.coeffs.T) ** 2
        return _fit_rate(grid.t, np.max(np.sqrt(g2), axis=1), window, self.psi.nominal_period)

    def seed_only(self) -> "ApproxSolution":
        """The uncorrected ``psi + eta`` with the same seed."""
        return ApproxSolution(self.psi, self.seed, self.mu, self.basis, self.systems, self.pgrid,
                              self.eta, [], [], self.interactions, self.index, self.taylor_order)

    def algebraic_residual(self, cut: float | None = None) -> Series:
        """Term blocks of ``N(v_hat)`` with rates ``<= cut`` (default ``mu``)."""
        cut = self.mu if cut is None else cut
        psi_s = self.psi.samples(self.pgrid)[0]
        nl = nonlinear_residual_expansion(self.phi, psi_s, self.n,
                                          self.basis.triple_products, cut)
        lin = Series()
        for rec in self.corrections:
            lin.add(_apply_L_block(self.systems, self.basis, rec.block))
        return nl + lin

    def report(self) -> dict:
        return {"mu": self.mu, "orders": list(self.orders),
                "seed": {str(k): v for k, v in self.seed.active().items()},
                "taylor_order": self.taylor_order, "max_degree": self.basis.max_degree,
                "corrections": [r.summary() for r in self.corrections],
                "min_divisor": self.min_divisor, "induction_residual": self.induction_residual}


def _apply_L_block(systems: dict, basis: SphereBasis, block: ExpPoly) -> ExpPoly:
    q = np.stack([systems[d].q for d in basis.degrees])
    return block.derivative().derivative() + block.scale(q)


def default_window(t0: float) -> tuple[float, float]:
    return (t0 + 2.0, t0 + 10.0)


def mode_degree(i: int, n: int, kind: str = "auto") -> int:
    """Harmonic degree of flat mode ``i`` in the basis used for dimension ``n``."""
    if kind == "auto":
        kind = "full" if n == 3 else "zonal"
    return int(math.isqrt(i)) if kind == "full" else int(i)


def required_degree(psi: PeriodicSolution, mu: float, seed: KernelSeed | None = None,
                    margin: float = 2.0, kind: str = "auto", max_degree: int = 40) -> int:
    """Degree cutoff: every degree with ``rho_k <= mu + margin`` plus all excited degrees."""
    from .floquet import indicial_root

    n = psi.n
    D = 1
    while D < max_degree and indicial_root(psi, eigenvalue(D + 1, n)) <= mu + margin:
        D += 1
    if seed is not None and not seed.is_zero:
        degs = [mode_degree(i, n, kind) for i in seed.active()]
        roots = {d: indicial_root(psi, eigenvalue(d, n)) for d in set(degs)}
        rates = sorted(set(roots.values()))
        inter = generate(rates, mu, min_coeff_sum=2)
        top = max(degs)
        for k, r in enumerate(inter.elements):
            if r < mu:
                bound = sum(m * max(d for d in degs if roots[d] == rr)
                            for m, rr in zip(inter.witnesses[k], inter.roots))
                top = max(top, bound)
        D = max(D, top)
    return D


def build(psi: PeriodicSolution, seed, mu: float, index: IndexSet | None = None, *,
          basis: SphereBasis | None = None, systems: dict | None = None,
          pgrid: PeriodGrid | None = None, t0: float | None = None, kind: str = "auto",
          tol_admit: float = 1e-3, resonance_tol: float = 1e-8) -> ApproxSolution:
    """Construct an approximate solution of order ``mu``.

    Parameters
    ----------
    psi : PeriodicSolution
    seed : KernelSeed or mapping
        Kernel coefficients by flat mode index.
    mu : float
        Target order; must be admissible for ``index`` when given.
    index : IndexSet, optional
        Index set of all indicial roots used for the admissibility check.
    basis, systems, pgrid : optional
        Reuse precomputed structures.
    t0 : float, optional
        If given, the seed is checked to satisfy ``sup |eta| < psi_min / 2``
        on ``[t0, inf)``.

    Returns
    -------
    ApproxSolution
    """
    mu = check_mu_value(mu)
    seed = seed if isinstance(seed, KernelSeed) else KernelSeed(seed or {})
    if index is not None:
        res = check_mu(index, mu, tol_admit)
        if not res:
            raise IndexConflictError(f"mu={mu} is not admissible: {res.reason}", mu=mu,
                                     nearest=res.nearest, distance=res.distance)
    if basis is None:
        basis = build_basis(psi.n, required_degree(psi, mu, seed, kind=kind), kind)
    pgrid = psi.period_grid() if pgrid is None else pgrid
    if systems is None:
        systems = mode_systems(psi, basis.max_degree, pgrid)
    seed.validate(basis, systems, mu)
    eta = _seed_series(seed, basis, systems)
    out = ApproxSolution(psi, seed, mu, basis, systems, pgrid, eta, index=index)
    if seed.is_zero:
        return out
    if t0 is not None:
        bound = sum(abs(c) * float(np.max(np.abs(basis.values[i]))) *
                    math.exp(-systems[basis.mode(i).degree].rho * t0)
                    for i, c in seed.active().items())
        if bound >= 0.5 * psi.psi_min:
            raise SeedTooLargeError(f"sup|eta| bound {bound:.3g} >= psi_min/2 on [t0, inf)",
                                    bound=bound, psi_min=psi.psi_min, t0=t0)

    seed_deg: dict[float, int] = {}
    for i in seed.active():
        d = basis.mode(i).degree
        r = rate_key(systems[d].rho)
        seed_deg[r] = max(seed_deg.get(r, 0), d)
    rates = sorted(seed_deg)
    inter = generate(rates, mu, min_coeff_sum=2)
    out.interactions = inter
    orders = [float(r) for r in inter.elements if r < mu - inter.tol]
    out.taylor_order = int(math.ceil(mu / min(rates) - 1e-12))
    psi_s = psi.samples(pgrid)[0]
    triple = basis.triple_products
    phi = eta.copy()
    done: set = set(rate_key(r) for r in rates)
    induction = 0.0
    for k, rt in enumerate(orders):
        key = rate_key(rt)
        nl = nonlinear_residual_expansion(phi, psi_s, psi.n, triple, rt)
        for r in nl.rates:
            if r < key and r not in done:
                raise InductionViolationError(
                    f"residual carries rate {r} below order {rt} that was never removed",
                    rate=r, order=rt)
        # removed orders must stay cancelled: compare with L of the corrections
        lin = Series()
        for rec in out.corrections:
            lin.add(_apply_L_block(systems, basis, rec.block))
        scale = max(nl.sup(), 1e-300)
        for r in (nl + lin).rates:
            if r < key:
                blk = (nl + lin).get(r)
                induction = max(induction, blk.sup() / scale)
        a = nl.get(rt)
        done.add(key)
        if a is None or a.sup() == 0.0:
            continue
        witness = inter.witnesses[k]
        bound = sum(m * seed_deg[r] for m, r in zip(witness, inter.roots))
        asup = a.sup()
        carried = [m for m in range(len(basis)) if np.max(np.abs(a.coeffs[:, m])) > 1e-12 * asup]
        max_deg = max(basis.mode(m).degree for m in carried)
        if max_deg > bound:
            raise InductionViolationError(
                f"order {rt} carries degree {max_deg} above the bound {bound}",
                order=rt, degree=max_deg, bound=bound)
        block = np.zeros((1, len(basis), pgrid.size))
        resonant, divisor, solve_res = [], math.inf, 0.0
        for m in carried:
            ms = systems[basis.mode(m).degree]
            c, info = solve_correction(ms, ExpPoly(rt, -a.coeffs[:, m], pgrid), resonance_tol)
            if c.powers + 1 > block.shape[0]:
                block = np.concatenate(
                    [block, np.zeros((c.powers + 1 - block.shape[0],) + block.shape[1:])])
            block[: c.powers + 1, m] = c.coeffs
            divisor = min(divisor, info["min_divisor"])
            solve_res = max(solve_res, info["residual"])
            if info["resonant"]:
                resonant.append(m)
        blk = ExpPoly(key, block, pgrid)
        out.corrections.append(CorrectionRecord(key, tuple(witness), blk, asup, max_deg, bound,
                                                resonant, divisor, solve_res))
        out.orders.append(key)
        phi.add(blk)
    # orders without data are still cancelled (trivially)
    out.orders = sorted(set(out.orders) | {rate_key(r) for r in orders})
    out.induction_residual = induction
    return out


def residual(v_hat: ApproxSolution, grid: FieldGrid) -> CylinderField:
    """``N(v_hat)`` on a field grid (projected on the harmonic basis)."""
    return v_hat.residual(grid)


def decay_rate(residual_or_values, grid: FieldGrid | None = None,
               window: tuple[float, float] | None = None, period: float | None = None) -> float:
    """Least-squares decay rate of ``sup_theta`` of a residual field.

    Accepts a :class:`CylinderField` or an array of ``sup_theta`` values (then
    ``grid`` supplies the times). Returns ``inf`` at the floating-point floor.
    """
    if isinstance(residual_or_values, CylinderField):
        grid = residual_or_values.grid
        values = residual_or_values.sup_theta()
    else:
        values = np.asarray(residual_or_values)
    if window is None:
        window = default_window(grid.t0)
    return _fit_rate(grid.t, values, window, period)
