import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy.special import binom

from singular_yamabe.approx import (KernelSeed, apply_mode_operator, build, mode_degree,
                                    nonlinear_residual_expansion, power_tail, required_degree,
                                    solve_correction, taylor_coeff)
from singular_yamabe.exceptions import (IndexConflictError, InvalidParameterError,
                                        SeedTooLargeError)
from singular_yamabe.fields import CylinderField, FieldGrid
from singular_yamabe.floquet import mode_system
from singular_yamabe.nonlinear import N
from singular_yamabe.pipeline import index_for
from singular_yamabe.terms import ExpPoly, Series


@pytest.mark.parametrize("n, k, a", [(6, 2, 1), (6, 3, 0), (4, 2, 3), (4, 3, 1), (4, 4, 0),
                                     (3, 2, 10)])
def test_taylor_coefficients(n, k, a):
    assert taylor_coeff(n, k) == a


@settings(max_examples=50, deadline=None)
@given(s=st.floats(-0.9, 2.0), p=st.sampled_from([5.0, 3.0, 2.0, 7 / 3, 9 / 5]),
       order=st.integers(0, 4))
def test_power_tail_matches_definition(s, p, order):
    direct = (1 + s) ** p - sum(binom(p, k) * s**k for k in range(order))
    assert_allclose(power_tail(np.array([s]), p, order)[0], direct, rtol=1e-9, atol=1e-13)


def test_power_tail_small_argument_has_full_precision():
    s = np.array([1e-6])
    assert_allclose(power_tail(s, 5.0, 2)[0], 10e-12 + 10e-18, rtol=1e-12)


def test_solve_correction_constant_closed_form(profile):
    ms = mode_system(profile(3), 2)
    rate = 1.7
    a = ExpPoly(rate, np.full((1, ms.grid.size), 0.4), ms.grid)
    c, info = solve_correction(ms, a)
    assert c.powers == 0
    assert_allclose(c.coeffs[0], 0.4 / (rate**2 - 5.0), rtol=1e-12)
    assert not info["resonant"]


def test_solve_correction_zero(profile):
    ms = mode_system(profile(3, 0.5), 1)
    c, info = solve_correction(ms, ExpPoly(2.0, np.zeros((1, ms.grid.size)), ms.grid))
    assert c.sup() == 0.0 and info["residual"] == 0.0


@pytest.mark.parametrize("degree, rate", [(0, 2.0), (1, 2.0), (1, 0.5), (2, 2.0), (2, 3.0),
                                          (3, 2.0)])
def test_solve_correction_reapplies(profile, degree, rate):
    psi = profile(3, 0.5)
    ms = mode_system(psi, degree)
    g = ms.grid
    rhs = ExpPoly(rate, (np.cos(2 * np.pi * g.t / g.period) + 0.3)[None] * psi.samples(g)[0],
                  g)
    c, info = solve_correction(ms, rhs)
    check = apply_mode_operator(ms, c) - rhs
    assert check.sup() < 1e-8 * rhs.sup()
    assert info["residual"] < 1e-8


def test_solve_correction_resonant_gains_power(profile):
    ms = mode_system(profile(3), 2)
    rate = math.sqrt(5)
    rhs = ExpPoly(rate, np.ones((1, ms.grid.size)), ms.grid)
    c, info = solve_correction(ms, rhs)
    assert info["resonant"] and c.powers == 1
    assert (apply_mode_operator(ms, c) - rhs).sup() < 1e-12
    # L(t e^{-rho t}) = -2 rho e^{-rho t}
    assert_allclose(c.coeffs[1], -1 / (2 * rate), rtol=1e-12)


def test_residual_expansion_degree_bound(profile):
    ap = build(profile(6), {1: 0.05}, 2.9)
    psi_s = ap.psi.samples(ap.pgrid)[0]
    nl = nonlinear_residual_expansion(ap.eta, psi_s, 6, ap.basis.triple_products, 2.0)
    assert nl.rates == [2.0]
    coeffs = nl.get(2.0).coeffs
    support = {int(ap.basis.degrees[m]) for m in range(len(ap.basis))
               if np.max(np.abs(coeffs[:, m])) > 1e-14}
    assert support <= {0, 1, 2}
    assert len(nonlinear_residual_expansion(Series(), psi_s, 6, ap.basis.triple_products, 3)) == 0


def test_order_two_coefficient_matches_direct_residual(profile):
    psi = profile(6)
    ap = build(psi, {1: 0.05}, 2.9)
    raw = ap.seed_only()
    psi_s = psi.samples(ap.pgrid)[0]
    a = nonlinear_residual_expansion(raw.eta, psi_s, 6, ap.basis.triple_products, 2.0).get(2.0)
    predicted = np.max(np.abs(a.coeffs[0].T @ ap.basis.values))
    g = FieldGrid.build(6.0, psi.nominal_period, 3.0, 0.005)
    direct = N(raw.field(g)).sup_theta() * np.exp(2 * g.t)
    assert abs(np.max(direct[10:-10]) / predicted - 1) < 0.05


def test_zero_seed_gives_profile(profile):
    ap = build(profile(3, 0.5), {}, 2.1)
    g = FieldGrid.build(8.0, ap.psi.nominal_period, 30.0, 0.01)
    assert np.all(ap.residual_nodal(g) == 0.0)
    assert math.isinf(ap.decay_rate(g))
    assert_allclose(ap.field(g).nodal()[:, 0], ap.psi.psi(g.t))


def _grid(ap, t0=8.0):
    P = ap.psi.nominal_period
    return FieldGrid.build(t0, P, 11 + 2 * P, 0.005)


@pytest.mark.parametrize("key", ["n6", "n3"])
def test_reference_orders(reference_approx, key):
    ap = reference_approx[key]
    g = _grid(ap)
    assert abs(ap.seed_only().decay_rate(g) - 2.0) < 0.1
    assert ap.decay_rate(g) >= ap.mu - 0.05
    assert ap.gradient_decay_rate(g) >= ap.mu - 0.05


def test_order_by_order(profile):
    psi = profile(6)
    partial = build(psi, {1: 0.05}, 2.5)
    full = build(psi, {1: 0.05}, 3.5)
    assert partial.orders == [2.0] and full.orders == [2.0, 3.0]
    g = _grid(full)
    assert partial.decay_rate(g) >= 3.0 - 0.05
    assert full.decay_rate(g) >= 4.0 - 0.05


def test_two_mode_seed_and_mixed_order(profile):
    ap = build(profile(3, 0.5), {1: 0.02, 4: 0.01}, 3.5)
    rho2 = ap.systems[2].rho
    assert_allclose(ap.orders, [2.0, 3.0, 1.0 + rho2], atol=1e-9)
    for rec in ap.corrections:
        assert rec.max_degree <= rec.degree_bound
        assert rec.solve_residual < 1e-8
    assert ap.decay_rate(_grid(ap)) >= 3.5 - 0.05


def test_symbolic_residual_matches_grid_residual(profile):
    psi = profile(3)
    ap = build(psi, {1: 0.1, 3: -0.05}, 3.5)
    g = FieldGrid.build(2.0, psi.nominal_period, 6.0, 0.005)
    sym = ap.residual(g).coeffs
    direct = N(ap.field(g)).coeffs
    inner = slice(20, -20)
    scale = np.max(np.abs(sym[:, inner]))
    # the grid residual carries an O(h^4) finite-difference floor
    assert np.max(np.abs(sym - direct)[:, inner]) < 5e-3 * scale


def test_seed_validation(profile):
    psi = profile(3, 0.5)
    with pytest.raises(InvalidParameterError):
        build(psi, {0: 0.1}, 2.1)
    with pytest.raises(InvalidParameterError):
        build(psi, {4: 0.1}, 2.1)  # rho_2 + rho_1 > mu
    with pytest.raises(SeedTooLargeError):
        build(psi, {1: 5.0}, 2.1, t0=0.0)


def test_index_conflict(profile):
    psi = profile(3)
    with pytest.raises(IndexConflictError):
        build(psi, {1: 0.1}, 2.0, index_for(psi, 3.0))


def test_required_degree_and_mode_degree(profile):
    assert mode_degree(5, 3) == 2 and mode_degree(5, 6) == 5
    D = required_degree(profile(3), 2.5, KernelSeed({1: 0.1}))
    assert D >= 2
