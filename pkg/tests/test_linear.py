import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from singular_yamabe.exceptions import (ExtendTruncationError, IndexConflictError,
                                        WrongBranchError)
from singular_yamabe.fields import CylinderField, FieldGrid, weighted_norm
from singular_yamabe.floquet import mode_system, mode_systems
from singular_yamabe.linear import (LinearSolver, apply_L, solve_mode_high, solve_mode_low,
                                    tail_integral, truncation_span)
from singular_yamabe.sphere import RealHarmonicsS2


def make_solver(psi, mu, t0=5.0, D=3, h=0.005):
    basis = RealHarmonicsS2(D)
    systems = mode_systems(psi, D)
    roots = {k: s.rho for k, s in systems.items()}
    grid = FieldGrid.build(t0, psi.nominal_period, truncation_span(roots, mu), h)
    return LinearSolver(psi, basis, grid, mu, systems)


def test_tail_integral_exponential():
    g = FieldGrid.build(0.0, 1.0, 10.0, 0.01)
    # int_t^inf e^{-(s-t)} e^{-2s} ds = e^{-2t}/3; the tail continuation is exact
    # once it carries the decay of the data
    out = tail_integral(np.exp(-2 * g.t), 1.0, g, tail_decay=2.0)
    assert_allclose(out, np.exp(-2 * g.t) / 3, rtol=1e-9)
    periodic = 1.0 + 0.5 * np.cos(2 * np.pi * g.t)
    out = tail_integral(periodic, 1.0, g)
    exact = 1.0 + 0.5 * (np.cos(2 * np.pi * g.t) - 2 * np.pi * np.sin(2 * np.pi * g.t)) / (
        1 + 4 * np.pi**2)
    assert_allclose(out, exact, rtol=1e-8)


def test_low_mode_closed_form(profile):
    psi = profile(3)
    mu = 2.5
    ms = mode_system(psi, 2)
    g = FieldGrid.build(0.0, psi.nominal_period, 25.0, 0.01)
    w = solve_mode_low(ms, np.exp(-mu * g.t), mu, g)
    assert_allclose(w, np.exp(-mu * g.t) / (mu**2 - 5.0), rtol=1e-8)
    assert_allclose(solve_mode_low(ms, np.zeros(g.size), mu, g), 0.0)


def test_constant_mode_zero_closed_form(profile):
    psi = profile(4)
    mu = 1.5
    ms = mode_system(psi, 0)
    g = FieldGrid.build(0.0, psi.nominal_period, 25.0, 0.01)
    w = solve_mode_low(ms, np.exp(-mu * g.t), mu, g)
    assert_allclose(w, np.exp(-mu * g.t) / (mu**2 + 2.0), rtol=1e-8)


def test_wrong_branch(profile):
    ms = mode_system(profile(3), 3)
    g = FieldGrid.build(0.0, 2 * math.pi, 25.0, 0.01)
    with pytest.raises(WrongBranchError):
        solve_mode_low(ms, np.zeros(g.size), 2.5, g)


def test_high_mode_closed_form(profile):
    psi = profile(3)
    mu, t0 = 2.5, 1.0
    ms = mode_system(psi, 3)
    rho = math.sqrt(11)
    g = FieldGrid.build(t0, psi.nominal_period, 40.0, 0.005)
    w = solve_mode_high(ms, np.exp(-mu * g.t), g, mu)
    exact = (np.exp(-mu * g.t) - np.exp(-mu * t0) * np.exp(-rho * (g.t - t0))) / (mu**2 - rho**2)
    assert w[0] == 0.0
    # away from the far end, where the exact solution assumes T = infinity
    near = g.t <= t0 + 20.0
    assert np.max(np.abs((w - exact) * np.exp(mu * g.t))[near]) < 1e-8


def test_high_mode_needs_length(profile):
    ms = mode_system(profile(3), 3)
    with pytest.raises(ExtendTruncationError):
        solve_mode_high(ms, np.zeros(301), FieldGrid.build(0.0, 1.0, 3.0, 0.01), 2.5)


def test_apply_identities(profile):
    psi = profile(3)
    mu = 1.5
    basis = RealHarmonicsS2(2)
    g = FieldGrid.build(0.0, psi.nominal_period, 10.0, 0.005)
    c = np.zeros((len(basis), g.size))
    c[2] = np.exp(-mu * g.t)
    c[0] = np.cos(g.t)
    out = apply_L(CylinderField(g, basis, c), psi).coeffs
    assert_allclose(out[2][2:-2], (mu**2 - 1.0) * np.exp(-mu * g.t)[2:-2], atol=1e-9)
    assert np.max(np.abs(out[0])) < 1e-9


@pytest.mark.parametrize("ratio, mu", [(None, 1.5), (None, 2.5), (0.5, 1.5), (0.5, 2.5)])
def test_round_trip_and_linearity(profile, ratio, mu):
    psi = profile(3, ratio)
    L = make_solver(psi, mu)
    rng = np.random.default_rng(11)
    g = L.grid
    c = rng.standard_normal((len(L.basis), 1)) * np.exp(-(mu + 0.2) * g.t)
    c *= 1 + 0.3 * np.cos(1.7 * g.t)
    f = CylinderField(g, L.basis, c)
    w = L.invert(f)
    assert weighted_norm(L.apply(w) - f, mu) / weighted_norm(f, mu) < 1e-6
    f2 = CylinderField(g, L.basis, rng.standard_normal((len(L.basis), 1)) * np.exp(-(mu + 0.5) * g.t))
    lhs = L.invert(f + 2.0 * f2)
    rhs = w + 2.0 * L.invert(f2)
    assert weighted_norm(lhs - rhs, mu) < 1e-10 * weighted_norm(lhs, mu)


def test_inverse_vanishes_on_zero(profile):
    L = make_solver(profile(3), 1.5)
    assert_allclose(L.invert(CylinderField.zeros(L.grid, L.basis)).coeffs, 0.0)


def test_rejects_root_as_weight(profile):
    with pytest.raises(IndexConflictError):
        make_solver(profile(3), math.sqrt(5))


def test_high_modes_vanish_at_left_end(profile):
    L = make_solver(profile(3, 0.5), 1.5)
    rng = np.random.default_rng(2)
    f = CylinderField(L.grid, L.basis, rng.standard_normal((len(L.basis), 1)) * np.exp(-2 * L.grid.t))
    w = L.invert(f)
    high = [i for i, d in enumerate(L.basis.degrees) if L.branches[int(d)] == "high"]
    assert high
    assert_allclose(w.coeffs[high, 0], 0.0, atol=0)
