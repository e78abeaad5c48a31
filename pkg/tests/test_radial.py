import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from singular_yamabe.exceptions import (InvalidDimensionError, InvalidParameterError,
                                        NotPeriodicOrbitError)
from singular_yamabe.radial import (RadialParams, constant_solution, exponent, hamiltonian,
                                    hamiltonian_drift, psi_max_from_energy, radial_residual,
                                    solve_periodic, trajectory)


@pytest.mark.parametrize("n, expected", [(6, 2 / 3), (4, 2**-0.5), (3, 3**-0.25)])
def test_constant_solution_values(n, expected):
    assert_allclose(constant_solution(n), expected, rtol=1e-15)


@pytest.mark.parametrize("n", range(3, 9))
def test_constant_solution_solves_ode(n):
    assert abs(radial_residual(n, constant_solution(n), 0.0)) < 1e-14


@pytest.mark.parametrize("n", [2, 1, 3.5, "x"])
def test_invalid_dimension(n):
    with pytest.raises(InvalidDimensionError):
        constant_solution(n)


def test_hamiltonian_examples():
    assert_allclose(hamiltonian(4, 2**-0.5, 0.0), -1 / 8, rtol=1e-14)
    assert_allclose(hamiltonian(6, 2 / 3, 0.0), -8 / 27, rtol=1e-14)
    assert hamiltonian(5, 1e-300, 0.0) == pytest.approx(0.0, abs=1e-300)


def test_hamiltonian_vectorized():
    psi = np.linspace(0.1, 0.7, 5)
    out = hamiltonian(3, psi, 0.1 * psi)
    assert out.shape == (5,)
    assert_allclose(out[2], hamiltonian(3, psi[2], 0.1 * psi[2]))


def test_exponent():
    assert exponent(3) == 5.0
    assert exponent(6) == 2.0


def test_small_oscillation_period():
    n = 3
    psi = solve_periodic(RadialParams(n, constant_solution(n) - 1e-3))
    assert abs(psi.period - 2 * math.pi / math.sqrt(n - 2)) < 1e-2


@pytest.mark.parametrize("n", [3, 4, 6])
def test_period_grows_toward_homoclinic(n):
    periods = [solve_periodic(RadialParams.from_ratio(n, r)).period for r in (0.3, 0.1, 0.03)]
    assert periods[0] < periods[1] < periods[2]


def test_orbit_extrema_share_energy(profile):
    psi = profile(4, 0.3)
    assert_allclose(hamiltonian(4, psi.psi_max, 0.0), hamiltonian(4, psi.psi_min, 0.0),
                    rtol=1e-12)
    assert_allclose(psi_max_from_energy(4, psi.hamiltonian), psi.psi_max, rtol=1e-12)
    assert psi.psi_min < constant_solution(4) < psi.psi_max


def test_evaluator_is_periodic_and_even(profile):
    psi = profile(3, 0.5)
    t = np.linspace(-3.0, 5.0, 17)
    y, dy = psi(t)
    y2, dy2 = psi(t + 3 * psi.period)
    assert_allclose(y2, y, atol=1e-13)
    assert_allclose(dy2, dy, atol=1e-13)
    assert_allclose(psi.psi(-t), y, atol=1e-13)
    assert_allclose(psi.dpsi(-t), -dy, atol=1e-13)
    assert_allclose(psi.psi(0.0), psi.psi_min, rtol=1e-14)


@pytest.mark.parametrize("n, ratio", [(3, 0.1), (4, 0.6), (6, 0.9)])
def test_ode_residual_spectral(profile, n, ratio):
    assert profile(n, ratio).ode_residual() < 1e-9


@settings(max_examples=10, deadline=None)
@given(n=st.sampled_from([3, 4, 5, 6]), ratio=st.floats(0.05, 0.97))
def test_drift_is_tiny(n, ratio):
    psi = solve_periodic(RadialParams.from_ratio(n, ratio))
    assert hamiltonian_drift(psi, n_periods=3) < 1e-10


def test_trajectory_matches_evaluator(profile):
    psi = profile(3, 0.3)
    t, y, dy, drift = trajectory(psi, n_periods=2, samples_per_period=50)
    assert_allclose(y, psi.psi(t), atol=1e-10)
    assert np.max(np.abs(drift)) < 1e-12


def test_constant_profile(profile):
    psi = profile(5)
    assert psi.is_constant
    assert math.isinf(psi.period)
    assert_allclose(psi.nominal_period, 2 * math.pi / math.sqrt(3))
    assert_allclose(psi.psi(np.array([0.0, 7.3])), constant_solution(5))


def test_rejects_minimum_above_constant():
    with pytest.raises(NotPeriodicOrbitError):
        RadialParams.from_ratio(3, 1.5)
    with pytest.raises(InvalidParameterError):
        RadialParams(3, -0.1)


def test_ratio_one_is_constant():
    assert RadialParams.from_ratio(4, 1.0).is_constant
