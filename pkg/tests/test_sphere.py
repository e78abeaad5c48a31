import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from singular_yamabe.exceptions import DegreeOverflowError, UnsupportedDimensionError
from singular_yamabe.sphere import (RealHarmonicsS2, ZonalHarmonics, build_basis, eigenvalue,
                                    multiplicity, sphere_area)


@pytest.mark.parametrize("k, n, lam", [(0, 5, 0), (1, 3, 2), (1, 7, 6), (2, 3, 6), (3, 4, 15)])
def test_eigenvalue(k, n, lam):
    assert eigenvalue(k, n) == lam


@pytest.mark.parametrize("k, n, m", [(0, 4, 1), (1, 3, 3), (1, 6, 6), (2, 3, 5), (2, 4, 9)])
def test_multiplicity(k, n, m):
    assert multiplicity(k, n) == m


def test_full_basis_layout():
    b = RealHarmonicsS2(3)
    assert len(b) == 16
    assert list(b.degrees[:4]) == [0, 1, 1, 1]
    assert b.mode(1).order == 0
    with pytest.raises(DegreeOverflowError):
        b.mode(16)
    assert_allclose(b.values[0], (4 * math.pi) ** -0.5, rtol=1e-14)


def test_full_basis_only_on_two_sphere():
    with pytest.raises(UnsupportedDimensionError):
        RealHarmonicsS2(2, n=4)


@pytest.mark.parametrize("basis", [RealHarmonicsS2(4), ZonalHarmonics(6, 5), ZonalHarmonics(4, 3)])
def test_orthonormal(basis):
    assert_allclose(basis.gram(), np.eye(len(basis)), atol=1e-12)
    assert_allclose(np.sum(basis.quadrature.weights), sphere_area(basis.n - 1), rtol=1e-13)


def test_projection_examples():
    b = RealHarmonicsS2(4)
    x3 = b.values[3]
    assert_allclose(b.project(x3, 3), 1.0, atol=1e-12)
    assert abs(b.project(x3, 5)) < 1e-12
    sq = b.values[1] ** 2
    for i in b.modes_of_degree(4):
        assert abs(b.project(sq, i)) < 1e-12


def test_product_of_mode_with_itself_has_even_degrees():
    b = RealHarmonicsS2(4)
    c = b.product_expand(1, 1)
    support = {int(b.degrees[i]) for i in np.flatnonzero(np.abs(c) > 1e-12)}
    assert support == {0, 2}


def test_product_with_constant():
    b = RealHarmonicsS2(3)
    c = b.product_expand(0, 6)
    expected = np.zeros(len(b))
    expected[6] = (4 * math.pi) ** -0.5
    assert_allclose(c, expected, atol=1e-13)


def test_product_reconstruction_random():
    rng = np.random.default_rng(3)
    b = RealHarmonicsS2(4, exact_degree=20)
    i, j = rng.integers(0, 16, size=2)
    c = b.product_expand(int(i), int(j))
    assert_allclose(c @ b.values, b.values[i] * b.values[j], atol=1e-10)


def test_product_overflow():
    with pytest.raises(DegreeOverflowError):
        RealHarmonicsS2(2).product_expand(4, 5)


def test_laplacian_eigenfunction_by_differences():
    b = RealHarmonicsS2(3)
    theta, phi, h = 1.1, 0.7, 1e-3

    def f(th, ph):
        return float(b.eval_harmonic(7, th, ph))

    lap = ((f(theta + h, phi) - 2 * f(theta, phi) + f(theta - h, phi)) / h**2
           + math.cos(theta) / math.sin(theta) * (f(theta + h, phi) - f(theta - h, phi)) / (2 * h)
           + (f(theta, phi + h) - 2 * f(theta, phi) + f(theta, phi - h)) / (h * math.sin(theta)) ** 2)
    assert_allclose(-lap / f(theta, phi), b.eigenvalues[7], rtol=1e-5)


def test_zonal_agrees_with_full_on_s2():
    full, zonal = RealHarmonicsS2(3), ZonalHarmonics(3, 3)
    theta = np.linspace(0.1, 3.0, 7)
    for k in range(4):
        i = full.modes_of_degree(k)[0]
        assert full.mode(i).order == 0
        assert_allclose(zonal.eval_harmonic(k, theta), full.eval_harmonic(i, theta, 0.0),
                        atol=1e-13)


def test_zonal_square_coefficients_match_full():
    full, zonal = RealHarmonicsS2(2), ZonalHarmonics(3, 2)
    assert_allclose(zonal.product_expand(1, 1), full.product_expand(1, 1)[[0, 1, 4]], atol=1e-13)


def test_build_basis_kinds():
    assert isinstance(build_basis(3, 2), RealHarmonicsS2)
    assert isinstance(build_basis(5, 2), ZonalHarmonics)
    assert isinstance(build_basis(3, 2, "zonal"), ZonalHarmonics)
