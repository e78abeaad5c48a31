import math

import numpy as np
from numpy.testing import assert_allclose

from singular_yamabe.periodic import PeriodGrid
from singular_yamabe.terms import ExpPoly, Series, rate_key


def sample(grid, f):
    return f(grid.t)


def test_antiderivative_nonresonant():
    g = PeriodGrid(2 * math.pi, 64)
    a = ExpPoly(1.5, np.cos(g.t)[None], g)
    A, div = a.antiderivative()
    t = np.linspace(0.3, 5.0, 9)
    # d/dt A = a
    assert_allclose(A.derivative().evaluate(t), a.evaluate(t), atol=1e-13)
    assert div > 0


def test_antiderivative_resonant_raises_power():
    g = PeriodGrid(2 * math.pi, 32)
    a = ExpPoly(0.0, (1.0 + np.cos(g.t))[None], g)
    A, div = a.antiderivative()
    assert A.powers == 1
    t = np.linspace(0.0, 4.0, 7)
    assert_allclose(A.evaluate(t), t + np.sin(t), atol=1e-13)


def test_product_and_rates():
    g = PeriodGrid(1.0, 16)
    a = ExpPoly(1.0, np.ones((1, 16)), g)
    b = ExpPoly(2.0, np.array([np.ones(16), 2 * np.ones(16)]), g)
    c = a * b
    assert c.rate == 3.0 and c.powers == 1
    t = np.array([0.5, 1.5])
    assert_allclose(c.evaluate(t), np.exp(-3 * t) * (1 + 2 * t), rtol=1e-13)


def test_series_truncation_and_keys():
    g = PeriodGrid(1.0, 8)
    s = Series()
    s.add(ExpPoly(1.0, np.ones((1, 8)), g))
    s.add(ExpPoly(rate_key(1.0 + 1e-12), np.ones((1, 8)), g))
    s.add(ExpPoly(3.0, np.ones((1, 8)), g))
    assert s.rates == [1.0, 3.0]
    assert_allclose(s.get(1.0).coeffs, 2.0)
    assert s.truncate(2.0).rates == [1.0]
