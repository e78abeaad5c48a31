import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from singular_yamabe.exceptions import OutOfRangeError
from singular_yamabe.index_set import check_mu, generate, generate_bfs, resonances

S5, S11 = math.sqrt(5), math.sqrt(11)


def test_integer_multiples():
    assert_allclose(generate([1.0], 3.5).elements, [1, 2, 3])


def test_constant_three_dimensional():
    assert_allclose(generate([1.0, S5, S11], 3.0).elements, [1, 2, S5, 3])


def test_min_coeff_sum_two():
    idx = generate([1.0, S5], 3.3, min_coeff_sum=2)
    assert_allclose(idx.elements, [2, 3, 1 + S5])


def test_witnesses_reproduce_values():
    idx = generate([1.0, S5, S11], 6.0)
    for k, e in enumerate(idx.elements):
        assert_allclose(idx.reproduce(k), e, rtol=1e-14)
    assert idx.witness_string(1) == "2*1"


def test_admissibility():
    idx = generate([1.0, S5, S11], 3.5)
    res = check_mu(idx, 2.5)
    assert res.admissible
    assert_allclose(res.nearest, S5)
    bad = check_mu(idx, 2.0)
    assert not bad.admissible and bad.nearest == 2.0 and bad.distance == 0.0
    low = check_mu(idx, 1.0)
    assert not low.admissible and "exceed 1" in low.reason
    with pytest.raises(OutOfRangeError):
        check_mu(idx, 4.0)


def test_resonances():
    assert resonances([1.0, S5, S11], 3.0) == []
    res = resonances([1.0, 2.0], 3.0)
    assert [(r.root, r.witness) for r in res] == [(2.0, (2, 0))]
    res = resonances([1.0, S5, 1 + S5], 4.0)
    assert len(res) == 1
    assert_allclose(res[0].root, 1 + S5)
    assert res[0].witness == (1, 1, 0)


@settings(max_examples=40, deadline=None)
@given(roots=st.lists(st.floats(0.3, 3.0), min_size=1, max_size=4),
       mu_max=st.floats(0.5, 5.0), k=st.integers(1, 3))
def test_depth_first_matches_breadth_first(roots, mu_max, k):
    a = generate(roots, mu_max, k)
    b = generate_bfs(roots, mu_max, k)
    assert len(a) == len(b)
    assert_allclose(a.elements, b.elements, atol=1e-9)


def test_elements_sorted_and_bounded():
    idx = generate([1.3, 2.0, 0.7], 4.0)
    assert np.all(np.diff(idx.elements) > 0)
    assert idx.elements.max() <= 4.0 + 1e-9
    assert 1.4 in idx and 1.5 not in idx
