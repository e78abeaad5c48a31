import pytest

from singular_yamabe.approx import build
from singular_yamabe.radial import RadialParams, solve_periodic


@pytest.fixture(scope="session")
def profile():
    cache = {}

    def get(n, ratio=None):
        key = (n, ratio)
        if key not in cache:
            params = RadialParams(n) if ratio is None else RadialParams.from_ratio(n, ratio)
            cache[key] = solve_periodic(params)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def reference_approx(profile):
    """The two reference configurations: (n=6 constant) and (n=3, 0.5 psi_c)."""
    return {
        "n6": build(profile(6), {1: 0.05}, 2.9, t0=8.0),
        "n3": build(profile(3, 0.5), {1: 0.02}, 2.1, t0=8.0),
    }
