"""Acceptance suite: twelve end-to-end criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` or as a script.
"""

import math
import time

import numpy as np
import pytest

from singular_yamabe.approx import build
from singular_yamabe.fields import CylinderField, FieldGrid, weighted_norm
from singular_yamabe.floquet import indicial_root, mode0_basis, mode_system, mode_systems, monodromy
from singular_yamabe.index_set import generate, generate_bfs
from singular_yamabe.linear import LinearSolver, solve_mode_low, truncation_span
from singular_yamabe.nonlinear import ContractionConfig, iterate
from singular_yamabe.radial import (RadialParams, constant_solution, hamiltonian_drift,
                                    radial_residual, solve_periodic)
from singular_yamabe.sphere import RealHarmonicsS2, eigenvalue

RATIOS = (0.1, 0.3, 0.6, 0.9)
DIMS = (3, 4, 6)
CONFIGS = [(n, r) for n in DIMS for r in RATIOS]
REFERENCE = {"n6": (6, None, {1: 0.05}, 2.9), "n3": (3, 0.5, {1: 0.02}, 2.1)}

_profiles = {}


def profile(n, ratio=None):
    key = (n, ratio)
    if key not in _profiles:
        params = RadialParams(n) if ratio is None else RadialParams.from_ratio(n, ratio)
        _profiles[key] = solve_periodic(params)
    return _profiles[key]


def _grid(ap, t0=8.0):
    P = ap.psi.nominal_period
    return FieldGrid.build(t0, P, 11 + 2 * P, 0.005)


def criterion_1():
    worst = max(abs(radial_residual(n, constant_solution(n), 0.0)) for n in range(3, 9))
    return worst < 1e-14, f"max residual {worst:.2e}"


def criterion_2():
    worst = max(hamiltonian_drift(profile(n, r), n_periods=10) for n, r in CONFIGS)
    return worst < 1e-10, f"max relative drift {worst:.2e}"


def criterion_3():
    const = max(abs(indicial_root(profile(n), n - 1) - 1.0) for n in DIMS)
    floq = max(abs(indicial_root(profile(n, r), n - 1) - 1.0) for n, r in CONFIGS)
    return const < 1e-10 and floq < 1e-6, f"constant {const:.2e}, Floquet {floq:.2e}"


def criterion_4():
    worst_psi = 0.0
    for n, r in CONFIGS:
        psi = profile(n, r)
        ms = mode0_basis(psi)
        g = ms.grid
        dpsi = psi.samples(g)[1]
        res = g.deriv(dpsi, 2) + ms.q * dpsi
        worst_psi = max(worst_psi, float(np.max(np.abs(res))))
    worst_cos = 0.0
    for n in DIMS:
        ms = mode_system(profile(n), 0)
        assert ms.kind == "oscillatory"
        g = ms.grid
        c = np.cos(math.sqrt(n - 2) * g.t)
        # the grid spans one nominal period, 2 pi / sqrt(n-2), so cos is periodic on it
        res = g.deriv(c, 2) + ms.q * c
        worst_cos = max(worst_cos, float(np.max(np.abs(res))), *ms.kernel_residuals())
    ok = worst_psi < 1e-8 and worst_cos < 1e-10
    return ok, f"sup|L0 psi'| {worst_psi:.2e}, sup|L0 cos| {worst_cos:.2e}"


def criterion_5():
    worst = 0.0
    for n, r in CONFIGS + [(n, None) for n in DIMS]:
        for k in (0, 1, 2, 4):
            worst = max(worst, abs(monodromy(profile(n, r), eigenvalue(k, n)).det - 1.0))
    return worst < 1e-8, f"max |det M - 1| {worst:.2e}"


def _solver(psi, mu, t0=5.0, D=3, h=0.005):
    basis = RealHarmonicsS2(D)
    systems = mode_systems(psi, D)
    roots = {k: s.rho for k, s in systems.items()}
    grid = FieldGrid.build(t0, psi.nominal_period, truncation_span(roots, mu), h)
    return LinearSolver(psi, basis, grid, mu, systems)


def _random_rhs(L, rng, mu):
    g = L.grid
    c = rng.standard_normal((len(L.basis), 1)) * np.exp(-(mu + rng.uniform(0.1, 0.6)) * g.t)
    c *= 1 + 0.3 * np.cos(rng.uniform(0.5, 3.0) * g.t)
    return CylinderField(g, L.basis, c)


def criterion_6():
    rng = np.random.default_rng(2024)
    worst_rt = worst_lin = 0.0
    for ratio in (None, 0.5):
        for mu in (1.5, 2.5):
            L = _solver(profile(3, ratio), mu)
            for _ in range(5):
                f = _random_rhs(L, rng, mu)
                w = L.invert(f)
                worst_rt = max(worst_rt, weighted_norm(L.apply(w) - f, mu) / weighted_norm(f, mu))
                f2 = _random_rhs(L, rng, mu)
                a = rng.uniform(-3, 3)
                lhs = L.invert(f + f2 * a)
                rhs = w + L.invert(f2) * a
                worst_lin = max(worst_lin, weighted_norm(lhs - rhs, mu) / weighted_norm(lhs, mu))
    ok = worst_rt < 1e-6 and worst_lin < 1e-10
    return ok, f"20 cases: round trip {worst_rt:.2e}, linearity {worst_lin:.2e}"


def criterion_7():
    psi = profile(3, 0.5)
    mu = 1.5
    amps = np.array([0.7, -0.4, 0.3, 0.5, 0.2, -0.6, 0.1, 0.4, -0.3])[:, None]
    ratios = []
    for t0 in (5.0, 10.0, 20.0):
        L = _solver(psi, mu, t0=t0, D=2)
        g = L.grid
        f = CylinderField(g, L.basis, amps * np.exp(-mu * g.t) * (1 + 0.3 * np.cos(1.7 * g.t)))
        ratios.append(L.inverse_bound(f))
    spread = max(ratios) / min(ratios)
    return spread < 2.0, "ratios " + ", ".join(f"{r:.4g}" for r in ratios) + \
        f" (spread {spread:.3f})"


def criterion_8():
    psi = profile(3)
    mu = 2.5
    g = FieldGrid.build(0.0, psi.nominal_period, 25.0, 0.01)
    worst = 0.0
    for degree in (1, 2):
        ms = mode_system(psi, degree)
        assert ms.rho < mu
        w = solve_mode_low(ms, np.exp(-mu * g.t), mu, g)
        exact = np.exp(-mu * g.t) / (mu**2 - ms.rho**2)
        worst = max(worst, float(np.max(np.abs(w / exact - 1.0))))
    return worst < 1e-8, f"max relative error {worst:.2e}"


_approx = {}


def reference_approx(key):
    if key not in _approx:
        n, ratio, seed, mu = REFERENCE[key]
        _approx[key] = build(profile(n, ratio), seed, mu, t0=8.0)
    return _approx[key]


def criterion_9():
    ok, parts = True, []
    for key in REFERENCE:
        ap = reference_approx(key)
        g = _grid(ap)
        pre = ap.seed_only().decay_rate(g)
        post = ap.decay_rate(g)
        grad = ap.gradient_decay_rate(g)
        good = post >= ap.mu - 0.05 and grad >= ap.mu - 0.05 and abs(pre - 2.0) < 0.1
        ok &= good
        parts.append(f"{key}: pre {pre:.3f}, post {post:.3f}, gradient {grad:.3f}")
    return ok, "; ".join(parts)


def criterion_10():
    ok, parts = True, []
    for key in REFERENCE:
        ap = reference_approx(key)
        _, rep = iterate(ap, ContractionConfig(mu=ap.mu))
        good = (rep.converged and rep.contraction_factor < 1.0 and rep.reduction >= 1e3
                and rep.verified_mu >= ap.mu - 0.05 and math.isfinite(rep.C_prime))
        ok &= good
        parts.append(f"{key}: factor {rep.contraction_factor:.2e}, reduction "
                     f"{rep.reduction:.2e}, verified {rep.verified_mu:.3f}, C' {rep.C_prime:.3g}")
    return ok, "; ".join(parts)


def criterion_11():
    ap = build(profile(3, 0.5), {}, 2.1)
    sol, rep = iterate(ap, ContractionConfig(mu=2.1))
    ok = rep.n_iter == 1 and bool(np.all(sol.w.coeffs == 0.0))
    return ok, f"iterations {rep.n_iter}, max |w| {np.max(np.abs(sol.w.coeffs)):.1e}"


def criterion_12():
    worst, sizes = 0.0, []
    for n in DIMS:
        psi = profile(n)
        roots = []
        for k in range(1, 40):
            r = indicial_root(psi, eigenvalue(k, n))
            if r > 4.0:
                break
            roots.append(r)
        for k in (1, 2):
            a = generate(roots, 4.0, k)
            b = generate_bfs(roots, 4.0, k)
            if len(a) != len(b):
                return False, f"n={n}: sizes {len(a)} and {len(b)} differ"
            worst = max(worst, float(np.max(np.abs(np.asarray(a.elements) -
                                                   np.asarray(b.elements)), initial=0.0)))
            sizes.append(len(a))
    return worst < 1e-9, f"max difference {worst:.1e}, set sizes {sizes}"


CRITERIA = {
    1: ("constant solution residual", criterion_1),
    2: ("Hamiltonian conservation", criterion_2),
    3: ("first indicial root equals one", criterion_3),
    4: ("kernel residuals", criterion_4),
    5: ("monodromy determinant", criterion_5),
    6: ("inverse round trip and linearity", criterion_6),
    7: ("uniformity in t0", criterion_7),
    8: ("low-mode closed form", criterion_8),
    9: ("approximate-solution order", criterion_9),
    10: ("contraction and verified decay", criterion_10),
    11: ("trivial fixed point", criterion_11),
    12: ("depth-first and breadth-first index sets agree", criterion_12),
}


def run(number):
    name, fn = CRITERIA[number]
    start = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash counts as a failure with its message
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    line = (f"{'PASS' if ok else 'FAIL'} [{number:2d}] {name}: {detail} "
            f"({time.perf_counter() - start:.1f} s)")
    return ok, line


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    ok, line = run(number)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [run(k) for k in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    print(f"{sum(ok for ok, _ in results)}/{len(results)} criteria passed")
