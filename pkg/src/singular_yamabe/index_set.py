"""Positive-integer combinations of indicial roots.

The index set is every finite sum ``sum m_i rho_i`` with ``m_i`` non-negative
integers, not all zero. Its subset with coefficient sum at least 2 holds the
orders generated by nonlinear interactions; a root lying in that subset is a
resonance.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ._validation import check_real
from .exceptions import InvalidParameterError, OutOfRangeError

TOL_ADMIT = 1e-3


def _distinct_roots(roots, tol):
    vals = sorted(float(r) for r in roots)
    if any(not r > 0 for r in vals):
        raise InvalidParameterError("indicial roots must be positive")
    distinct: list[float] = []
    counts: list[int] = []
    for r in vals:
        if distinct and abs(r - distinct[-1]) <= tol:
            counts[-1] += 1
        else:
            distinct.append(r)
            counts.append(1)
    return tuple(distinct), tuple(counts)


@dataclass(frozen=True)
class IndexSet:
    """Sorted, deduplicated combination values with one witness each.

    Attributes
    ----------
    roots : tuple of float
        Distinct generating roots (merged within ``tol``).
    multiplicity : tuple of int
        How many input roots merged into each distinct root.
    elements : numpy.ndarray
        Strictly increasing combination values in ``(0, mu_max]``.
    witnesses : tuple of tuple of int
        Coefficient vector (aligned with ``roots``) realizing each element.
    """

    roots: tuple
    multiplicity: tuple
    elements: np.ndarray
    witnesses: tuple
    mu_max: float
    min_coeff_sum: int
    tol: float

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements.tolist())

    def __contains__(self, value) -> bool:
        return self.locate(float(value)) is not None

    def locate(self, value: float, tol: float | None = None) -> int | None:
        """Position of an element within ``tol`` of ``value``, if any."""
        tol = self.tol if tol is None else tol
        if not len(self.elements):
            return None
        k = int(np.argmin(np.abs(self.elements - value)))
        return k if abs(self.elements[k] - value) <= tol else None

    def below(self, mu: float) -> np.ndarray:
        return self.elements[self.elements < mu - self.tol]

    def witness_string(self, k: int) -> str:
        terms = [f"{m}*{r:.10g}" for m, r in zip(self.witnesses[k], self.roots) if m]
        return "+".join(terms)

    def reproduce(self, k: int) -> float:
        return float(np.dot(self.witnesses[k], self.roots))


def _finish(roots, counts, found, mu_max, min_coeff_sum, tol):
    """Sort and deduplicate ``(value, witness)`` pairs."""
    found.sort()
    elements: list[float] = []
    witnesses: list[tuple] = []
    for value, wit in found:
        if elements and value - elements[-1] <= tol:
            continue
        elements.append(value)
        witnesses.append(wit)
    return IndexSet(roots, counts, np.asarray(elements, dtype=float), tuple(witnesses),
                    float(mu_max), int(min_coeff_sum), float(tol))


def generate(roots, mu_max: float, min_coeff_sum: int = 1, tol: float | None = None) -> IndexSet:
    """Enumerate combinations of ``roots`` up to ``mu_max`` depth-first.

    Parameters
    ----------
    roots : iterable of float
        Positive indicial roots; repeats (within ``tol``) are merged.
    mu_max : float
        Largest value kept.
    min_coeff_sum : int
        Keep only combinations whose coefficients sum to at least this.
    tol : float, optional
        Deduplication tolerance, default ``1e-9 * mu_max``.

    Returns
    -------
    IndexSet
    """
    mu_max = check_real(mu_max, "mu_max", positive=True)
    tol = 1e-9 * mu_max if tol is None else float(tol)
    roots, counts = _distinct_roots(roots, tol) if len(list(roots)) else ((), ())
    found: list[tuple[float, tuple]] = []
    coeffs = [0] * len(roots)
    limit = mu_max + tol

    def dfs(j: int, total: float, csum: int):
        if j == len(roots):
            if csum >= min_coeff_sum and csum > 0:
                found.append((float(np.dot(coeffs, roots)), tuple(coeffs)))
            return
        m = 0
        while total + m * roots[j] <= limit:
            coeffs[j] = m
            dfs(j + 1, total + m * roots[j], csum + m)
            m += 1
        coeffs[j] = 0

    dfs(0, 0.0, 0)
    return _finish(roots, counts, found, mu_max, min_coeff_sum, tol)


def generate_bfs(roots, mu_max: float, min_coeff_sum: int = 1,
                 tol: float | None = None) -> IndexSet:
    """Breadth-first enumeration of the same set (independent oracle)."""
    mu_max = check_real(mu_max, "mu_max", positive=True)
    tol = 1e-9 * mu_max if tol is None else float(tol)
    roots, counts = _distinct_roots(roots, tol) if len(list(roots)) else ((), ())
    k = len(roots)
    seen = set()
    queue = deque()
    for j in range(k):
        unit = tuple(1 if i == j else 0 for i in range(k))
        if roots[j] <= mu_max + tol:
            queue.append(unit)
            seen.add(unit)
    found = []
    while queue:
        vec = queue.popleft()
        value = sum(m * r for m, r in zip(vec, roots))
        if sum(vec) >= min_coeff_sum:
            found.append((float(np.dot(vec, roots)), vec))
        for j in range(k):
            child = vec[:j] + (vec[j] + 1,) + vec[j + 1:]
            if child not in seen and value + roots[j] <= mu_max + tol:
                seen.add(child)
                queue.append(child)
    return _finish(roots, counts, found, mu_max, min_coeff_sum, tol)


@dataclass(frozen=True)
class MuCheck:
    """Outcome of an admissibility test for a decay order."""

    mu: float
    admissible: bool
    nearest: float | None
    distance: float
    reason: str = ""

    def __bool__(self) -> bool:
        return self.admissible


def check_mu(index: IndexSet, mu: float, tol_admit: float = TOL_ADMIT) -> MuCheck:
    """Test whether ``mu > 1`` stays at least ``tol_admit`` away from every element.

    Raises
    ------
    OutOfRangeError
        If ``mu`` exceeds the range covered by ``index``.
    """
    mu = check_real(mu, "mu")
    if mu > index.mu_max + index.tol:
        raise OutOfRangeError(f"mu={mu} exceeds the enumerated range mu_max={index.mu_max}",
                              mu=mu, mu_max=index.mu_max)
    if len(index.elements):
        k = int(np.argmin(np.abs(index.elements - mu)))
        nearest = float(index.elements[k])
        dist = abs(nearest - mu)
    else:
        nearest, dist = None, float("inf")
    if not mu > 1.0:
        return MuCheck(mu, False, nearest, dist, "mu must exceed 1")
    if dist <= tol_admit:
        return MuCheck(mu, False, nearest, dist,
                       f"mu is within {dist:.3g} of index element {nearest:.10g}")
    return MuCheck(mu, True, nearest, dist, "")


@dataclass(frozen=True)
class Resonance:
    root: float
    witness: tuple
    roots: tuple

    def __iter__(self):
        return iter((self.root, self.witness))


def resonances(roots, mu_max: float, tol: float | None = None) -> list[Resonance]:
    """Roots that coincide (within ``tol``) with a combination of coefficient sum >= 2."""
    interactions = generate(roots, mu_max, min_coeff_sum=2, tol=tol)
    out = []
    for r in interactions.roots:
        k = interactions.locate(r)
        if k is not None and r <= mu_max + interactions.tol:
            out.append(Resonance(r, interactions.witnesses[k], interactions.roots))
    return out
