"""Exact algebra of exponential-polynomial-periodic terms.

A term block is ``e^(-r t) sum_j t^j c_j(t)`` where each ``c_j`` is a periodic
function sampled on a shared :class:`~singular_yamabe.periodic.PeriodGrid`,
possibly carrying extra channel axes (one per harmonic). Products,
derivatives and antiderivatives stay inside this class, so the order-by-order
construction only incurs Fourier quadrature error in the periodic factors.
"""

from __future__ import annotations

import math

import numpy as np

from .periodic import PeriodGrid

RATE_DIGITS = 9


def rate_key(rate: float) -> float:
    """Canonical dictionary key for a decay rate."""
    return round(float(rate), RATE_DIGITS) + 0.0


class ExpPoly:
    """``e^(-rate t) sum_j t^j c_j(t)`` with periodic samples ``coeffs[j]``.

    Parameters
    ----------
    rate : float
    coeffs : numpy.ndarray
        Shape ``(J + 1, *channels, M)``.
    grid : PeriodGrid
    """

    __slots__ = ("rate", "coeffs", "grid")

    def __init__(self, rate: float, coeffs, grid: PeriodGrid):
        self.rate = float(rate)
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.grid = grid
        if self.coeffs.ndim < 2 or self.coeffs.shape[-1] != grid.size:
            raise ValueError(f"coefficient shape {self.coeffs.shape} does not match the grid")

    def __repr__(self) -> str:
        return f"ExpPoly(rate={self.rate:.10g}, powers={self.powers}, shape={self.coeffs.shape})"

    @classmethod
    def periodic(cls, samples, grid: PeriodGrid, rate: float = 0.0) -> "ExpPoly":
        return cls(rate, np.asarray(samples, dtype=float)[None], grid)

    @property
    def powers(self) -> int:
        """Highest power of ``t`` present."""
        return self.coeffs.shape[0] - 1

    @property
    def channels(self) -> tuple:
        return self.coeffs.shape[1:-1]

    def sup(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def trimmed(self, tol: float = 0.0) -> "ExpPoly":
        """Drop trailing powers whose coefficients are at most ``tol``."""
        c = self.coeffs
        J = c.shape[0]
        while J > 1 and np.max(np.abs(c[J - 1])) <= tol:
            J -= 1
        return ExpPoly(self.rate, c[:J], self.grid)

    def with_rate(self, rate: float) -> "ExpPoly":
        return ExpPoly(rate, self.coeffs, self.grid)

    def __neg__(self):
        return ExpPoly(self.rate, -self.coeffs, self.grid)

    def scale(self, factor) -> "ExpPoly":
        """Multiply by a scalar or by periodic samples broadcastable to ``(*channels, M)``."""
        return ExpPoly(self.rate, self.coeffs * np.asarray(factor), self.grid)

    def __add__(self, other: "ExpPoly") -> "ExpPoly":
        if abs(other.rate - self.rate) > 10.0 ** -RATE_DIGITS:
            raise ValueError(f"cannot add blocks with rates {self.rate} and {other.rate}")
        J = max(self.powers, other.powers) + 1
        shape = np.broadcast_shapes(self.coeffs.shape[1:], other.coeffs.shape[1:])
        out = np.zeros((J,) + shape)
        out[: self.powers + 1] += self.coeffs
        out[: other.powers + 1] += other.coeffs
        return ExpPoly(self.rate, out, self.grid)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, ExpPoly):
            return self.scale(other)
        J = self.powers + other.powers + 1
        shape = np.broadcast_shapes(self.coeffs.shape[1:], other.coeffs.shape[1:])
        out = np.zeros((J,) + shape)
        for j1 in range(self.powers + 1):
            for j2 in range(other.powers + 1):
                out[j1 + j2] += self.coeffs[j1] * other.coeffs[j2]
        return ExpPoly(self.rate + other.rate, out, self.grid)

    def derivative(self) -> "ExpPoly":
        """Exact ``d/dt`` (spectral in the periodic factors)."""
        c = self.coeffs
        d = self.grid.deriv(c) - self.rate * c
        d[:-1] += np.arange(1, c.shape[0]).reshape((-1,) + (1,) * (c.ndim - 1)) * c[1:]
        return ExpPoly(self.rate, d, self.grid)

    def antiderivative(self, resonance_tol: float = 1e-8) -> tuple["ExpPoly", float]:
        """Exact antiderivative within the same function class.

        Each Fourier component ``t^j e^(z t)`` with ``z = -rate + i omega_k``
        integrates to ``e^(z t) sum_l (-1)^l j!/(j-l)! t^(j-l) / z^(l+1)``;
        a component with ``|z| <= resonance_tol`` (zero frequency at zero rate)
        integrates to ``t^(j+1)/(j+1)`` and raises the polynomial degree.
        For positive rates this is ``-int_t^inf``; for negative rates it is
        the unique antiderivative without a constant term.

        Returns
        -------
        ExpPoly
            Antiderivative.
        float
            Smallest ``|z|`` among the non-resonant components that carry
            data (the small divisor of this integration).
        """
        g = self.grid
        c_hat = g.spectrum(self.coeffs)
        J = self.powers
        z = -self.rate + 1j * g.omega
        resonant = np.abs(z) <= resonance_tol
        if abs(self.rate) <= resonance_tol:
            rate = 0.0
            z = 1j * g.omega
            resonant = g.omega == 0
        else:
            rate = self.rate
        significant = np.any(np.abs(c_hat.reshape(J + 1, -1, g.size)) >
                             1e-14 * max(np.max(np.abs(c_hat)), 1e-300), axis=(0, 1))
        nonres = significant & ~resonant
        divisor = float(np.min(np.abs(z[nonres]))) if np.any(nonres) else math.inf
        zz = np.where(resonant, 1.0, z)
        has_res = bool(np.any(np.abs(c_hat[..., resonant]) > 0))
        out = np.zeros((J + 2,) + c_hat.shape[1:], dtype=complex)
        for j in range(J + 1):
            cj = np.where(resonant, 0.0, c_hat[j])
            fact = 1.0
            for l in range(j + 1):
                # (-1)^l j!/(j-l)! / z^(l+1)
                out[j - l] += ((-1) ** l) * fact * cj / zz ** (l + 1)
                fact *= (j - l)
            if has_res:
                out[j + 1] += np.where(resonant, c_hat[j], 0.0) / (j + 1)
        if not has_res:
            out = out[:-1]
        return ExpPoly(rate, g.synthesize(out), g), divisor

    def evaluate(self, t) -> np.ndarray:
        """Values at times ``t`` (channels first, time last)."""
        t = np.asarray(t, dtype=float)
        vals = self.grid.interpolate(self.coeffs, t)  # (J+1, *ch, len(t))
        powers = t[None, :] ** np.arange(self.powers + 1)[:, None]
        powers = powers.reshape((self.powers + 1,) + (1,) * len(self.channels) + t.shape)
        return np.exp(-self.rate * t) * np.sum(vals * powers, axis=0)

    def on_field_grid(self, fgrid) -> np.ndarray:
        """Values on a :class:`~singular_yamabe.fields.FieldGrid` using tiled periodic data."""
        t = fgrid.t
        out = 0.0
        for j in range(self.powers, -1, -1):
            out = out * t + fgrid.periodic(self.coeffs[j], self.grid)
        return np.exp(-self.rate * t) * out


def angular_product(a: ExpPoly, b: ExpPoly, triple: np.ndarray) -> ExpPoly:
    """Product of two harmonic expansions using the triple-product tensor."""
    J = a.powers + b.powers + 1
    out = np.zeros((J,) + a.coeffs.shape[1:])
    for j1 in range(a.powers + 1):
        for j2 in range(b.powers + 1):
            out[j1 + j2] += np.einsum("ijm,ia,ja->ma", triple, a.coeffs[j1], b.coeffs[j2],
                                      optimize=True)
    return ExpPoly(a.rate + b.rate, out, a.grid)


class Series:
    """Finite sum of multi-harmonic term blocks keyed by decay rate."""

    def __init__(self, blocks=None):
        self.blocks: dict[float, ExpPoly] = {}
        for blk in (blocks or []):
            self.add(blk)

    def __repr__(self) -> str:
        rates = ", ".join(f"{r:.6g}" for r in self.rates)
        return f"Series(rates=[{rates}])"

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def rates(self) -> list[float]:
        return sorted(self.blocks)

    def items(self):
        return [(r, self.blocks[r]) for r in self.rates]

    def get(self, rate: float) -> ExpPoly | None:
        return self.blocks.get(rate_key(rate))

    def add(self, block: ExpPoly) -> "Series":
        key = rate_key(block.rate)
        blk = block.with_rate(key)
        self.blocks[key] = self.blocks[key] + blk if key in self.blocks else blk
        return self

    def copy(self) -> "Series":
        return Series(list(self.blocks.values()))

    def __add__(self, other: "Series") -> "Series":
        out = self.copy()
        for blk in other.blocks.values():
            out.add(blk)
        return out

    def scale(self, factor) -> "Series":
        return Series([b.scale(factor) for b in self.blocks.values()])

    def truncate(self, cut: float) -> "Series":
        return Series([b for r, b in self.blocks.items() if r <= cut + 10.0 ** -RATE_DIGITS])

    def product(self, other: "Series", triple: np.ndarray, cut: float) -> "Series":
        """Angular product keeping only rates ``<= cut``."""
        out = Series()
        for ra, a in self.items():
            for rb, b in other.items():
                if ra + rb <= cut + 10.0 ** -RATE_DIGITS:
                    out.add(angular_product(a, b, triple))
        return out

    def map(self, fn) -> "Series":
        return Series([fn(b) for b in self.blocks.values()])

    def on_field_grid(self, fgrid, n_modes: int) -> np.ndarray:
        out = np.zeros((n_modes, fgrid.size))
        for blk in self.blocks.values():
            out += blk.on_field_grid(fgrid)
        return out

    def sup(self) -> float:
        return max((b.sup() for b in self.blocks.values()), default=0.0)
