"""Uniform grids over one period and Fourier utilities on them."""

from __future__ import annotations

import numpy as np


class PeriodGrid:
    """Uniform sample points ``t_k = k P / M`` over one period ``[0, P)``.

    Functions with period ``P`` are stored as their samples on this grid
    (last axis of an array). Derivatives, antiderivatives and interpolation
    are done through the discrete Fourier transform. The Nyquist component of
    even-sized grids is discarded, since it carries no well-defined derivative.

    Parameters
    ----------
    period : float
        Period ``P > 0``.
    size : int
        Number of samples ``M``.
    """

    def __init__(self, period: float, size: int):
        if not period > 0 or not np.isfinite(period):
            raise ValueError(f"period must be positive and finite, got {period}")
        if size < 4:
            raise ValueError(f"grid size must be >= 4, got {size}")
        self.period = float(period)
        self.size = int(size)
        self.t = np.arange(self.size) * (self.period / self.size)
        self.omega = 2.0 * np.pi * np.fft.fftfreq(self.size, d=self.period / self.size)
        self._nyquist = self.size // 2 if self.size % 2 == 0 else None

    def __repr__(self) -> str:
        return f"PeriodGrid(period={self.period!r}, size={self.size})"

    def __eq__(self, other) -> bool:
        return (isinstance(other, PeriodGrid) and other.size == self.size
                and other.period == self.period)

    def __hash__(self):
        return hash((self.period, self.size))

    def spectrum(self, values: np.ndarray) -> np.ndarray:
        """Normalized DFT coefficients ``c_k`` with ``f(t) = sum c_k e^{i w_k t}``."""
        c = np.fft.fft(values, axis=-1) / self.size
        if self._nyquist is not None:
            c[..., self._nyquist] = 0.0
        return c

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.ifft(coeffs * self.size, axis=-1).real

    def deriv(self, values: np.ndarray, order: int = 1) -> np.ndarray:
        """Spectral derivative of periodic samples."""
        c = self.spectrum(values)
        return self.synthesize(c * (1j * self.omega) ** order)

    def mean(self, values: np.ndarray) -> np.ndarray:
        return np.mean(values, axis=-1)

    def interpolation_matrix(self, t: np.ndarray) -> np.ndarray:
        """Real matrix ``E`` with ``E @ samples`` = trigonometric interpolant at ``t``."""
        t = np.asarray(t, dtype=float)
        phase = np.exp(1j * np.outer(np.mod(t, self.period), self.omega))
        if self._nyquist is not None:
            phase[:, self._nyquist] = 0.0
        # columns of the inverse DFT applied to unit samples
        dft = np.exp(-1j * np.outer(self.omega, self.t)) / self.size
        return (phase @ dft).real

    def interpolate(self, values: np.ndarray, t) -> np.ndarray:
        """Evaluate the trigonometric interpolant of ``values`` at times ``t``."""
        t = np.asarray(t, dtype=float)
        c = self.spectrum(values)
        phase = np.exp(1j * np.multiply.outer(np.mod(t, self.period), self.omega))
        return np.real(np.tensordot(c, phase, axes=([-1], [-1])))

    def tail_fraction(self, values: np.ndarray, start: float = 0.25) -> float:
        """Largest spectral magnitude above ``start * M`` relative to the largest overall."""
        mag = np.abs(np.fft.rfft(values, axis=-1))
        top = float(np.max(mag))
        if top == 0.0:
            return 0.0
        k0 = int(np.ceil(start * self.size))
        return float(np.max(mag[..., k0:])) / top if k0 < mag.shape[-1] else 0.0
