"""Phase-space evaluation of Fock-basis states and Wigner grids.

Wigner functions are in internal units: the vacuum is ``exp(-(x**2+p**2))/pi``
and ``Tr(rho sigma) = 2*pi * integral(W_rho * W_sigma)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


def iter_cross_terms(x, p, dim: int):
    r"""Yield ``(m, n, T)`` for ``0 <= m <= n < dim``.

    ``T`` is the Wigner function of the operator :math:`|m\rangle\langle n|`,
    built with the Laguerre three-term recursion in
    :math:`\alpha = (x + ip)/\sqrt{2}`; it stays stable well past the point
    where explicit Laguerre polynomials lose precision. Only one row of the
    upper triangle is kept in memory.
    """
    x, p = np.broadcast_arrays(np.asarray(x, float), np.asarray(p, float))
    a = (x + 1j * p) / np.sqrt(2.0)
    work = [None] * dim
    work[0] = (np.exp(-2.0 * np.abs(a) ** 2) / np.pi).astype(complex)
    yield 0, 0, work[0]
    for n in range(1, dim):
        work[n] = 2.0 * a * work[n - 1] / np.sqrt(n)
        yield 0, n, work[n]
    for m in range(1, dim):
        prev = work[m]
        work[m] = (2.0 * np.conj(a) * prev - np.sqrt(m) * work[m - 1]) / np.sqrt(m)
        yield m, m, work[m]
        for n in range(m + 1, dim):
            nxt = (2.0 * a * work[n - 1] - np.sqrt(m) * prev) / np.sqrt(n)
            prev = work[n]
            work[n] = nxt
            yield m, n, work[n]


def wigner_values(rho: np.ndarray, x, p) -> np.ndarray:
    """Evaluate the Wigner function of density matrix ``rho`` at points ``(x, p)``."""
    rho = np.asarray(rho)
    total = None
    for m, n, term in iter_cross_terms(x, p, rho.shape[0]):
        if m == n:
            contrib = np.real(rho[m, m]) * np.real(term)
        else:
            contrib = 2.0 * np.real(rho[m, n] * term)
        total = contrib if total is None else total + contrib
    return total


def density_from_wigner_samples(values, x, p, weights, dim: int) -> np.ndarray:
    """Fock matrix elements of a Wigner function given on quadrature nodes.

    Evaluates ``rho[m, n] = 2*pi * sum(weights * W * conj(W_{|m><n|}))`` so that
    any rule exact (or spectrally accurate) for the integrand gives the
    overlap ``Tr(rho |n><m|)``.
    """
    rho = np.zeros((dim, dim), dtype=complex)
    wv = np.asarray(weights) * np.asarray(values)
    for m, n, term in iter_cross_terms(x, p, dim):
        # Tr(rho |n><m|) = rho[m, n]; W_{|n><m|} = conj(W_{|m><n|})
        val = 2.0 * np.pi * np.sum(wv * np.conj(term))
        rho[m, n] = val
        rho[n, m] = np.conj(val)
    return rho


@dataclass(frozen=True)
class GridAxis:
    """A symmetric, uniformly spaced axis in internal units."""

    min: float
    max: float
    step: float

    def __post_init__(self):
        if self.step <= 0 or self.max <= self.min:
            raise DomainError("grid axis needs max > min and step > 0")
        if not np.isclose(self.min, -self.max, rtol=0, atol=1e-12):
            raise DomainError("grid axes must be symmetric about 0")

    @property
    def size(self) -> int:
        return int(round((self.max - self.min) / self.step)) + 1

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.size)

    @classmethod
    def symmetric(cls, half_width: float = 6.0, size: int = 601) -> "GridAxis":
        return cls(-half_width, half_width, 2 * half_width / (size - 1))


DEFAULT_AXIS = GridAxis.symmetric(6.0, 601)


@dataclass(frozen=True)
class WignerGrid:
    """Wigner function sampled on a rectangular grid; ``values[i, j]`` is at ``(x[i], p[j])``."""

    x_axis: GridAxis
    p_axis: GridAxis
    values: np.ndarray
    units: str = "internal"

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.x_axis.size, self.p_axis.size):
            raise DomainError(
                f"values shape {values.shape} does not match axes "
                f"({self.x_axis.size}, {self.p_axis.size})"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def x(self) -> np.ndarray:
        return self.x_axis.points

    @property
    def p(self) -> np.ndarray:
        return self.p_axis.points

    def integral(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.values, self.p, axis=1), self.x))

    def minimum(self) -> tuple[float, float, float]:
        """Smallest grid value and its location ``(value, x, p)``."""
        i, j = np.unravel_index(np.argmin(self.values), self.values.shape)
        return float(self.values[i, j]), float(self.x[i]), float(self.p[j])

    @classmethod
    def from_function(cls, func, x_axis: GridAxis = DEFAULT_AXIS, p_axis: GridAxis | None = None):
        p_axis = x_axis if p_axis is None else p_axis
        X, P = np.meshgrid(x_axis.points, p_axis.points, indexing="ij")
        return cls(x_axis, p_axis, func(X, P))


def check_coverage(grid: WignerGrid, expected: float = 1.0, tol: float = 1e-4) -> float:
    """Warn if the grid misses more than ``tol`` of the expected mass; return the mass."""
    mass = grid.integral()
    if abs(mass - expected) > tol:
        warnings.warn(
            f"Wigner grid captures {mass:.6f} of the expected mass {expected}; widen the grid",
            RuntimeWarning,
            stacklevel=2,
        )
    return mass


def wigner_grid_of_density(rho: np.ndarray, x_axis: GridAxis = DEFAULT_AXIS, p_axis: GridAxis | None = None) -> WignerGrid:
    return WignerGrid.from_function(lambda X, P: wigner_values(rho, X, P), x_axis, p_axis)
