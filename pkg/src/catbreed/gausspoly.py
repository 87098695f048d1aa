"""Exact algebra for functions ``P(v) * exp(-v^T M v)``.

``P`` is a real polynomial stored as a dense coefficient tensor ``c`` with
``c[a_1, ..., a_n]`` the coefficient of ``v_1**a_1 ... v_n**a_n``; ``M`` is a
symmetric positive semi-definite matrix (positive definite before any
integration). The family is closed under products, linear changes of
variables and Gaussian integration over a subset of the variables, which is
all that beamsplitters, quadrature conditioning and loss require.

Linear substitutions are done by evaluating the polynomial on a grid of roots
of unity and reading the coefficients back with an FFT; the transform is
unitary, so no Vandermonde ill-conditioning enters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import DomainError


def _double_factorial_moments(deg: int) -> np.ndarray:
    """``E[w**j]`` for a standard normal ``w``, ``j = 0..deg``."""
    out = np.zeros(deg + 1)
    out[0] = 1.0
    for j in range(2, deg + 1, 2):
        out[j] = out[j - 2] * (j - 1)
    return out


def _trim(coeffs: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Shrink every axis to the largest exponent with a nonzero coefficient."""
    c = coeffs
    if c.ndim == 0:
        return c
    mask = np.abs(c) > tol
    if not mask.any():
        return np.zeros((1,) * c.ndim)
    slices = []
    for ax in range(c.ndim):
        other = tuple(i for i in range(c.ndim) if i != ax)
        used = np.nonzero(mask.any(axis=other) if other else mask)[0]
        slices.append(slice(0, int(used[-1]) + 1))
    return c[tuple(slices)]


@dataclass(frozen=True)
class GaussPoly:
    precision: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        prec = np.array(self.precision, dtype=float)
        coeffs = np.array(self.coeffs, dtype=float)
        n = prec.shape[0]
        if prec.shape != (n, n) or coeffs.ndim != n:
            raise DomainError("precision must be n x n with an n-dimensional coefficient tensor")
        prec = 0.5 * (prec + prec.T)
        prec.flags.writeable = False
        coeffs.flags.writeable = False
        object.__setattr__(self, "precision", prec)
        object.__setattr__(self, "coeffs", coeffs)

    # -- basic properties -------------------------------------------------

    @property
    def nvars(self) -> int:
        return self.precision.shape[0]

    @property
    def degree(self) -> int:
        """Total degree of the polynomial factor."""
        idx = np.argwhere(self.coeffs != 0)
        return int(idx.sum(axis=1).max()) if idx.size else 0

    def monomials(self):
        """Nonzero ``(exponents, coefficient)`` pairs."""
        for idx in np.argwhere(self.coeffs != 0):
            yield tuple(int(i) for i in idx), float(self.coeffs[tuple(idx)])

    @classmethod
    def gaussian(cls, precision, scale: float = 1.0) -> "GaussPoly":
        precision = np.atleast_2d(precision)
        return cls(precision, np.full((1,) * precision.shape[0], float(scale)))

    # -- evaluation -------------------------------------------------------

    def poly_values(self, *points):
        """Polynomial factor only, at broadcastable (possibly complex) points."""
        pts = np.broadcast_arrays(*[np.asarray(p) for p in points])
        if len(pts) != self.nvars:
            raise DomainError(f"expected {self.nvars} coordinates, got {len(pts)}")
        out = np.zeros(pts[0].shape, dtype=np.result_type(float, *pts))
        shape = self.coeffs.shape
        powers = []
        for ax, p in enumerate(pts):
            pw = [np.ones_like(p, dtype=out.dtype)]
            for _ in range(1, shape[ax]):
                pw.append(pw[-1] * p)
            powers.append(pw)
        for exps, c in self.monomials():
            term = c
            for ax, e in enumerate(exps):
                if e:
                    term = term * powers[ax][e]
            out = out + term
        return out

    def __call__(self, *points):
        pts = np.broadcast_arrays(*[np.asarray(p, dtype=float) for p in points])
        v = np.stack(pts, axis=-1)
        quad = np.einsum("...i,ij,...j->...", v, self.precision, v)
        return self.poly_values(*pts) * np.exp(-quad)

    # -- algebra ----------------------------------------------------------

    def __mul__(self, other):
        if np.isscalar(other):
            return GaussPoly(self.precision, self.coeffs * float(other))
        if other.nvars != self.nvars:
            raise DomainError("cannot multiply GaussPoly objects of different dimension")
        coeffs = signal.convolve(self.coeffs, other.coeffs, method="direct")
        return GaussPoly(self.precision + other.precision, _trim(coeffs))

    __rmul__ = __mul__

    def __add__(self, other):
        """Sum of two terms sharing the same Gaussian factor."""
        if not np.allclose(self.precision, other.precision, rtol=0, atol=1e-14):
            raise DomainError("GaussPoly sums require identical Gaussian factors")
        shape = tuple(max(a, b) for a, b in zip(self.coeffs.shape, other.coeffs.shape))
        out = np.zeros(shape)
        out[tuple(slice(0, s) for s in self.coeffs.shape)] += self.coeffs
        out[tuple(slice(0, s) for s in other.coeffs.shape)] += other.coeffs
        return GaussPoly(self.precision, out)

    def with_gaussian(self, extra_precision) -> "GaussPoly":
        """Multiply by ``exp(-v^T E v)``."""
        return GaussPoly(self.precision + np.asarray(extra_precision, float), self.coeffs)

    def substitute(self, transform) -> "GaussPoly":
        """Change variables, ``v = T u``; ``T`` has shape ``(nvars, new_nvars)``."""
        T = np.atleast_2d(np.asarray(transform, dtype=float))
        if T.shape[0] != self.nvars:
            raise DomainError(f"transform must have {self.nvars} rows")
        m = T.shape[1]
        deg = self.degree
        size = deg + 1
        roots = np.exp(2j * np.pi * np.arange(size) / size)
        grids = np.meshgrid(*([roots] * m), indexing="ij")
        u = np.stack(grids, axis=0)  # (m, size, ..., size)
        old = np.tensordot(T, u, axes=(1, 0))  # (nvars, size, ...)
        vals = self.poly_values(*old)
        coeffs = np.fft.fftn(vals) / size**m
        coeffs = np.real(coeffs)
        # Entries whose total degree exceeds deg are pure round-off.
        if m:
            idx = np.indices(coeffs.shape).sum(axis=0)
            coeffs[idx > deg] = 0.0
        scale = max(np.abs(self.coeffs).max(), 1e-300)
        coeffs[np.abs(coeffs) < 1e-15 * scale * max(1.0, np.abs(T).max()) ** deg] = 0.0
        prec = T.T @ self.precision @ T
        return GaussPoly(prec, _trim(coeffs))

    def integrate(self, axes) -> "GaussPoly":
        """Integrate out the variables listed in ``axes`` over the real line."""
        axes = sorted(set(int(a) for a in np.atleast_1d(axes)))
        keep = [i for i in range(self.nvars) if i not in axes]
        M = self.precision
        Mzz = M[np.ix_(axes, axes)]
        Mzy = M[np.ix_(axes, keep)]
        Myy = M[np.ix_(keep, keep)]
        try:
            chol = np.linalg.cholesky(Mzz)
        except np.linalg.LinAlgError as exc:
            raise DomainError("Gaussian factor is not integrable over the requested variables") from exc
        # z = K y + L w  with  L^T Mzz L = I/2, so the z-integral becomes a
        # standard-normal expectation in w.
        K = -np.linalg.solve(Mzz, Mzy)
        L = np.linalg.inv(chol.T) / np.sqrt(2.0)
        k, ny = len(axes), len(keep)
        T = np.zeros((self.nvars, ny + k))
        for j, i in enumerate(keep):
            T[i, j] = 1.0
        for a, i in enumerate(axes):
            T[i, :ny] = K[a]
            T[i, ny:] = L[a]
        poly = GaussPoly(np.zeros((self.nvars, self.nvars)), self.coeffs).substitute(T).coeffs
        # contract the w axes with normal moments
        for _ in range(k):
            mom = _double_factorial_moments(poly.shape[-1] - 1)
            poly = np.tensordot(poly, mom, axes=(-1, 0))
        jac = abs(np.linalg.det(L)) * (2 * np.pi) ** (k / 2)
        schur = Myy - Mzy.T @ np.linalg.solve(Mzz, Mzy) if ny else np.zeros((0, 0))
        return GaussPoly(schur, _trim(np.asarray(poly) * jac) if ny else np.asarray(poly * jac))

    def total_integral(self) -> float:
        return float(self.integrate(list(range(self.nvars))).coeffs)

    def embed(self, total_vars: int, positions) -> "GaussPoly":
        """View as a function of ``total_vars`` variables, own variable ``i`` at ``positions[i]``."""
        T = np.zeros((self.nvars, total_vars))
        for i, pos in enumerate(positions):
            T[i, pos] = 1.0
        return self.substitute(T)
