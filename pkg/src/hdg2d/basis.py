"""Reference-element polynomial bases.

Cell basis: L2-orthonormal modal basis of P_k on the reference triangle
{x, y >= 0, x + y <= 1}, built by exact rational Gram-Schmidt over the
monomials (monomial moments on the triangle are a!b!/(a+b+2)!, so the
triangular factor is computed in exact arithmetic and floats enter only in
the final entries).  Basis function 0 is the constant sqrt(2).

Facet basis: orthonormal shifted Legendre polynomials on the reference edge
[0, 1].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np

log = logging.getLogger(__name__)

MAX_K = 4


def p_dim(k: int) -> int:
    """dim P_k on a triangle."""
    return (k + 1) * (k + 2) // 2


def monomial_exponents(k: int) -> np.ndarray:
    """Exponent pairs of the monomials spanning P_k, by total degree."""
    exps = [(d - b, b) for d in range(k + 1) for b in range(d + 1)]
    return np.array(exps, dtype=np.int64)


def _triangle_moment(a: int, b: int) -> Fraction:
    return Fraction(factorial(a) * factorial(b), factorial(a + b + 2))


def _orthonormal_coefficients(k: int) -> np.ndarray:
    """C such that phi = C @ monomials is orthonormal on the triangle.

    Uses an exact LDL^T factorization of the monomial Gram matrix; only the
    final diagonal scaling D^{-1/2} is done in floating point.
    """
    exps = monomial_exponents(k)
    n = len(exps)
    gram = [
        [_triangle_moment(int(exps[i, 0] + exps[j, 0]), int(exps[i, 1] + exps[j, 1])) for j in range(n)]
        for i in range(n)
    ]
    lower = [[Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)]
    diag = [Fraction(0)] * n
    for j in range(n):
        d = gram[j][j] - sum(lower[j][t] ** 2 * diag[t] for t in range(j))
        diag[j] = d
        for i in range(j + 1, n):
            s = gram[i][j] - sum(lower[i][t] * lower[j][t] * diag[t] for t in range(j))
            lower[i][j] = s / d
    # invert the unit lower triangular factor exactly
    inv = [[Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(i):
            inv[i][j] = -sum(lower[i][t] * inv[t][j] for t in range(j, i))
    coeff = np.array([[float(inv[i][j]) for j in range(n)] for i in range(n)])
    scale = 1.0 / np.sqrt(np.array([float(d) for d in diag]))
    return scale[:, None] * coeff


@dataclass(frozen=True)
class CellBasis:
    """Orthonormal modal basis of P_k on the reference triangle."""

    degree: int
    exponents: np.ndarray
    coeff: np.ndarray  # (N, N): phi_i = sum_j coeff[i, j] * x^a_j y^b_j

    @property
    def dim(self) -> int:
        return len(self.exponents)

    def values(self, points: np.ndarray) -> np.ndarray:
        """Basis values; ``points`` is (..., 2), result (..., N)."""
        pts = np.asarray(points, dtype=float)
        x = pts[..., 0][..., None]
        y = pts[..., 1][..., None]
        mono = x ** self.exponents[:, 0] * y ** self.exponents[:, 1]
        return mono @ self.coeff.T

    def gradients(self, points: np.ndarray) -> np.ndarray:
        """Reference gradients, shape (..., N, 2)."""
        pts = np.asarray(points, dtype=float)
        x = pts[..., 0][..., None]
        y = pts[..., 1][..., None]
        a = self.exponents[:, 0]
        b = self.exponents[:, 1]
        with np.errstate(invalid="ignore"):
            dx = np.where(a > 0, a * x ** np.maximum(a - 1, 0) * y**b, 0.0)
            dy = np.where(b > 0, b * x**a * y ** np.maximum(b - 1, 0), 0.0)
        grad = np.stack([dx @ self.coeff.T, dy @ self.coeff.T], axis=-1)
        return grad

    def degree_slice(self, d: int) -> slice:
        """Indices of the modes of exact total degree ``d``."""
        return slice(p_dim(d - 1) if d > 0 else 0, p_dim(d))


@dataclass(frozen=True)
class EdgeBasis:
    """Orthonormal shifted Legendre basis of P_k on [0, 1]."""

    degree: int

    @property
    def dim(self) -> int:
        return self.degree + 1

    def values(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        s = 2.0 * t - 1.0
        vals = np.empty(t.shape + (self.dim,))
        p_prev = np.ones_like(s)
        vals[..., 0] = p_prev
        if self.degree >= 1:
            p_cur = s.copy()
            vals[..., 1] = np.sqrt(3.0) * p_cur
            for n in range(1, self.degree):
                p_next = ((2 * n + 1) * s * p_cur - n * p_prev) / (n + 1)
                vals[..., n + 1] = np.sqrt(2 * n + 3.0) * p_next
                p_prev, p_cur = p_cur, p_next
        return vals


@dataclass(frozen=True)
class ReferenceBasis:
    """Cell and facet bases of matching degree for one HDG space family."""

    degree: int
    cell: CellBasis
    edge: EdgeBasis

    @property
    def cell_dim(self) -> int:
        return self.cell.dim

    @property
    def edge_dim(self) -> int:
        return self.edge.dim


def reference_basis(k: int) -> ReferenceBasis:
    if not 0 <= k <= MAX_K:
        raise ValueError(f"degree k must be in [0, {MAX_K}], got {k}")
    cell = CellBasis(k, monomial_exponents(k), _orthonormal_coefficients(k))
    basis = ReferenceBasis(k, cell, EdgeBasis(k))
    cond = gram_condition(basis)
    log.debug("reference basis k=%d: quadrature Gram condition %.3e", k, cond)
    return basis


def gram_condition(basis: ReferenceBasis) -> float:
    """Condition number of the cell Gram matrix under exact-degree quadrature."""
    from .quadrature import triangle_quadrature

    rule = triangle_quadrature(2 * basis.degree)
    vals = basis.cell.values(rule.xy)
    gram = (vals * rule.weights[:, None]).T @ vals
    return float(np.linalg.cond(gram))


def eval_basis(basis: ReferenceBasis, points: np.ndarray):
    """Values and reference gradients of the cell basis at ``points``."""
    return basis.cell.values(points), basis.cell.gradients(points)
