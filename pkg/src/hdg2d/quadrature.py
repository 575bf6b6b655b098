"""Quadrature on the reference triangle and the reference edge.

Triangle rules use a collapsed-coordinate (Duffy) tensor product of
Gauss-Legendre rules, so exactness for any requested total degree is by
construction.  Edge rules are plain Gauss-Legendre on [0, 1].  Points are
stored in barycentric coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_DEGREE = 20


@dataclass(frozen=True)
class QuadratureRule:
    """Points (barycentric), weights, and the certified exactness degree."""

    points: np.ndarray
    weights: np.ndarray
    degree: int
    domain: str  # "triangle" or "edge"

    @property
    def xy(self) -> np.ndarray:
        """Cartesian coordinates on the reference triangle {x,y>=0, x+y<=1}."""
        if self.domain != "triangle":
            raise ValueError("xy is only defined for triangle rules")
        return self.points[:, 1:]

    @property
    def t(self) -> np.ndarray:
        """Parameter on the reference edge [0, 1]."""
        if self.domain != "edge":
            raise ValueError("t is only defined for edge rules")
        return self.points[:, 1]

    def __len__(self) -> int:
        return len(self.weights)


def _gauss01(npts: int):
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def _check_degree(degree: int) -> int:
    degree = int(degree)
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"quadrature degree must be in [0, {MAX_DEGREE}], got {degree}")
    return degree


def edge_quadrature(degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1], exact for polynomials up to ``degree``."""
    degree = _check_degree(degree)
    t, w = _gauss01(degree // 2 + 1)
    points = np.column_stack([1.0 - t, t])
    return QuadratureRule(points, w, degree, "edge")


def triangle_quadrature(degree: int) -> QuadratureRule:
    """Rule on the reference triangle, exact for total degree ``degree``.

    The Duffy map (x, y) = (s(1-r), r) sends the unit square to the triangle
    with Jacobian (1-r); a polynomial of total degree d becomes degree <= d
    in s and degree <= d+1 in r, which fixes the tensor Gauss orders.
    """
    degree = _check_degree(degree)
    s, ws = _gauss01(degree // 2 + 1)
    r, wr = _gauss01((degree + 1) // 2 + 1)
    S, R = np.meshgrid(s, r, indexing="ij")
    x = (S * (1.0 - R)).ravel()
    y = R.ravel()
    w = (np.outer(ws, wr * (1.0 - r))).ravel()
    points = np.column_stack([1.0 - x - y, x, y])
    return QuadratureRule(points, w, degree, "triangle")


def quadrature_rule(degree: int, domain: str = "triangle") -> QuadratureRule:
    if domain == "triangle":
        return triangle_quadrature(degree)
    if domain == "edge":
        return edge_quadrature(degree)
    raise ValueError(f"unknown quadrature domain {domain!r}")
