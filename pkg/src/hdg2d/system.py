"""Assembled saddle-point systems.

The matrix realizes the sum-of-equations bilinear form with the sign
convention that keeps the stabilized saddle structure [[A, B^T], [B, -C]]
explicit: the A block is an SPD (coefficient-weighted) mass matrix and the C
block is the positive-semidefinite stabilization facet mass.  The vector
equations append one bordering row/column enforcing the zero pressure mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .context import FemContext
from .layout import SpaceLayout


@dataclass
class AssembledSystem:
    """Sparse system plus the discretization handles needed downstream."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    layout: SpaceLayout
    equation: str
    symmetric: bool
    problem: object
    ctx: FemContext
    # vector equations: couplings of eliminated boundary-trace values, used by
    # the Dirichlet lift; columns indexed per boundary facet via trace_col_start
    boundary_coupling: sp.csr_matrix | None = None
    boundary_col_start: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def symmetry_defect(self) -> float:
        """max |M - M^T| relative to max |M|."""
        d = self.matrix - self.matrix.T
        scale = np.abs(self.matrix.data).max() if self.matrix.nnz else 1.0
        defect = np.abs(d.data).max() if d.nnz else 0.0
        return float(defect / scale)

    def core_matrix(self) -> sp.csr_matrix:
        """The system without the mean-pressure bordering row/column."""
        if self.layout.constraint_dim == 0:
            return self.matrix
        n = self.dim - 1
        return self.matrix[:n, :n].tocsr()

    def residual(self, x: np.ndarray) -> float:
        b = self.rhs
        r = self.matrix @ x - b
        scale = np.linalg.norm(b)
        if scale == 0.0:
            scale = 1.0
        return float(np.linalg.norm(r) / scale)
