"""Static condensation and sparse direct solution.

Interior unknowns (u, p for the scalar equations; sigma, u, and the
non-constant pressure modes for the vector ones) couple only within their
cell and to the retained globals: facet traces, the per-cell mean pressure,
and the mean-zero multiplier.  Eliminating them element by element leaves a
Schur-complement system on the retained DOFs; dense local factors are kept
for back-substitution.  A monolithic sparse LU path cross-validates the
reduction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError
from .layout import SpaceLayout
from .system import AssembledSystem

RESIDUAL_TOL = 1e-10
LOCAL_COND_LIMIT = 1e12


def interior_dofs(layout: SpaceLayout, cell: int) -> np.ndarray:
    """Element-interior DOFs eliminated by condensation."""
    if layout.equation in ("stokes", "oseen"):
        return np.concatenate(
            [layout.sigma_dofs(cell), layout.u_dofs(cell), layout.p_dofs(cell)[1:]]
        )
    return np.concatenate([layout.u_dofs(cell), layout.p_dofs(cell)])


def retained_dofs(layout: SpaceLayout) -> np.ndarray:
    """Globally coupled DOFs, ascending: traces, and for the vector
    equations additionally the per-cell mean-pressure mode and the
    mean-zero multiplier."""
    keep = np.zeros(layout.total_dim, dtype=bool)
    keep[layout.trace_offset : layout.trace_offset + layout.trace_dim] = True
    if layout.equation in ("stokes", "oseen"):
        keep[layout.p_offset : layout.p_offset + layout.p_dim : layout.cell_dim] = True
        keep[layout.total_dim - 1] = True
    return np.flatnonzero(keep)


@dataclass
class CondensedSystem:
    """Trace-system Schur complement plus per-element recovery factors."""

    schur: sp.csr_matrix
    rhs: np.ndarray
    retained: np.ndarray
    origin: AssembledSystem
    sign: float
    _cells: list  # (interior_ids, lu_piv, coupling B_IR, retained positions)

    @property
    def dim(self) -> int:
        return len(self.retained)


def condense(system: AssembledSystem) -> CondensedSystem:
    layout = system.layout
    matrix = system.matrix.tocsr()
    retained = retained_dofs(layout)
    pos = np.full(layout.total_dim, -1, dtype=np.int64)
    pos[retained] = np.arange(len(retained))

    nr = len(retained)
    schur = matrix[retained][:, retained].tolil()
    rhs = system.rhs[retained].copy()

    cells = []
    for c in range(layout.mesh.num_cells):
        interior = interior_dofs(layout, c)
        rows = matrix[interior]
        support = np.unique(rows.indices)
        coupled = np.setdiff1d(support, interior, assume_unique=False)
        if np.any(pos[coupled] < 0):
            raise SolverError(f"cell {c}: interior DOFs couple to another cell's interior")
        k_ii = rows[:, interior].toarray()
        cond = np.linalg.cond(k_ii)
        if not np.isfinite(cond) or cond > LOCAL_COND_LIMIT:
            raise SolverError(f"cell {c}: singular local block (cond {cond:.3e})")
        b_ir = rows[:, coupled].toarray()
        c_ri = matrix[coupled][:, interior].toarray()
        lu = sla.lu_factor(k_ii)
        r_pos = pos[coupled]
        schur[np.ix_(r_pos, r_pos)] -= c_ri @ sla.lu_solve(lu, b_ir)
        rhs[r_pos] -= c_ri @ sla.lu_solve(lu, system.rhs[interior])
        cells.append((interior, lu, b_ir, r_pos))

    schur = schur.tocsr()
    sign = 1.0
    if system.symmetric and nr and np.all(schur.diagonal() < 0):
        # Poisson-type trace systems come out negative definite in this sign
        # convention; normalize so the condensed matrix is SPD.
        schur = -schur
        rhs = -rhs
        sign = -1.0
    return CondensedSystem(
        schur=schur, rhs=rhs, retained=retained, origin=system, sign=sign, _cells=cells
    )


def _solve_sparse(matrix: sp.spmatrix, rhs: np.ndarray) -> np.ndarray:
    if matrix.shape[0] == 0:
        return np.zeros(0)
    try:
        lu = spla.splu(matrix.tocsc())
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}") from exc
    return lu.solve(rhs)


def solve(system: AssembledSystem | CondensedSystem) -> np.ndarray:
    """Direct solve; returns the full DOF vector and enforces the residual
    tolerance against the original assembled system."""
    if isinstance(system, CondensedSystem):
        x = np.zeros(system.origin.layout.total_dim)
        xr = _solve_sparse(system.schur, system.rhs)
        x[system.retained] = xr
        for interior, lu, b_ir, r_pos in system._cells:
            local_rhs = system.origin.rhs[interior]
            if b_ir.size:
                local_rhs = local_rhs - b_ir @ xr[r_pos]
            x[interior] = sla.lu_solve(lu, local_rhs)
        origin = system.origin
    else:
        x = _solve_sparse(system.matrix, system.rhs)
        origin = system

    res = origin.residual(x)
    if not res < RESIDUAL_TOL:
        raise SolverError(f"relative residual {res:.3e} exceeds {RESIDUAL_TOL:g}")
    return x
