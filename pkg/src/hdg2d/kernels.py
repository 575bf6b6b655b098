"""Batched element-kernel helpers shared by the four assemblers.

All local blocks are computed for every cell (or facet side) at once with
einsum contractions and scattered into COO triplets in a fixed order, so the
assembled matrices are bit-identical across runs.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .context import FemContext
from .layout import SpaceLayout


class CooBuilder:
    """Accumulates dense (item, row, col) blocks into one sparse matrix."""

    def __init__(self, nrows: int, ncols: int | None = None):
        self.shape = (nrows, ncols if ncols is not None else nrows)
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []

    def add(self, rows: np.ndarray, cols: np.ndarray, vals: np.ndarray) -> None:
        """rows (m, a), cols (m, b), vals (m, a, b)."""
        if vals.size == 0:
            return
        m, a, b = vals.shape
        self._rows.append(np.broadcast_to(rows[:, :, None], (m, a, b)).ravel())
        self._cols.append(np.broadcast_to(cols[:, None, :], (m, a, b)).ravel())
        self._vals.append(np.ascontiguousarray(vals).ravel())

    def add_transposed(self, rows, cols, vals) -> None:
        self.add(cols, rows, np.ascontiguousarray(np.swapaxes(vals, 1, 2)))

    def tocsr(self) -> sp.csr_matrix:
        if not self._vals:
            return sp.csr_matrix(self.shape)
        rows = np.concatenate(self._rows)
        cols = np.concatenate(self._cols)
        vals = np.concatenate(self._vals)
        mat = sp.coo_matrix((vals, (rows, cols)), shape=self.shape)
        return mat.tocsr()


def add_at(vec: np.ndarray, idx: np.ndarray, vals: np.ndarray) -> None:
    if vals.size:
        np.add.at(vec, idx.ravel(), vals.ravel())


def u_indices(layout: SpaceLayout) -> np.ndarray:
    """(nc, 2N) global u DOFs, component-major within the cell."""
    nc = layout.mesh.num_cells
    n = 2 * layout.cell_dim
    return layout.u_offset + (np.arange(nc)[:, None] * n + np.arange(n)[None, :])


def p_indices(layout: SpaceLayout) -> np.ndarray:
    nc = layout.mesh.num_cells
    n = layout.cell_dim
    return layout.p_offset + (np.arange(nc)[:, None] * n + np.arange(n)[None, :])


def sigma_indices(layout: SpaceLayout) -> np.ndarray:
    nc = layout.mesh.num_cells
    n = 4 * layout.cell_dim
    return layout.sigma_offset + (np.arange(nc)[:, None] * n + np.arange(n)[None, :])


def side_partition(ctx: FemContext, layout: SpaceLayout):
    """Split facet sides into (kept, eliminated) and give kept trace DOFs.

    Returns (kept_sides, kept_trace_idx (nk, width), eliminated_sides).
    """
    start = layout.facet_trace_start[ctx.fs_facet]
    kept = np.flatnonzero(start >= 0)
    gone = np.flatnonzero(start < 0)
    width = layout.trace_width
    trace_idx = start[kept][:, None] + np.arange(width)[None, :]
    return kept, trace_idx, gone


def side_mass(ctx: FemContext, w: np.ndarray, sides=None) -> np.ndarray:
    """(ns, N, N) facet mass of cell-basis traces; w is (nfs, nqf) or sliced."""
    phi = ctx.fs_phi if sides is None else ctx.fs_phi[sides]
    return np.einsum("sq,sqi,sqj->sij", w, phi, phi)


def side_mixed(ctx: FemContext, w: np.ndarray, sides=None) -> np.ndarray:
    """(ns, N, m) facet mass of cell basis against the trace basis."""
    phi = ctx.fs_phi if sides is None else ctx.fs_phi[sides]
    return np.einsum("sq,sqi,qm->sim", w, phi, ctx.mu)


def side_trace_mass(ctx: FemContext, w: np.ndarray) -> np.ndarray:
    """(ns, m, m) facet mass of the trace basis."""
    return np.einsum("sq,qi,qj->sij", w, ctx.mu, ctx.mu)


def expand_vector(block: np.ndarray) -> np.ndarray:
    """Lift a scalar block (s, i, j) to both components: (s, 2i, 2j) with the
    component-major layout block_diag(B, B)."""
    s, a, b = block.shape
    out = np.zeros((s, 2, a, 2, b))
    out[:, 0, :, 0, :] = block
    out[:, 1, :, 1, :] = block
    return out.reshape(s, 2 * a, 2 * b)
