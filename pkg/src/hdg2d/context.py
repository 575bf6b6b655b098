"""Precomputed geometry and basis tables for one (mesh, degree) pair.

Cell tables are batched over cells at a shared reference quadrature rule;
facet tables are batched over facet *sides* (one side per adjacent cell), so
every boundary-of-element integral is a weighted sum over side rows.  Facet
quadrature points are generated from the global facet parametrization, hence
both sides of an interior facet see identical physical points and identical
trace-basis values.
"""

from __future__ import annotations

import numpy as np

from .basis import ReferenceBasis, reference_basis
from .errors import AssemblyError
from .mesh import Mesh
from .quadrature import edge_quadrature, triangle_quadrature


class FemContext:
    """Geometry/basis tables shared by assembly, norms, and projections."""

    def __init__(self, mesh: Mesh, k: int, cell_degree: int, facet_degree: int):
        self.mesh = mesh
        self.k = k
        self.basis: ReferenceBasis = reference_basis(k)
        self.n = self.basis.cell_dim
        self.nm = self.basis.edge_dim

        v = mesh.vertices
        tri = mesh.cells
        self.v0 = v[tri[:, 0]]
        self.B = np.stack([v[tri[:, 1]] - self.v0, v[tri[:, 2]] - self.v0], axis=-1)
        self.detB = self.B[:, 0, 0] * self.B[:, 1, 1] - self.B[:, 0, 1] * self.B[:, 1, 0]
        if np.any(self.detB <= 0):
            bad = int(np.flatnonzero(self.detB <= 0)[0])
            raise AssemblyError(f"cell {bad} is degenerate or inverted")
        self.invB = (
            np.stack(
                [
                    np.stack([self.B[:, 1, 1], -self.B[:, 0, 1]], axis=-1),
                    np.stack([-self.B[:, 1, 0], self.B[:, 0, 0]], axis=-1),
                ],
                axis=-2,
            )
            / self.detB[:, None, None]
        )

        rule = triangle_quadrature(cell_degree)
        self.cell_rule = rule
        xq = rule.xy
        self.nq = len(rule)
        self.phi = self.basis.cell.values(xq)  # (nq, N)
        gref = self.basis.cell.gradients(xq)  # (nq, N, 2)
        # physical gradient: grad phi = B^{-T} gradref -> g_a = sum_r invB[r, a] gref_r
        self.gphys = np.einsum("qnr,cra->cqna", gref, self.invB)
        self.cell_points = self.v0[:, None, :] + np.einsum(
            "cab,qb->cqa", self.B, xq
        )  # (nc, nq, 2)
        self.cell_w = rule.weights[None, :] * self.detB[:, None]  # (nc, nq)

        erule = edge_quadrature(facet_degree)
        self.edge_rule = erule
        t = erule.t
        self.nqf = len(erule)
        self.mu = self.basis.edge.values(t)  # (nqf, m)

        # facet sides in facet order, adjacent cells in stored order
        sides_cell, sides_facet = [], []
        first = np.zeros(mesh.num_facets, dtype=np.int64)
        count = np.zeros(mesh.num_facets, dtype=np.int64)
        for f in range(mesh.num_facets):
            first[f] = len(sides_cell)
            for c in mesh.facet_cells[f]:
                if c >= 0:
                    sides_cell.append(int(c))
                    sides_facet.append(f)
                    count[f] += 1
        self.fs_cell = np.array(sides_cell, dtype=np.int64)
        self.fs_facet = np.array(sides_facet, dtype=np.int64)
        self.facet_side_first = first
        self.facet_side_count = count
        nfs = len(self.fs_cell)

        a = v[mesh.facets[self.fs_facet, 0]]
        b = v[mesh.facets[self.fs_facet, 1]]
        self.fs_points = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
        self.fs_w = erule.weights[None, :] * mesh.h_facet[self.fs_facet, None]
        self.fs_hK = mesh.h_cell[self.fs_cell]

        sign = np.empty(nfs)
        for s in range(nfs):
            c, f = self.fs_cell[s], self.fs_facet[s]
            e = int(np.flatnonzero(mesh.cell_facets[c] == f)[0])
            sign[s] = mesh.cell_facet_signs[c, e]
        self.fs_normal = sign[:, None] * mesh.facet_normal[self.fs_facet]

        ref = np.einsum(
            "srb,sqb->sqr", self.invB[self.fs_cell], self.fs_points - self.v0[self.fs_cell, None, :]
        )
        self.fs_ref = ref
        self.fs_phi = self.basis.cell.values(ref)  # (nfs, nqf, N)
        gref_fs = self.basis.cell.gradients(ref)  # (nfs, nqf, N, 2)
        self.fs_gphys = np.einsum("sqnr,sra->sqna", gref_fs, self.invB[self.fs_cell])

    @property
    def num_cells(self) -> int:
        return self.mesh.num_cells

    @property
    def num_sides(self) -> int:
        return len(self.fs_cell)

    def sides_of_facet(self, f: int) -> np.ndarray:
        return self.facet_side_first[f] + np.arange(self.facet_side_count[f])


def assembly_context(mesh: Mesh, k: int) -> FemContext:
    """Context with the bilinear-form quadrature degree 2k+2."""
    return FemContext(mesh, k, 2 * k + 2, 2 * k + 2)


def error_context(mesh: Mesh, k: int) -> FemContext:
    """Context with the error-measurement quadrature degree 2k+4."""
    return FemContext(mesh, k, 2 * k + 4, 2 * k + 4)


# ----------------------------------------------------------------------
# batched evaluation of discrete fields at the context quadrature points


def eval_p_cells(ctx: FemContext, layout, x: np.ndarray) -> np.ndarray:
    """(nc, nq) values of the scalar cell field stored in the p block."""
    coeff = x[layout.p_offset : layout.p_offset + layout.p_dim].reshape(-1, ctx.n)
    return np.einsum("cn,qn->cq", coeff, ctx.phi)

def eval_u_cells(ctx: FemContext, layout, x: np.ndarray) -> np.ndarray:
    """(nc, nq, 2) values of the vector cell field stored in the u block."""
    coeff = x[layout.u_offset : layout.u_offset + layout.u_dim].reshape(-1, 2, ctx.n)
    return np.einsum("can,qn->cqa", coeff, ctx.phi)

def eval_sigma_cells(ctx: FemContext, layout, x: np.ndarray) -> np.ndarray:
    """(nc, nq, 2, 2) values of the tensor cell field (row-major components)."""
    coeff = x[layout.sigma_offset : layout.sigma_offset + layout.sigma_dim]
    coeff = coeff.reshape(-1, 2, 2, ctx.n)
    return np.einsum("cabn,qn->cqab", coeff, ctx.phi)

def eval_p_sides(ctx: FemContext, layout, x: np.ndarray) -> np.ndarray:
    """(nfs, nqf) traces of the p-block field from each side's cell."""
    coeff = x[layout.p_offset : layout.p_offset + layout.p_dim].reshape(-1, ctx.n)
    return np.einsum("sn,sqn->sq", coeff[ctx.fs_cell], ctx.fs_phi)

def eval_u_sides(ctx: FemContext, layout, x: np.ndarray) -> np.ndarray:
    coeff = x[layout.u_offset : layout.u_offset + layout.u_dim].reshape(-1, 2, ctx.n)
    return np.einsum("san,sqn->sqa", coeff[ctx.fs_cell], ctx.fs_phi)

def eval_trace_sides(
    ctx: FemContext, layout, x: np.ndarray, boundary_values: np.ndarray | None = None
) -> np.ndarray:
    """Trace-field values per facet side: (nfs, nqf) scalar or (nfs, nqf, 2).

    Eliminated (Dirichlet) facets evaluate to zero unless ``boundary_values``
    supplies their known coefficients (as produced by a Dirichlet lift).
    """
    vector = layout.equation in ("stokes", "oseen")
    ncomp = 2 if vector else 1
    shape = (ctx.num_sides, ctx.nqf, 2) if vector else (ctx.num_sides, ctx.nqf)
    out = np.zeros(shape)
    width = layout.trace_width
    for s in range(ctx.num_sides):
        f = ctx.fs_facet[s]
        start = layout.facet_trace_start[f]
        if start >= 0:
            coeff = x[start : start + width]
        elif boundary_values is not None:
            pos = boundary_values[1][f]
            coeff = boundary_values[0][pos : pos + width]
        else:
            continue
        coeff = coeff.reshape(ncomp, ctx.nm)
        vals = np.einsum("an,qn->qa", coeff, ctx.mu)
        out[s] = vals if vector else vals[:, 0]
    return out
