"""HDG assembly for the mixed Poisson problem.

Unknowns are the flux u = -kappa grad p, the scalar p, and the facet trace
pbar (zero on Dirichlet facets).  Rows realize, per test block (v | q |
qbar):

    (kappa^-1 u, v) + (grad p, v) - <p - pbar, v.n>          = -<p_D, v.n>_D
    (u, grad q) - <u.n + tau (p - pbar), q>                  = -<tau p_D, q>_D + (f, q)
    <u.n + tau (p - pbar), qbar>  (non-Dirichlet facets)     = <p_N, qbar>_N

which is the symmetric form a(u,v) + b((p,pbar),v) + b((q,qbar),u)
- c((p,pbar),(q,qbar)) with a the kappa^-1 mass, b the gradient/trace
coupling, and c the tau-weighted facet stabilization.  The convection-
diffusion assembler reuses this form verbatim as its symmetric part.
"""

from __future__ import annotations

import numpy as np

from .context import FemContext, assembly_context
from .kernels import (
    CooBuilder,
    add_at,
    p_indices,
    side_mass,
    side_mixed,
    side_partition,
    side_trace_mass,
    u_indices,
)
from .layout import SpaceLayout, build_layout
from .mesh import DIRICHLET, NEUMANN, Mesh
from .problems import PoissonProblem
from .system import AssembledSystem


def _gradient_block(ctx: FemContext) -> np.ndarray:
    """(nc, 2N, N): (grad q_j, v_(a,i)) cell coupling."""
    nc, n = ctx.num_cells, ctx.n
    blk = np.einsum("cq,cqja,qi->caij", ctx.cell_w, ctx.gphys, ctx.phi)
    return blk.reshape(nc, 2 * n, n)


def _normal_trace_blocks(ctx: FemContext, sides=None):
    """E1 (ns, 2N, N): <q phi_j, v.n>; E2 (ns, 2N, m): <mu_m, v.n>."""
    phi = ctx.fs_phi if sides is None else ctx.fs_phi[sides]
    w = ctx.fs_w if sides is None else ctx.fs_w[sides]
    nrm = ctx.fs_normal if sides is None else ctx.fs_normal[sides]
    ns, n = phi.shape[0], ctx.n
    e1 = np.einsum("sq,sa,sqi,sqj->saij", w, nrm, phi, phi).reshape(ns, 2 * n, n)
    e2 = np.einsum("sq,sa,sqi,qm->saim", w, nrm, phi, ctx.mu).reshape(ns, 2 * n, -1)
    return e1, e2


def _scatter_saddle(coo, rows_u, cols_p, vals) -> None:
    """Add a b-type pairing block and its transpose."""
    coo.add(rows_u, cols_p, vals)
    coo.add_transposed(rows_u, cols_p, vals)


def add_poisson_form(
    coo: CooBuilder,
    ctx: FemContext,
    layout: SpaceLayout,
    kappa_inv: np.ndarray,
    tau: np.ndarray,
) -> None:
    """Scatter a, b (both orientations), and -c into ``coo``."""
    n = ctx.n
    uidx = u_indices(layout)
    pidx = p_indices(layout)

    a_blk = np.einsum("cq,cqab,qi,qj->caibj", ctx.cell_w, kappa_inv, ctx.phi, ctx.phi)
    coo.add(uidx, uidx, a_blk.reshape(ctx.num_cells, 2 * n, 2 * n))

    _scatter_saddle(coo, uidx, pidx, _gradient_block(ctx))

    kept, trace_idx, _ = side_partition(ctx, layout)
    e1, e2 = _normal_trace_blocks(ctx)
    u_side = uidx[ctx.fs_cell]
    p_side = pidx[ctx.fs_cell]
    _scatter_saddle(coo, u_side, p_side, -e1)
    _scatter_saddle(coo, u_side[kept], trace_idx, e2[kept])

    w_tau = ctx.fs_w * tau[ctx.fs_facet, None]
    coo.add(p_side, p_side, -side_mass(ctx, w_tau))
    cqm = side_mixed(ctx, w_tau[kept], kept)
    _scatter_saddle(coo, p_side[kept], trace_idx, cqm)
    coo.add(trace_idx, trace_idx, -side_trace_mass(ctx, w_tau[kept]))


def assemble_poisson(mesh: Mesh, problem: PoissonProblem, k: int) -> AssembledSystem:
    layout = build_layout(mesh, k, "poisson")
    ctx = assembly_context(mesh, k)
    problem.validate(mesh, ctx)

    coo = CooBuilder(layout.total_dim)
    kinv = problem.kappa.inverse(ctx.cell_points)
    add_poisson_form(coo, ctx, layout, kinv, problem.tau_on(mesh))
    rhs = poisson_rhs(problem, layout, ctx)
    return AssembledSystem(
        matrix=coo.tocsr(),
        rhs=rhs,
        layout=layout,
        equation="poisson",
        symmetric=True,
        problem=problem,
        ctx=ctx,
    )


def poisson_rhs(
    problem: PoissonProblem, layout: SpaceLayout, ctx: FemContext | None = None
) -> np.ndarray:
    """Right-hand side only, so boundary data can vary without refactorizing."""
    mesh = layout.mesh
    if ctx is None:
        ctx = assembly_context(mesh, layout.k)
    tau = problem.tau_on(mesh)
    rhs = np.zeros(layout.total_dim)
    uidx = u_indices(layout)
    pidx = p_indices(layout)

    fvals = problem.f(ctx.cell_points)
    add_at(rhs, pidx, np.einsum("cq,cq,qi->ci", ctx.cell_w, fvals, ctx.phi))

    tags = mesh.facet_tag[ctx.fs_facet]
    dir_sides = np.flatnonzero(tags == DIRICHLET)
    if dir_sides.size:
        pd = problem.p_dirichlet(ctx.fs_points[dir_sides])
        w = ctx.fs_w[dir_sides]
        nrm = ctx.fs_normal[dir_sides]
        phi = ctx.fs_phi[dir_sides]
        vn = np.einsum("sq,sq,sa,sqi->sai", w, pd, nrm, phi)
        add_at(rhs, uidx[ctx.fs_cell[dir_sides]], -vn.reshape(len(dir_sides), -1))
        w_tau = w * tau[ctx.fs_facet[dir_sides], None]
        add_at(
            rhs,
            pidx[ctx.fs_cell[dir_sides]],
            -np.einsum("sq,sq,sqi->si", w_tau, pd, phi),
        )

    neu_sides = np.flatnonzero(tags == NEUMANN)
    if neu_sides.size:
        pn = problem.p_neumann(ctx.fs_points[neu_sides])
        start = layout.facet_trace_start[ctx.fs_facet[neu_sides]]
        tr_idx = start[:, None] + np.arange(layout.trace_width)[None, :]
        add_at(
            rhs,
            tr_idx,
            np.einsum("sq,sq,qm->sm", ctx.fs_w[neu_sides], pn, ctx.mu),
        )
    return rhs
