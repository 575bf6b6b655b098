"""HDG assembly for the Stokes system with tensor facet stabilization.

Unknowns: sigma = nu grad u (row-major components), velocity u, trace ubar
(eliminated on the no-slip boundary), and mean-zero pressure p.  Test blocks
(tau | v | vbar | q) give the symmetric system

    (nu^-1 sigma, tau) - (grad u, tau) + <u - ubar, tau n>            = 0
    -(sigma, grad v) + (p, div v) + <sigma n - p n - S(u - ubar), v>  = -(f, v)
    (div u, q) - <u - ubar, q n>                                      = 0
    -<sigma n - p n - S(u - ubar), vbar>                              = 0

bordered by one multiplier row/column enforcing the zero pressure mean.
Couplings to the eliminated boundary-trace values are kept as a separate
operator so manufactured solutions with nonzero boundary velocity can be
imposed through a Dirichlet lift of the right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

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
    sigma_indices,
    u_indices,
)
from .layout import SpaceLayout, build_layout
from .mesh import Mesh
from .problems import StokesProblem
from .quadrature import edge_quadrature
from .system import AssembledSystem

_SQRT2 = np.sqrt(2.0)


def _grad_moment(ctx: FemContext) -> np.ndarray:
    """(nc, N, N, 2): integral of (d_d phi_i) phi_j over each cell."""
    return np.einsum("cq,cqid,qj->cijd", ctx.cell_w, ctx.gphys, ctx.phi)


def _b1_volume(ctx: FemContext) -> np.ndarray:
    """(nc, 4N, 2N): -(grad v, tau) coupling, sigma rows by u columns."""
    n = ctx.n
    gd = _grad_moment(ctx)
    blk = np.zeros((ctx.num_cells, 2, 2, n, 2, n))
    for r in range(2):
        for d in range(2):
            blk[:, r, d, :, r, :] = -np.swapaxes(gd[:, :, :, d], 1, 2)
    return blk.reshape(ctx.num_cells, 4 * n, 2 * n)


def _to_sigma_rows(side_block: np.ndarray, normal: np.ndarray, n: int) -> np.ndarray:
    """Lift a scalar facet block (s, j, i) to sigma rows (s, (r,d,j), (r,i))
    weighted by the side normal component n_d."""
    s = side_block.shape[0]
    cols = side_block.shape[2]
    out = np.zeros((s, 2, 2, n, 2, cols))
    weighted = normal[:, :, None, None] * side_block[:, None, :, :]  # (s, d, j, i)
    for r in range(2):
        out[:, r, :, :, r, :] = weighted
    return out.reshape(s, 4 * n, 2 * cols)


def _vector_from_scalar(block: np.ndarray) -> np.ndarray:
    """block_diag(B, B) lifting of a scalar (s, i, j) block, component-major."""
    s, a, b = block.shape
    out = np.zeros((s, 2, a, 2, b))
    out[:, 0, :, 0, :] = block
    out[:, 1, :, 1, :] = block
    return out.reshape(s, 2 * a, 2 * b)


def _s_weighted(block: np.ndarray, s_tensor: np.ndarray) -> np.ndarray:
    """(s, 2a, 2b) from scalar facet block (s, a, b) and S (s, 2, 2)."""
    out = np.einsum("sab,sij->saibj", s_tensor, block)
    s, _, a, _, b = out.shape
    return out.reshape(s, 2 * a, 2 * b)


def _scatter_pair(coo, rows, cols, vals):
    coo.add(rows, cols, vals)
    coo.add_transposed(rows, cols, vals)


def add_stokes_form(
    coo: CooBuilder,
    bcoo: CooBuilder,
    ctx: FemContext,
    layout: SpaceLayout,
    nu: float,
    s_sides: np.ndarray,
    bcol: np.ndarray,
) -> None:
    """Scatter the Stokes saddle form; eliminated-trace couplings go to
    ``bcoo`` with columns ``bcol`` (per-side virtual column indices)."""
    n = ctx.n
    nm = ctx.nm
    sidx = sigma_indices(layout)
    uidx = u_indices(layout)
    pidx = p_indices(layout)
    kept, trace_idx, gone = side_partition(ctx, layout)

    mass = np.einsum("cq,qi,qj->cij", ctx.cell_w, ctx.phi, ctx.phi)
    coo.add(sidx, sidx, _vector_from_scalar(_vector_from_scalar(mass)) / nu)

    _scatter_pair(coo, sidx, uidx, _b1_volume(ctx))

    sm = side_mass(ctx, ctx.fs_w)  # (nfs, N, N) symmetric
    smix = side_mixed(ctx, ctx.fs_w)  # (nfs, N, m)
    smm = side_trace_mass(ctx, ctx.fs_w)

    sig_side = sidx[ctx.fs_cell]
    u_side = uidx[ctx.fs_cell]
    p_side = pidx[ctx.fs_cell]

    # b1 facet: +<v - vbar, tau n>
    _scatter_pair(coo, sig_side, u_side, _to_sigma_rows(sm, ctx.fs_normal, n))
    tr_blk = -_to_sigma_rows(smix, ctx.fs_normal, n)
    _scatter_pair(coo, sig_side[kept], trace_idx, tr_blk[kept])
    bcoo.add(sig_side[gone], bcol, tr_blk[gone])

    # b2: (div v, q) - <v - vbar, q n>
    gd = _grad_moment(ctx)
    div_blk = np.stack([gd[:, :, :, 0], gd[:, :, :, 1]], axis=1).reshape(
        ctx.num_cells, 2 * n, n
    )
    _scatter_pair(coo, uidx, pidx, div_blk)
    vqn = -np.einsum("sa,sij->saij", ctx.fs_normal, sm).reshape(-1, 2 * n, n)
    _scatter_pair(coo, u_side, p_side, vqn)
    vbar_qn = np.einsum("sa,sim->siam", ctx.fs_normal, smix).reshape(-1, n, 2 * nm)
    _scatter_pair(coo, p_side[kept], trace_idx, vbar_qn[kept])
    bcoo.add(p_side[gone], bcol, vbar_qn[gone])

    # -c_S: -<S (u - ubar), v - vbar>
    coo.add(u_side, u_side, -_s_weighted(sm, s_sides))
    cum = _s_weighted(smix, s_sides)
    _scatter_pair(coo, u_side[kept], trace_idx, cum[kept])
    bcoo.add(u_side[gone], bcol, cum[gone])
    coo.add(trace_idx, trace_idx, -_s_weighted(smm[kept], s_sides[kept]))

    # mean-zero pressure multiplier: integral of each cell's constant mode
    cidx = np.array([[layout.constraint_index]])
    gcol = np.zeros((1, layout.p_dim))
    gcol[0, :: layout.cell_dim] = ctx.detB / _SQRT2
    prow = pidx.reshape(1, -1)
    coo.add(cidx, prow, gcol[:, None, :].reshape(1, 1, -1))
    coo.add_transposed(cidx, prow, gcol[:, None, :].reshape(1, 1, -1))


def _boundary_columns(ctx: FemContext, layout: SpaceLayout):
    """Virtual column indices for eliminated boundary-trace values."""
    width = layout.trace_width
    start = np.full(ctx.mesh.num_facets, -1, dtype=np.int64)
    pos = 0
    for f in layout.dirichlet_facets:
        start[f] = pos
        pos += width
    _, _, gone = side_partition(ctx, layout)
    bcol = start[ctx.fs_facet[gone]][:, None] + np.arange(width)[None, :]
    return start, bcol, pos


def assemble_stokes(mesh: Mesh, problem: StokesProblem, k: int) -> AssembledSystem:
    layout = build_layout(mesh, k, "stokes")
    ctx = assembly_context(mesh, k)
    problem.validate(mesh, ctx)

    coo = CooBuilder(layout.total_dim)
    bstart, bcol, bdim = _boundary_columns(ctx, layout)
    bcoo = CooBuilder(layout.total_dim, bdim)
    add_stokes_form(coo, bcoo, ctx, layout, problem.nu, problem.stab.on_sides(ctx), bcol)

    rhs = np.zeros(layout.total_dim)
    fvals = problem.f(ctx.cell_points)
    add_at(
        rhs,
        u_indices(layout),
        -np.einsum("cq,cqa,qi->cai", ctx.cell_w, fvals, ctx.phi).reshape(
            ctx.num_cells, -1
        ),
    )
    return AssembledSystem(
        matrix=coo.tocsr(),
        rhs=rhs,
        layout=layout,
        equation="stokes",
        symmetric=True,
        problem=problem,
        ctx=ctx,
        boundary_coupling=bcoo.tocsr(),
        boundary_col_start=bstart,
    )


@dataclass(frozen=True)
class BoundaryTrace:
    """Facet-wise L2 projection of prescribed boundary velocity."""

    values: np.ndarray  # concatenated coefficients, component-major per facet
    col_start: np.ndarray  # per facet, -1 if the facet keeps its trace DOFs
    width: int


def project_boundary_velocity(system: AssembledSystem, g) -> BoundaryTrace:
    layout = system.layout
    mesh = layout.mesh
    ctx = system.ctx
    rule = edge_quadrature(2 * layout.k + 4)
    mu = ctx.basis.edge.values(rule.t)
    width = layout.trace_width
    values = np.zeros(len(layout.dirichlet_facets) * width)
    for f in layout.dirichlet_facets:
        a = mesh.vertices[mesh.facets[f, 0]]
        b = mesh.vertices[mesh.facets[f, 1]]
        pts = a[None, :] + rule.t[:, None] * (b - a)[None, :]
        gv = np.asarray(g(pts))
        coeff = np.einsum("q,qa,qm->am", rule.weights, gv, mu)
        pos = system.boundary_col_start[f]
        values[pos : pos + width] = coeff.ravel()
    return BoundaryTrace(values, system.boundary_col_start, width)


def stokes_dirichlet_lift(system: AssembledSystem, g) -> tuple[np.ndarray, BoundaryTrace]:
    """RHS contribution imposing boundary velocity g through the eliminated
    trace DOFs (columns moved to the right-hand side).  Works for any vector
    system that carries a boundary-coupling operator."""
    trace = project_boundary_velocity(system, g)
    delta = -system.boundary_coupling @ trace.values
    return delta, trace


def apply_dirichlet_lift(system: AssembledSystem, g) -> tuple[AssembledSystem, BoundaryTrace]:
    delta, trace = stokes_dirichlet_lift(system, g)
    lifted = replace(system, rhs=system.rhs + delta)
    return lifted, trace
