"""HDG assembly for the Oseen equations.

The form is the Stokes form plus the advection couplings

    + (u x beta, grad v) - <(beta.n) ubar, v - vbar>

for a divergence-free advection field beta whose normal component is
single-valued on facets.  Stability requires the shifted stabilization
S - (beta.n)/2 I to stay positive definite on every facet.
"""

from __future__ import annotations

import numpy as np

from .context import assembly_context, eval_u_cells, eval_u_sides
from .kernels import (
    CooBuilder,
    add_at,
    side_mixed,
    side_partition,
    side_trace_mass,
    u_indices,
)
from .layout import build_layout
from .mesh import Mesh
from .problems import OseenProblem
from .stokes import _boundary_columns, _vector_from_scalar, add_stokes_form
from .system import AssembledSystem


def assemble_oseen(mesh: Mesh, problem: OseenProblem, k: int) -> AssembledSystem:
    layout = build_layout(mesh, k, "oseen")
    ctx = assembly_context(mesh, k)
    problem.validate(mesh, ctx)

    coo = CooBuilder(layout.total_dim)
    bstart, bcol, bdim = _boundary_columns(ctx, layout)
    bcoo = CooBuilder(layout.total_dim, bdim)
    add_stokes_form(coo, bcoo, ctx, layout, problem.nu, problem.stab.on_sides(ctx), bcol)

    uidx = u_indices(layout)
    beta_c = problem.beta.at(ctx.cell_points)
    conv = np.einsum("cq,cqia,cqa,qj->cij", ctx.cell_w, ctx.gphys, beta_c, ctx.phi)
    coo.add(uidx, uidx, _vector_from_scalar(conv))

    kept, trace_idx, gone = side_partition(ctx, layout)
    bn = np.einsum("sqa,sa->sq", problem.beta.at(ctx.fs_points), ctx.fs_normal)
    w_bn = ctx.fs_w * bn
    u_side = uidx[ctx.fs_cell]
    upw = -_vector_from_scalar(side_mixed(ctx, w_bn))
    coo.add(u_side[kept], trace_idx, upw[kept])
    bcoo.add(u_side[gone], bcol, upw[gone])
    coo.add(trace_idx, trace_idx, _vector_from_scalar(side_trace_mass(ctx, w_bn[kept])))

    rhs = np.zeros(layout.total_dim)
    fvals = problem.f(ctx.cell_points)
    add_at(
        rhs,
        uidx,
        -np.einsum("cq,cqa,qi->cai", ctx.cell_w, fvals, ctx.phi).reshape(
            ctx.num_cells, -1
        ),
    )
    return AssembledSystem(
        matrix=coo.tocsr(),
        rhs=rhs,
        layout=layout,
        equation="oseen",
        symmetric=False,
        problem=problem,
        ctx=ctx,
        boundary_coupling=bcoo.tocsr(),
        boundary_col_start=bstart,
    )


def verify_oseen_identity(mesh: Mesh, beta, k: int, trials: int = 20, seed: int = 0) -> float:
    """Max residual of (v x beta, grad v) = (1/2) <(beta.n) v, v> over random
    discrete vector fields v, for divergence-free beta."""
    layout = build_layout(mesh, k, "oseen")
    ctx = assembly_context(mesh, k)
    rng = np.random.default_rng(seed)

    beta_c = beta.at(ctx.cell_points)
    bn = np.einsum("sqa,sa->sq", beta.at(ctx.fs_points), ctx.fs_normal)

    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(layout.total_dim)
        v_cells = eval_u_cells(ctx, layout, x)
        coeff = x[layout.u_offset : layout.u_offset + layout.u_dim].reshape(-1, 2, ctx.n)
        gv = np.einsum("can,cqnd->cqad", coeff, ctx.gphys)
        v_sides = eval_u_sides(ctx, layout, x)

        lhs = float(np.einsum("cq,cqa,cqd,cqad->", ctx.cell_w, v_cells, beta_c, gv))
        rhs = 0.5 * float(np.einsum("sq,sq,sqa,sqa->", ctx.fs_w, bn, v_sides, v_sides))
        worst = max(worst, abs(lhs - rhs))
    return worst
