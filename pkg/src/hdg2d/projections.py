"""Element-local HDG projections and facet L2 projections.

The scalar projection (Pi_V u, Pi_Q p) matches u and p against P_{k-1}
volume moments and ties the pair together through the facet condition

    <Pi_V u . n + tau Pi_Q p, lambda>_F = <u . n + tau p, lambda>_F

for every facet test lambda in P_k(F).  The Stokes projection
(Pi_S sigma, Pi_V u, Pi_Q p) additionally matches the trace of sigma
against all of P_k and uses the traction facet condition

    <Pi_S sigma n - Pi_Q p n - S Pi_V u, lambda> = <sigma n - p n - S u, lambda>,

the sign arrangement under which the interpolation errors cancel from the
discrete equations.  Volume moments are diagonal in the orthonormal modal
basis, so each element solve is a small dense system; solvability holds for
positive stabilization and is still guarded numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import p_dim
from .context import FemContext, error_context
from .errors import ProjectionError
from .mesh import Mesh
from .problems import TensorStabilization
from .quadrature import edge_quadrature, triangle_quadrature


def _sides_by_cell(ctx: FemContext) -> list[list[int]]:
    out: list[list[int]] = [[] for _ in range(ctx.num_cells)]
    for s, c in enumerate(ctx.fs_cell):
        out[int(c)].append(s)
    return out


def _solve_cell(mat: np.ndarray, rhs: np.ndarray, cell: int) -> np.ndarray:
    try:
        sol = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError as exc:
        raise ProjectionError(f"cell {cell}: singular projection system") from exc
    if not np.all(np.isfinite(sol)):
        raise ProjectionError(f"cell {cell}: projection solve produced non-finite values")
    return sol


@dataclass(frozen=True)
class ScalarProjection:
    u: np.ndarray  # (nc, 2, N)
    p: np.ndarray  # (nc, N)
    moment_residual: float


@dataclass(frozen=True)
class StokesProjection:
    sigma: np.ndarray  # (nc, 2, 2, N)
    u: np.ndarray  # (nc, 2, N)
    p: np.ndarray  # (nc, N)
    moment_residual: float


def hdg_project_poisson(u_fn, p_fn, mesh: Mesh, k: int, tau) -> ScalarProjection:
    """Project (u, p) into the scalar HDG spaces element by element."""
    from .problems import facet_constant

    ctx = error_context(mesh, k)
    tau = facet_constant(tau, mesh)
    n = ctx.n
    nm1 = p_dim(k - 1) if k > 0 else 0
    sides = _sides_by_cell(ctx)

    u_at = u_fn(ctx.cell_points)
    p_at = p_fn(ctx.cell_points)
    u_fs = u_fn(ctx.fs_points)
    p_fs = p_fn(ctx.fs_points)
    smix = np.einsum("sq,sqi,qm->sim", ctx.fs_w, ctx.fs_phi, ctx.mu)

    out_u = np.empty((ctx.num_cells, 2, n))
    out_p = np.empty((ctx.num_cells, n))
    worst = 0.0
    for c in range(ctx.num_cells):
        mat = np.zeros((3 * n, 3 * n))
        rhs = np.zeros(3 * n)
        row = 0
        for a in range(2):
            for t in range(nm1):
                mat[row, a * n + t] = ctx.detB[c]
                rhs[row] = np.einsum("q,q,q->", ctx.cell_w[c], u_at[c, :, a], ctx.phi[:, t])
                row += 1
        for t in range(nm1):
            mat[row, 2 * n + t] = ctx.detB[c]
            rhs[row] = np.einsum("q,q,q->", ctx.cell_w[c], p_at[c], ctx.phi[:, t])
            row += 1
        for s in sides[c]:
            f = int(ctx.fs_facet[s])
            nrm = ctx.fs_normal[s]
            for m in range(ctx.nm):
                for a in range(2):
                    mat[row, a * n : (a + 1) * n] = nrm[a] * smix[s, :, m]
                mat[row, 2 * n : 3 * n] = tau[f] * smix[s, :, m]
                un = u_fs[s] @ nrm
                rhs[row] = np.einsum(
                    "q,q,q->", ctx.fs_w[s], un + tau[f] * p_fs[s], ctx.mu[:, m]
                )
                row += 1
        sol = _solve_cell(mat, rhs, c)
        scale = max(float(np.linalg.norm(rhs)), 1e-30)
        worst = max(worst, float(np.linalg.norm(mat @ sol - rhs)) / scale)
        out_u[c] = sol[: 2 * n].reshape(2, n)
        out_p[c] = sol[2 * n :]
    return ScalarProjection(out_u, out_p, worst)


def hdg_project_stokes(
    sigma_fn, u_fn, p_fn, mesh: Mesh, k: int, stab: TensorStabilization
) -> StokesProjection:
    """Project (sigma, u, p) into the Stokes HDG spaces element by element."""
    ctx = error_context(mesh, k)
    n = ctx.n
    nm1 = p_dim(k - 1) if k > 0 else 0
    sides = _sides_by_cell(ctx)
    s_sides = stab.on_sides(ctx)

    sig_at = sigma_fn(ctx.cell_points)  # (nc, nq, 2, 2)
    u_at = u_fn(ctx.cell_points)
    p_at = p_fn(ctx.cell_points)
    sig_fs = sigma_fn(ctx.fs_points)
    u_fs = u_fn(ctx.fs_points)
    p_fs = p_fn(ctx.fs_points)
    smix = np.einsum("sq,sqi,qm->sim", ctx.fs_w, ctx.fs_phi, ctx.mu)

    dim = 7 * n
    off_u = 4 * n
    off_p = 6 * n
    comp = [(0, 0), (0, 1), (1, 0), (1, 1)]
    out_s = np.empty((ctx.num_cells, 2, 2, n))
    out_u = np.empty((ctx.num_cells, 2, n))
    out_p = np.empty((ctx.num_cells, n))
    worst = 0.0
    for c in range(ctx.num_cells):
        mat = np.zeros((dim, dim))
        rhs = np.zeros(dim)
        row = 0
        for rc, (r, d) in enumerate(comp):
            for t in range(nm1):
                mat[row, rc * n + t] = ctx.detB[c]
                rhs[row] = np.einsum(
                    "q,q,q->", ctx.cell_w[c], sig_at[c, :, r, d], ctx.phi[:, t]
                )
                row += 1
        for t in range(nm1, n):  # trace condition beyond what the moments imply
            mat[row, 0 * n + t] = ctx.detB[c]
            mat[row, 3 * n + t] = ctx.detB[c]
            tr = sig_at[c, :, 0, 0] + sig_at[c, :, 1, 1]
            rhs[row] = np.einsum("q,q,q->", ctx.cell_w[c], tr, ctx.phi[:, t])
            row += 1
        for a in range(2):
            for t in range(nm1):
                mat[row, off_u + a * n + t] = ctx.detB[c]
                rhs[row] = np.einsum("q,q,q->", ctx.cell_w[c], u_at[c, :, a], ctx.phi[:, t])
                row += 1
        for t in range(nm1):
            mat[row, off_p + t] = ctx.detB[c]
            rhs[row] = np.einsum("q,q,q->", ctx.cell_w[c], p_at[c], ctx.phi[:, t])
            row += 1
        for s in sides[c]:
            nrm = ctx.fs_normal[s]
            stens = s_sides[s]
            traction = (
                np.einsum("qrd,d->qr", sig_fs[s], nrm)
                - p_fs[s][:, None] * nrm[None, :]
                - np.einsum("rb,qb->qr", stens, u_fs[s])
            )
            for a in range(2):
                for m in range(ctx.nm):
                    for d in range(2):
                        rc = comp.index((a, d))
                        mat[row, rc * n : (rc + 1) * n] += nrm[d] * smix[s, :, m]
                    for b in range(2):
                        mat[row, off_u + b * n : off_u + (b + 1) * n] -= (
                            stens[a, b] * smix[s, :, m]
                        )
                    mat[row, off_p : off_p + n] -= nrm[a] * smix[s, :, m]
                    rhs[row] = np.einsum(
                        "q,q,q->", ctx.fs_w[s], traction[:, a], ctx.mu[:, m]
                    )
                    row += 1
        sol = _solve_cell(mat, rhs, c)
        scale = max(float(np.linalg.norm(rhs)), 1e-30)
        worst = max(worst, float(np.linalg.norm(mat @ sol - rhs)) / scale)
        out_s[c, 0, 0] = sol[0:n]
        out_s[c, 0, 1] = sol[n : 2 * n]
        out_s[c, 1, 0] = sol[2 * n : 3 * n]
        out_s[c, 1, 1] = sol[3 * n : 4 * n]
        out_u[c] = sol[off_u : off_u + 2 * n].reshape(2, n)
        out_p[c] = sol[off_p:]

        # the remaining (implied) trace moments against P_{k-1}
        if nm1:
            tr_proj = out_s[c, 0, 0, :nm1] + out_s[c, 1, 1, :nm1]
            tr = sig_at[c, :, 0, 0] + sig_at[c, :, 1, 1]
            tr_exact = np.einsum("q,q,qt->t", ctx.cell_w[c], tr, ctx.phi[:, :nm1])
            res = np.linalg.norm(ctx.detB[c] * tr_proj - tr_exact)
            worst = max(worst, res / scale)
    return StokesProjection(out_s, out_u, out_p, worst)


def facet_l2_project(g, mesh: Mesh, k: int, vector: bool = False) -> np.ndarray:
    """Facet-wise L2 projection onto P_k(F): coefficients in the orthonormal
    edge basis, (nf, k+1) or (nf, 2, k+1)."""
    from .basis import reference_basis

    basis = reference_basis(k)
    rule = edge_quadrature(2 * k + 6)
    mu = basis.edge.values(rule.t)
    a = mesh.vertices[mesh.facets[:, 0]]
    b = mesh.vertices[mesh.facets[:, 1]]
    pts = a[:, None, :] + rule.t[None, :, None] * (b - a)[:, None, :]
    gv = np.asarray(g(pts))
    if vector:
        return np.einsum("q,fqa,qm->fam", rule.weights, gv, mu)
    return np.einsum("q,fq,qm->fm", rule.weights, gv, mu)


def facet_p0_project(g, mesh: Mesh) -> np.ndarray:
    """Facet-wise constant L2 projection (the mean along each facet)."""
    rule = edge_quadrature(8)
    a = mesh.vertices[mesh.facets[:, 0]]
    b = mesh.vertices[mesh.facets[:, 1]]
    pts = a[:, None, :] + rule.t[None, :, None] * (b - a)[:, None, :]
    return np.einsum("q,fq...->f...", rule.weights, np.asarray(g(pts)))


def cell_p0_project(g, mesh: Mesh) -> np.ndarray:
    """Cell-wise constant L2 projection (the mean over each cell)."""
    rule = triangle_quadrature(8)
    v = mesh.vertices
    v0 = v[mesh.cells[:, 0]]
    b_map = np.stack(
        [v[mesh.cells[:, 1]] - v0, v[mesh.cells[:, 2]] - v0], axis=-1
    )
    pts = v0[:, None, :] + np.einsum("cab,qb->cqa", b_map, rule.xy)
    vals = np.asarray(g(pts))
    return 2.0 * np.einsum("q,cq...->c...", rule.weights, vals)
