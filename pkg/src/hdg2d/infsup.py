"""Discrete inf-sup constant estimation.

gamma_h = min_x max_y  x^T M y / (|x|_N |y|_N)  is the smallest singular
value of the norm-whitened system matrix N^(-1/2) M N^(-1/2).  The primary
path whitens with a dense Cholesky factor and calls an SVD; the oracle path
whitens with a symmetric eigendecomposition and extracts the smallest
singular value from the spectrum of W^T W, so the two agree only if both
linear-algebra routes are sound.  For the vector equations both M and the
norm Gram are restricted to the mean-zero pressure subspace through one
Householder reflection of the pressure-mean constraint vector.

This is a desk-scale estimator by construction: it refuses problems above
the dimension cap rather than fall back to sparse eigensolvers.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .errors import SolverError
from .kernels import (
    CooBuilder,
    p_indices,
    side_mass,
    side_mixed,
    side_partition,
    side_trace_mass,
    sigma_indices,
    u_indices,
)
from .layout import VECTOR_EQUATIONS
from .system import AssembledSystem

DIMENSION_CAP = 20_000
_SQRT2 = np.sqrt(2.0)


def _scalar_mismatch_gram(coo, ctx, layout, weight_sides):
    """|q - qbar|^2 Gram over the (p, trace) blocks; weight is (nfs, nqf)."""
    pidx = p_indices(layout)
    kept, trace_idx, _ = side_partition(ctx, layout)
    w = ctx.fs_w * weight_sides
    p_side = pidx[ctx.fs_cell]
    coo.add(p_side, p_side, side_mass(ctx, w))
    cqm = side_mixed(ctx, w[kept], kept)
    coo.add(p_side[kept], trace_idx, -cqm)
    coo.add_transposed(p_side[kept], trace_idx, -cqm)
    coo.add(trace_idx, trace_idx, side_trace_mass(ctx, w[kept]))


def _vector_mismatch_gram(coo, ctx, layout, s_pointwise):
    """|v - vbar|_S^2 Gram; ``s_pointwise`` is (nfs, nqf, 2, 2)."""
    uidx = u_indices(layout)
    kept, trace_idx, _ = side_partition(ctx, layout)
    u_side = uidx[ctx.fs_cell]
    n, nm = ctx.n, ctx.nm

    uu = np.einsum(
        "sq,sqab,sqi,sqj->saibj", ctx.fs_w, s_pointwise, ctx.fs_phi, ctx.fs_phi
    ).reshape(-1, 2 * n, 2 * n)
    coo.add(u_side, u_side, uu)
    mix = np.einsum(
        "sq,sqab,sqi,qm->saibm", ctx.fs_w[kept], s_pointwise[kept], ctx.fs_phi[kept], ctx.mu
    ).reshape(-1, 2 * n, 2 * nm)
    coo.add(u_side[kept], trace_idx, -mix)
    coo.add_transposed(u_side[kept], trace_idx, -mix)
    tt = np.einsum(
        "sq,sqab,qi,qm->saibm", ctx.fs_w[kept], s_pointwise[kept], ctx.mu, ctx.mu
    ).reshape(-1, 2 * nm, 2 * nm)
    coo.add(trace_idx, trace_idx, tt)


def norm_gram(system: AssembledSystem):
    """Sparse Gram matrix of the equation's composite stability norm over the
    core (constraint-free) DOF space."""
    ctx = system.ctx
    layout = system.layout
    eq = system.equation
    dim = layout.total_dim - layout.constraint_dim
    coo = CooBuilder(dim)
    mass = np.einsum("cq,qi,qj->cij", ctx.cell_w, ctx.phi, ctx.phi)

    if eq in ("poisson", "cdr"):
        kinv = system.problem.kappa.inverse(ctx.cell_points)
        uidx = u_indices(layout)
        a_blk = np.einsum("cq,cqab,qi,qj->caibj", ctx.cell_w, kinv, ctx.phi, ctx.phi)
        coo.add(uidx, uidx, a_blk.reshape(ctx.num_cells, 2 * ctx.n, 2 * ctx.n))
        pidx = p_indices(layout)
        coo.add(pidx, pidx, mass)
        if eq == "poisson":
            weight = np.broadcast_to(
                system.problem.tau_on(layout.mesh)[ctx.fs_facet, None],
                (ctx.num_sides, ctx.nqf),
            )
        else:
            weight = system.problem.tau_beta_sides(ctx)
        _scalar_mismatch_gram(coo, ctx, layout, weight)
        return coo.tocsr()

    from .stokes import _vector_from_scalar

    sidx = sigma_indices(layout)
    coo.add(sidx, sidx, _vector_from_scalar(_vector_from_scalar(mass)) / system.problem.nu)
    uidx = u_indices(layout)
    coo.add(uidx, uidx, _vector_from_scalar(mass))
    pidx = p_indices(layout)
    coo.add(pidx, pidx, mass)
    stab = system.problem.stab
    tn = stab.tau_n_on(layout.mesh)[ctx.fs_facet]
    tt = stab.tau_t_on(layout.mesh)[ctx.fs_facet]
    s_tensor = stab.tensor(ctx.fs_normal, tn, tt)  # (nfs, 2, 2)
    s_pointwise = np.broadcast_to(
        s_tensor[:, None, :, :], (ctx.num_sides, ctx.nqf, 2, 2)
    ).copy()
    if eq == "oseen":
        bn = np.einsum(
            "sqa,sa->sq", system.problem.beta.at(ctx.fs_points), ctx.fs_normal
        )
        s_pointwise -= 0.5 * bn[:, :, None, None] * np.eye(2)
    _vector_mismatch_gram(coo, ctx, layout, s_pointwise)
    return coo.tocsr()


def _pressure_mean_vector(system: AssembledSystem) -> np.ndarray:
    layout = system.layout
    g = np.zeros(layout.total_dim - layout.constraint_dim)
    g[layout.p_offset : layout.p_offset + layout.p_dim : layout.cell_dim] = (
        system.ctx.detB / _SQRT2
    )
    return g


def _restrict_mean_zero(mat: np.ndarray, v: np.ndarray, j0: int) -> np.ndarray:
    """(H mat H) with the constrained direction removed; H = I - 2 v v^T."""
    mat -= 2.0 * np.outer(v, v @ mat)
    mat -= 2.0 * np.outer(mat @ v, v)
    mat = np.delete(mat, j0, axis=0)
    return np.delete(mat, j0, axis=1)


def _dense_pair(system: AssembledSystem, gram=None):
    if gram is None:
        gram = norm_gram(system)
    dim = system.layout.total_dim - system.layout.constraint_dim
    if dim > DIMENSION_CAP:
        raise SolverError(
            f"inf-sup estimator dimension {dim} exceeds the dense cap {DIMENSION_CAP}"
        )
    m = system.core_matrix().toarray()
    n = gram.toarray()
    if system.equation in VECTOR_EQUATIONS:
        g = _pressure_mean_vector(system)
        g = g / np.linalg.norm(g)
        j0 = int(np.argmax(np.abs(g)))
        w = g.copy()
        w[j0] += np.sign(g[j0]) if g[j0] != 0 else 1.0
        w /= np.linalg.norm(w)
        m = _restrict_mean_zero(m, w, j0)
        n = _restrict_mean_zero(n, w, j0)
    return m, n


def gamma_svd(m: np.ndarray, n: np.ndarray) -> float:
    """Cholesky-whitened smallest singular value (primary path)."""
    try:
        chol = sla.cholesky(n, lower=True)
    except sla.LinAlgError as exc:
        raise SolverError("norm Gram matrix is not positive definite") from exc
    w = sla.solve_triangular(chol, m, lower=True)
    w = sla.solve_triangular(chol, w.T, lower=True).T
    sv = sla.svd(w, compute_uv=False, overwrite_a=True)
    return float(sv[-1])


def gamma_eig_oracle(m: np.ndarray, n: np.ndarray) -> float:
    """Eigendecomposition-whitened cross-check of :func:`gamma_svd`."""
    lam, q = sla.eigh(n)
    if lam[0] <= 0:
        raise SolverError("norm Gram matrix is not positive definite")
    root = q * (lam ** -0.5)
    w = root.T @ m @ root
    ev = sla.eigvalsh(w.T @ w)
    return float(np.sqrt(max(ev[0], 0.0)))


def estimate_inf_sup(system: AssembledSystem, gram=None, oracle: bool = False) -> float:
    """Measured inf-sup constant of the assembled form in its stability norm."""
    m, n = _dense_pair(system, gram)
    gamma = gamma_svd(m, n)
    if oracle:
        check = gamma_eig_oracle(m, n)
        rel = abs(gamma - check) / max(gamma, 1e-300)
        if rel > 1e-10:
            raise SolverError(
                f"inf-sup estimates disagree: svd {gamma:.15e} vs eig {check:.15e}"
            )
    return gamma
