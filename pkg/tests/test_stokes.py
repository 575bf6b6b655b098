import numpy as np
import pytest

from conftest import edge_integral, triangle_integral
from hdg2d.condense import solve
from hdg2d.context import (
    eval_p_cells,
    eval_sigma_cells,
    eval_u_cells,
    eval_u_sides,
    eval_trace_sides,
)
from hdg2d.errors import AssemblyError
from hdg2d.mesh import build_mesh, generate_structured
from hdg2d.norms import NormEvaluator
from hdg2d.problems import StokesProblem, TensorStabilization
from hdg2d.stokes import apply_dirichlet_lift, assemble_stokes
from test_poisson import PhysicalBasis


def rigid_rotation(x):
    return np.stack([x[..., 1], -x[..., 0]], axis=-1)


def stokes_problem(nu=1.0, f=(0.0, 0.0), tau_n=1.0, tau_t=1.0):
    return StokesProblem(nu=nu, f=f, stab=TensorStabilization(tau_n, tau_t))


def test_matrix_symmetric():
    system = assemble_stokes(generate_structured(3), stokes_problem(nu=2.0), 1)
    assert system.symmetric
    assert system.symmetry_defect() < 1e-12


def test_rigid_rotation_exact():
    mesh = generate_structured(3)
    system = assemble_stokes(mesh, stokes_problem(), 1)
    lifted, _ = apply_dirichlet_lift(system, rigid_rotation)
    x = solve(lifted)
    ctx, layout = system.ctx, system.layout
    assert np.abs(eval_u_cells(ctx, layout, x) - rigid_rotation(ctx.cell_points)).max() < 1e-10
    assert np.abs(eval_p_cells(ctx, layout, x)).max() < 1e-10
    sig = eval_sigma_cells(ctx, layout, x)
    sig_exact = np.zeros_like(sig)
    sig_exact[..., 0, 1] = 1.0
    sig_exact[..., 1, 0] = -1.0
    assert np.abs(sig - sig_exact).max() < 1e-10


def test_zero_boundary_velocity_lift_is_zero():
    system = assemble_stokes(generate_structured(2), stokes_problem(), 1)
    lifted, trace = apply_dirichlet_lift(system, lambda x: np.zeros(x.shape))
    assert np.abs(trace.values).max() == 0.0
    assert np.array_equal(lifted.rhs, system.rhs)


def test_pressure_mean_zero():
    def forcing(x):
        return np.stack([np.sin(3 * x[..., 1]), np.cos(2 * x[..., 0])], axis=-1)

    mesh = generate_structured(4)
    system = assemble_stokes(mesh, stokes_problem(f=forcing), 1)
    x = solve(system)
    layout, ctx = system.layout, system.ctx
    p_cells = eval_p_cells(ctx, layout, x)
    mean = np.einsum("cq,cq->", ctx.cell_w, p_cells)
    assert abs(mean) < 1e-10


def test_momentum_facet_residual():
    def forcing(x):
        return np.stack([x[..., 1] ** 2, -x[..., 0]], axis=-1)

    system = assemble_stokes(generate_structured(3), stokes_problem(f=forcing), 1)
    x = solve(system)
    res = system.matrix @ x - system.rhs
    layout = system.layout
    tr = res[layout.trace_offset : layout.trace_offset + layout.trace_dim]
    scale = max(np.abs(system.rhs).max(), 1.0)
    assert np.abs(tr).max() < 1e-10 * scale


def test_sigma_mass_spd_and_stabilization_psd():
    system = assemble_stokes(generate_structured(2), stokes_problem(tau_n=2.0, tau_t=0.5), 1)
    dense = system.matrix.toarray()
    layout = system.layout
    a = dense[: layout.sigma_dim, : layout.sigma_dim]
    assert np.linalg.eigvalsh(a).min() > 0
    u_tr = np.r_[
        np.arange(layout.u_offset, layout.u_offset + layout.u_dim),
        np.arange(layout.trace_offset, layout.trace_offset + layout.trace_dim),
    ]
    c_block = -dense[np.ix_(u_tr, u_tr)]
    assert np.linalg.eigvalsh(c_block).min() > -1e-12


def test_stabilization_tensor_eigenvalues():
    stab = TensorStabilization(2.0, 0.5)
    rng = np.random.default_rng(3)
    for _ in range(12):
        theta = rng.uniform(0, 2 * np.pi)
        nrm = np.array([np.cos(theta), np.sin(theta)])
        s = stab.tensor(nrm, 2.0, 0.5)
        eig = np.sort(np.linalg.eigvalsh(s))
        assert np.abs(eig - np.array([0.5, 2.0])).max() < 1e-14


def test_s_seminorm_collapses_to_scalar_tau(rng):
    # tau_n = tau_t = tau makes the S-weighted seminorm tau times the
    # identity-weighted one
    mesh = generate_structured(2)
    system = assemble_stokes(mesh, stokes_problem(tau_n=1.7, tau_t=1.7), 1)
    ctx, layout = system.ctx, system.layout
    ne = NormEvaluator(ctx)
    s_sides = system.problem.stab.on_sides(ctx)
    for _ in range(6):
        x = rng.standard_normal(layout.total_dim)
        v = eval_u_sides(ctx, layout, x)
        vbar = eval_trace_sides(ctx, layout, x)
        jump = v - vbar
        with_s = ne.facet_mismatch(jump, s_sides, squared=True)
        with_id = ne.facet_mismatch(jump, np.ones(ctx.num_sides), squared=True)
        assert abs(with_s - 1.7 * with_id) < 1e-13 * max(1.0, with_s)


def test_single_cell_k0_matches_brute_force():
    mesh = build_mesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)])
    nu = 2.0
    tau_n, tau_t = 1.5, 0.75
    system = assemble_stokes(mesh, stokes_problem(nu=nu, tau_n=tau_n, tau_t=tau_t), 0)
    layout = system.layout
    pb = PhysicalBasis(mesh, 0)
    v = mesh.vertices[mesh.cells[0]]
    n = 1
    comp = [(0, 0), (0, 1), (1, 0), (1, 1)]
    stab = TensorStabilization(tau_n, tau_t)

    dim = layout.total_dim
    oracle = np.zeros((dim, dim))
    bdim = system.boundary_coupling.shape[1]
    oracle_b = np.zeros((dim, bdim))

    def outward(f):
        e = int(np.flatnonzero(mesh.cell_facets[0] == f)[0])
        return mesh.cell_facet_signs[0, e] * mesh.facet_normal[f]

    def facet_pts(f):
        return mesh.vertices[mesh.facets[f][0]], mesh.vertices[mesh.facets[f][1]]

    mass = triangle_integral(lambda x, y: pb.value(0)(x, y) ** 2, *v)
    for rc in range(4):
        oracle[rc, rc] = mass / nu

    # b1 (volume gradient term vanishes for k = 0) and c_S facet couplings
    for f in range(mesh.num_facets):
        nrm = outward(f)
        fa, fb = facet_pts(f)
        s_tensor = stab.tensor(nrm, tau_n, tau_t)
        phiphi = edge_integral(lambda x, y: pb.value(0)(x, y) ** 2, fa, fb)
        col0 = system.boundary_col_start[f]
        mu_phi = edge_integral(
            lambda x, y: pb.value(0)(x, y) * pb.trace(mesh, f, 0)(x, y), fa, fb
        )
        mumu = edge_integral(lambda x, y: pb.trace(mesh, f, 0)(x, y) ** 2, fa, fb)
        for rc, (r, d) in enumerate(comp):
            for a in range(2):
                if a == r:
                    val = nrm[d] * phiphi
                    oracle[rc, layout.u_offset + a] += val
                    oracle[layout.u_offset + a, rc] += val
                    oracle_b[rc, col0 + a] += -nrm[d] * mu_phi
        for a in range(2):
            row = layout.u_offset + a
            val = -nrm[a] * phiphi
            oracle[row, layout.p_offset] += val
            oracle[layout.p_offset, row] += val
            oracle_b[layout.p_offset, col0 + a] += nrm[a] * mu_phi
            for b in range(2):
                oracle[row, layout.u_offset + b] += -s_tensor[a, b] * phiphi
                oracle_b[row, col0 + b] += s_tensor[a, b] * mu_phi
    cell_measure = triangle_integral(lambda x, y: pb.value(0)(x, y), *v)
    oracle[layout.constraint_index, layout.p_offset] = cell_measure
    oracle[layout.p_offset, layout.constraint_index] = cell_measure

    assert np.abs(system.matrix.toarray() - oracle).max() < 1e-13
    assert np.abs(system.boundary_coupling.toarray() - oracle_b).max() < 1e-13


def test_invalid_stabilization_rejected():
    with pytest.raises(AssemblyError, match="tau_n"):
        assemble_stokes(generate_structured(2), stokes_problem(tau_n=-1.0), 1)
    with pytest.raises(AssemblyError, match="nu"):
        assemble_stokes(generate_structured(2), stokes_problem(nu=0.0), 1)
