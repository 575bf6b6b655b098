import numpy as np
import pytest

from conftest import edge_integral, triangle_integral
from hdg2d.cdr import assemble_cdr, verify_convection_identity
from hdg2d.condense import solve
from hdg2d.context import eval_p_cells, eval_p_sides
from hdg2d.errors import AssemblyError
from hdg2d.fields import (
    VelocityField,
    as_scalar_field,
    constant_velocity,
    isotropic_kappa,
    rotation_velocity,
)
from hdg2d.mesh import generate_structured
from hdg2d.poisson import assemble_poisson
from hdg2d.problems import CdrProblem, PoissonProblem
from test_poisson import PhysicalBasis


def cdr_problem(beta, c=1.0, f=0.0, p_d=0.0, tau=1.0):
    return CdrProblem(
        kappa=isotropic_kappa(1.0),
        beta=beta,
        c=c,
        f=as_scalar_field(f) if not callable(f) else f,
        p_dirichlet=as_scalar_field(p_d) if not callable(p_d) else p_d,
        tau=tau,
    )


@pytest.mark.parametrize("k", [0, 1, 2])
def test_beta_zero_degenerates_to_poisson(k):
    mesh = generate_structured(2)
    poisson = assemble_poisson(
        mesh, PoissonProblem(kappa=isotropic_kappa(1.0), f=as_scalar_field(0.0)), k
    )
    cdr = assemble_cdr(mesh, cdr_problem(constant_velocity(0, 0), c=0.0), k)
    diff = (poisson.matrix - cdr.matrix)
    scale = np.abs(poisson.matrix.data).max()
    assert (np.abs(diff.data).max() if diff.nnz else 0.0) < 1e-14 * scale
    assert np.abs(poisson.rhs - cdr.rhs).max() < 1e-14


def test_linear_solution_exact():
    # p = 1 - x, beta = (1, 1), c = 1: f = beta.grad p + c p = -x
    mesh = generate_structured(4)
    problem = cdr_problem(
        constant_velocity(1, 1),
        f=lambda x: -x[..., 0],
        p_d=lambda x: 1.0 - x[..., 0],
    )
    system = assemble_cdr(mesh, problem, 1)
    x = solve(system)
    p_h = eval_p_cells(system.ctx, system.layout, x)
    assert np.abs(p_h - (1.0 - system.ctx.cell_points[..., 0])).max() < 1e-10


def test_convection_blocks_match_brute_force():
    """assemble_cdr minus assemble_poisson isolates the convection/reaction
    couplings, compared entrywise against adaptive quadrature."""
    mesh = generate_structured(1)
    k = 0
    beta = constant_velocity(0.7, -0.4)
    c_val = 1.3
    base = assemble_poisson(
        mesh, PoissonProblem(kappa=isotropic_kappa(1.0), f=as_scalar_field(0.0)), k
    )
    cdr = assemble_cdr(mesh, cdr_problem(beta, c=c_val), k)
    diff = (cdr.matrix - base.matrix).toarray()
    layout = cdr.layout

    oracle = np.zeros_like(diff)
    for cell in range(mesh.num_cells):
        pb = PhysicalBasis(mesh, k, cell)
        v = mesh.vertices[mesh.cells[cell]]
        p_i = layout.p_dofs(cell)
        for i in range(layout.cell_dim):
            for j in range(layout.cell_dim):
                conv = triangle_integral(
                    lambda x, y: (pb.grad(i)(x, y) @ np.array([0.7, -0.4]))
                    * pb.value(j)(x, y),
                    *v,
                )
                reac = -c_val * triangle_integral(
                    lambda x, y: pb.value(i)(x, y) * pb.value(j)(x, y), *v
                )
                oracle[p_i[i], p_i[j]] = conv + reac
        for e in range(3):
            f = mesh.cell_facets[cell, e]
            if layout.facet_trace_start[f] < 0:
                continue
            nrm = mesh.cell_facet_signs[cell, e] * mesh.facet_normal[f]
            bn = np.array([0.7, -0.4]) @ nrm
            fa, fb = mesh.vertices[mesh.facets[f][0]], mesh.vertices[mesh.facets[f][1]]
            for i in range(layout.cell_dim):
                for m in range(k + 1):
                    col = layout.facet_trace_start[f] + m
                    oracle[p_i[i], col] += -bn * edge_integral(
                        lambda x, y: pb.value(i)(x, y) * pb.trace(mesh, f, m)(x, y),
                        fa,
                        fb,
                    )
                    oracle[col, col] += bn * edge_integral(
                        lambda x, y: pb.trace(mesh, f, m)(x, y) ** 2, fa, fb
                    )
    assert np.abs(diff - oracle).max() < 1e-13


@pytest.mark.parametrize(
    "beta", [constant_velocity(1, 1), rotation_velocity()], ids=["const", "rotation"]
)
@pytest.mark.parametrize("k", [0, 1, 2])
def test_convection_identity(beta, k):
    mesh = generate_structured(3)
    res = verify_convection_identity(mesh, beta, k, trials=20, c=1.0, seed=7)
    assert res < 1e-11


def test_identity_for_continuous_lift():
    # qbar equal to the trace of a globally continuous q and constant beta
    mesh = generate_structured(2)
    res = verify_convection_identity(mesh, constant_velocity(2.0, 0.5), 1, trials=5, c=0.0)
    assert res < 1e-12


def test_skew_part_matches_identity_at_matrix_level(rng):
    # with c = 0, div beta = 0 the convection contribution is skew up to the
    # facet jump term: x^T Conv x = (1/2) <(beta.n)(q - qbar), (q - qbar)>
    mesh = generate_structured(2)
    k = 2
    beta = rotation_velocity()
    base = assemble_poisson(
        mesh, PoissonProblem(kappa=isotropic_kappa(1.0), f=as_scalar_field(0.0)), k
    )
    cdr = assemble_cdr(mesh, cdr_problem(beta, c=0.0), k)
    conv = (cdr.matrix - base.matrix).toarray()
    ctx, layout = cdr.ctx, cdr.layout
    bn = np.einsum("sqa,sa->sq", beta.at(ctx.fs_points), ctx.fs_normal)
    for _ in range(10):
        x = rng.standard_normal(layout.total_dim)
        lhs = x @ conv @ x
        q_sides = eval_p_sides(ctx, layout, x)
        qbar = np.zeros_like(q_sides)
        for s in range(ctx.num_sides):
            start = layout.facet_trace_start[ctx.fs_facet[s]]
            if start >= 0:
                qbar[s] = ctx.mu @ x[start : start + ctx.nm]
        jump = q_sides - qbar
        rhs = 0.5 * np.einsum("sq,sq,sq,sq->", ctx.fs_w, bn, jump, jump)
        assert abs(lhs - rhs) < 1e-11 * max(1.0, abs(rhs))


def test_beta_perturbation_consistency():
    # matrix entries are linear in beta: finite differences in beta match the
    # directional assembly difference
    mesh = generate_structured(2)
    k = 1
    eps = 1e-6
    delta = (0.3, -0.2)

    def matrix_for(bx, by):
        return assemble_cdr(mesh, cdr_problem(constant_velocity(bx, by), c=1.0), k).matrix

    m0 = matrix_for(1.0, 0.5)
    m_plus = matrix_for(1.0 + eps * delta[0], 0.5 + eps * delta[1])
    fd = (m_plus - m0) / eps
    directional = matrix_for(1.0 + delta[0], 0.5 + delta[1]) - m0
    gap = (fd - directional)
    assert (np.abs(gap.data).max() if gap.nnz else 0.0) < 1e-6


def test_negative_effective_reaction_fatal():
    # c - div(beta)/2 < 0
    beta = VelocityField(
        at=lambda x: np.stack([x[..., 0], x[..., 1]], axis=-1),
        div=lambda x: np.full(np.asarray(x).shape[:-1], 2.0),
    )
    with pytest.raises(AssemblyError, match="reaction"):
        assemble_cdr(generate_structured(2), cdr_problem(beta, c=0.5), 1)


def test_tau_beta_violation_fatal_names_facet():
    with pytest.raises(AssemblyError, match="facet"):
        assemble_cdr(generate_structured(2), cdr_problem(constant_velocity(5.0, 0.0)), 1)
