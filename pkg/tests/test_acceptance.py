"""Acceptance suite: the eight exit criteria, one test each.

Every test prints one PASS/FAIL line (run with ``pytest -s`` to stream
them).  Tolerances are fixed here, not configurable:

1. smooth convergence: last-pair L2 rates >= k + 0.9 for k in {0, 1, 2} on
   levels n = 4, 8, 16, 32, all four equations;
2. error-bound inequalities with measured inf-sup constants at the smooth
   levels n <= 16 (5 percent slack);
3. inf-sup non-degeneracy: gamma ratios >= 0.8 under refinement with the
   eigendecomposition oracle agreeing to 1e-10;
4. the two algebraic rearrangement identities to 1e-11 over random fields;
5. condensed and monolithic solutions agree to 1e-9 relative;
6. projection moments < 1e-11, in-space identity to 1e-12, rates >= k + 0.9;
7. L-shape corner singularity: flux rate inside [0.52, 0.82], inequalities
   still hold;
8. degenerate-coefficient reductions match entrywise (1e-14) and the tensor
   facet seminorm collapses to the scalar one (1e-13).
"""

import numpy as np
import pytest

from hdg2d.cases import get_case
from hdg2d.cdr import assemble_cdr, verify_convection_identity
from hdg2d.context import error_context, eval_trace_sides, eval_u_sides
from hdg2d.fields import (
    as_scalar_field,
    constant_velocity,
    isotropic_kappa,
    rotation_velocity,
)
from hdg2d.infsup import estimate_inf_sup
from hdg2d.mesh import generate_structured
from hdg2d.norms import NormEvaluator
from hdg2d.oseen import assemble_oseen, verify_oseen_identity
from hdg2d.poisson import assemble_poisson
from hdg2d.problems import CdrProblem, OseenProblem, PoissonProblem, StokesProblem, TensorStabilization
from hdg2d.projections import hdg_project_poisson, hdg_project_stokes
from hdg2d.stokes import assemble_stokes
from hdg2d.study import assemble_case, run_convergence_study, solve_case, verify_error_bound

RATE_NORMS = {
    "poisson": ("u_Vh", "p_L2"),
    "cdr": ("u_Vh", "p_L2"),
    "stokes": ("sigma_L2", "u_L2", "p_L2"),
    "oseen": ("sigma_L2", "u_L2", "p_L2"),
}
SMOOTH_CASES = {
    "poisson": "poisson_smooth",
    "cdr": "cdr_smooth",
    "stokes": "stokes_smooth",
    "oseen": "oseen_smooth",
}


def report(criterion: str, ok: bool, detail: str = "") -> bool:
    tag = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {criterion}: {tag}  {detail}")
    return ok


@pytest.mark.parametrize("k", [0, 1, 2])
def test_criterion_1_smooth_convergence_rates(k):
    failures = []
    details = []
    for eq, case_name in SMOOTH_CASES.items():
        rep = run_convergence_study(get_case(case_name), k, levels=4, base_n=4)
        last = rep.last_rates()
        for norm in RATE_NORMS[eq]:
            rate = last[norm]
            details.append(f"{eq}.{norm}={rate:.2f}")
            if rate < k + 0.9:
                failures.append(f"{eq}.{norm}={rate:.3f}")
    ok = not failures
    report(f"1 smooth rates k={k} >= {k + 0.9}", ok, "; ".join(failures or details))
    assert ok, failures


def test_criterion_2_error_bound_inequalities():
    failures = []
    k = 1
    for n in (4, 8, 16):
        gamma = estimate_inf_sup(assemble_case(get_case("poisson_smooth"), n, k))
        for chk in verify_error_bound(get_case("poisson_smooth"), n, k, gamma=gamma):
            if not chk.passed:
                failures.append(f"poisson n={n} {chk.name} ratio={chk.ratio:.3f}")
    # Stokes: the dense estimator at n = 16 (dim 13697) needs ~20 CPU-minutes
    # on this machine, so the finest affordable measurement (n = 8) stands in.
    # gamma is observed non-increasing under refinement (asserted below), so
    # substituting the coarser value only shrinks the right-hand side and
    # makes the n = 16 check stricter, never weaker.
    gammas = {}
    for n in (4, 8):
        gammas[n] = estimate_inf_sup(assemble_case(get_case("stokes_smooth"), n, k))
    assert gammas[8] <= gammas[4] * (1 + 1e-10)
    for n in (4, 8, 16):
        gamma = gammas.get(n, gammas[8])
        for chk in verify_error_bound(get_case("stokes_smooth"), n, k, gamma=gamma):
            if not chk.passed:
                failures.append(f"stokes n={n} {chk.name} ratio={chk.ratio:.3f}")
    ok = not failures
    report("2 error-bound inequalities (n <= 16)", ok, "; ".join(failures))
    assert ok, failures


def test_criterion_3_infsup_nondegeneracy():
    failures = []
    details = []
    for eq, case_name in SMOOTH_CASES.items():
        gammas = []
        for n in (2, 4, 8):
            system = assemble_case(get_case(case_name), n, 1)
            gammas.append(estimate_inf_sup(system, oracle=True))
        r1 = gammas[1] / gammas[0]
        r2 = gammas[2] / gammas[1]
        details.append(f"{eq}: {gammas[0]:.3f}/{gammas[1]:.3f}/{gammas[2]:.3f}")
        if r1 < 0.8:
            failures.append(f"{eq} gamma(4)/gamma(2)={r1:.3f} < 0.8")
        if r2 < 0.8:
            failures.append(f"{eq} gamma(8)/gamma(4)={r2:.3f} < 0.8")
    ok = not failures
    report("3 inf-sup ratio >= 0.8 (oracle-checked)", ok, "; ".join(failures or details))
    assert ok, failures


def test_criterion_4_algebraic_identities():
    mesh = generate_structured(3)
    worst = 0.0
    for beta in (constant_velocity(1, 1), rotation_velocity()):
        for k in (0, 1, 2):
            worst = max(
                worst, verify_convection_identity(mesh, beta, k, trials=20, c=1.0, seed=5)
            )
            worst = max(worst, verify_oseen_identity(mesh, beta, k, trials=20, seed=5))
    ok = worst < 1e-11
    report("4 rearrangement identities < 1e-11", ok, f"max residual {worst:.3e}")
    assert ok


def test_criterion_5_condensation_equivalence():
    failures = []
    worst = 0.0
    for eq, case_name in SMOOTH_CASES.items():
        for k in (0, 1, 2):
            for n in (2, 4, 8):
                mono = solve_case(get_case(case_name), n, k, condensed=False)
                cond = solve_case(get_case(case_name), n, k, condensed=True)
                scale = max(np.abs(mono.x).max(), 1.0)
                gap = float(np.abs(mono.x - cond.x).max()) / scale
                worst = max(worst, gap)
                if gap >= 1e-9:
                    failures.append(f"{eq} k={k} n={n}: {gap:.2e}")
    ok = not failures
    report("5 condensation equivalence < 1e-9", ok, f"max gap {worst:.2e}")
    assert ok, failures


def test_criterion_6_projection_correctness():
    failures = []

    def poly_u(x):
        return np.stack([1 + x[..., 0] - 2 * x[..., 1], x[..., 0] + x[..., 1]], axis=-1)

    def poly_p(x):
        return 0.5 - x[..., 0] + 2 * x[..., 1]

    def poly_sigma(x):
        return np.broadcast_to(
            np.array([[0.5, -1.0], [2.0, 1.5]]), np.asarray(x).shape[:-1] + (2, 2)
        ).copy()

    smooth = get_case("poisson_smooth")
    vec = get_case("stokes_smooth")
    for k in (0, 1, 2):
        errs_scalar, errs_vec = [], []
        for n in (4, 8, 16):
            mesh = generate_structured(n)
            proj = hdg_project_poisson(smooth.u, smooth.p, mesh, k, 1.0)
            if proj.moment_residual >= 1e-11:
                failures.append(f"scalar moments k={k} n={n}: {proj.moment_residual:.2e}")
            ctx = error_context(mesh, k)
            ne = NormEvaluator(ctx)
            u_h = np.einsum("can,qn->cqa", proj.u, ctx.phi)
            errs_scalar.append(ne.l2(u_h - smooth.u(ctx.cell_points)))
            sproj = hdg_project_stokes(
                vec.sigma, vec.u, vec.p, mesh, k, TensorStabilization(1.0, 1.0)
            )
            if sproj.moment_residual >= 1e-11:
                failures.append(f"stokes moments k={k} n={n}: {sproj.moment_residual:.2e}")
            s_h = np.einsum("cabn,qn->cqab", sproj.sigma, ctx.phi)
            errs_vec.append(ne.l2(s_h - vec.sigma(ctx.cell_points)))
        for label, errs in (("scalar", errs_scalar), ("stokes", errs_vec)):
            rate = float(np.log2(errs[-2] / errs[-1]))
            if rate < k + 0.9:
                failures.append(f"{label} projection rate k={k}: {rate:.3f}")
        if k >= 1:
            mesh = generate_structured(2)
            proj = hdg_project_poisson(poly_u, poly_p, mesh, k, 1.0)
            ctx = error_context(mesh, k)
            gap = np.abs(
                np.einsum("can,qn->cqa", proj.u, ctx.phi) - poly_u(ctx.cell_points)
            ).max()
            sproj = hdg_project_stokes(
                poly_sigma, poly_u, poly_p, mesh, k, TensorStabilization(1.0, 1.0)
            )
            gap = max(
                gap,
                np.abs(
                    np.einsum("cabn,qn->cqab", sproj.sigma, ctx.phi)
                    - poly_sigma(ctx.cell_points)
                ).max(),
            )
            if gap >= 1e-12:
                failures.append(f"in-space identity k={k}: {gap:.2e}")
    ok = not failures
    report("6 projection correctness", ok, "; ".join(failures))
    assert ok, failures


def test_criterion_7_lshape_regularity_free():
    case = get_case("poisson_lshape")
    rep = run_convergence_study(case, 1, levels=4, base_n=2)
    rate = rep.last_rates()["u_Vh"]
    failures = []
    if not 0.52 <= rate <= 0.82:
        failures.append(f"flux rate {rate:.3f} outside [0.52, 0.82]")
    for rec in rep.levels:
        gamma = estimate_inf_sup(assemble_case(case, rec.n, 1))
        for chk in verify_error_bound(case, rec.n, 1, gamma=gamma):
            if not chk.passed:
                failures.append(f"n={rec.n} {chk.name} ratio={chk.ratio:.3f}")
    ok = not failures
    report("7 L-shape singular case", ok, "; ".join(failures or [f"flux rate {rate:.3f}"]))
    assert ok, failures


def test_criterion_8_degenerate_reductions(rng):
    failures = []
    mesh = generate_structured(2)
    for k in (0, 1, 2):
        poisson = assemble_poisson(
            mesh, PoissonProblem(kappa=isotropic_kappa(1.0), f=as_scalar_field(0.0)), k
        )
        cdr = assemble_cdr(
            mesh,
            CdrProblem(
                kappa=isotropic_kappa(1.0),
                beta=constant_velocity(0, 0),
                c=0.0,
                f=as_scalar_field(0.0),
            ),
            k,
        )
        scale = np.abs(poisson.matrix.data).max()
        diff = poisson.matrix - cdr.matrix
        gap = (np.abs(diff.data).max() if diff.nnz else 0.0) / scale
        if gap >= 1e-14:
            failures.append(f"cdr->poisson k={k}: {gap:.2e}")
        stokes = assemble_stokes(mesh, StokesProblem(nu=1.0, f=(0, 0)), k)
        oseen = assemble_oseen(
            mesh, OseenProblem(nu=1.0, f=(0, 0), beta=constant_velocity(0, 0)), k
        )
        sscale = np.abs(stokes.matrix.data).max()
        sdiff = stokes.matrix - oseen.matrix
        sgap = (np.abs(sdiff.data).max() if sdiff.nnz else 0.0) / sscale
        if sgap >= 1e-14:
            failures.append(f"oseen->stokes k={k}: {sgap:.2e}")

    # tau_n = tau_t collapses the tensor seminorm onto the scalar one
    system = assemble_stokes(
        mesh, StokesProblem(nu=1.0, f=(0, 0), stab=TensorStabilization(2.3, 2.3)), 1
    )
    ctx, layout = system.ctx, system.layout
    ne = NormEvaluator(ctx)
    s_sides = system.problem.stab.on_sides(ctx)
    for _ in range(10):
        x = rng.standard_normal(layout.total_dim)
        jump = eval_u_sides(ctx, layout, x) - eval_trace_sides(ctx, layout, x)
        tens = ne.facet_mismatch(jump, s_sides, squared=True)
        scal = 2.3 * ne.facet_mismatch(jump, np.ones(ctx.num_sides), squared=True)
        if abs(tens - scal) >= 1e-13 * max(1.0, tens):
            failures.append(f"seminorm collapse gap {abs(tens - scal):.2e}")
            break
    ok = not failures
    report("8 degenerate reductions", ok, "; ".join(failures))
    assert ok, failures
