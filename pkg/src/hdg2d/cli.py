"""Command-line front end.

Subcommands: ``solve`` (single case at the base level), ``convergence``
(refinement study with CSV/plot-data output and rate gates), ``infsup``
(measured inf-sup constants per level), ``mesh`` (generate/inspect mesh
files).  Exit codes: 0 success, 1 config error, 2 assembly/mesh error, 3
solver error, 4 acceptance-check failure.

CSV files carry full-precision values (17 significant digits) and the
config hash on every row; timing goes to stdout only, so identical configs
give byte-identical files.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .cases import get_case
from .condense import retained_dofs, solve
from .config import StudyConfig, load_config
from .errors import AssemblyError, ConfigError, HdgError, MeshFormatError, SolverError, TopologyError
from .infsup import DIMENSION_CAP, estimate_inf_sup
from .mesh import check_mesh, generate_lshape, generate_structured, load_mesh, save_mesh
from .problems import TensorStabilization
from .study import run_convergence_study, solve_case, verify_error_bound

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ASSEMBLY = 2
EXIT_SOLVER = 3
EXIT_CHECK = 4


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    if value is None:
        return ""
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _stab_args(cfg: StudyConfig):
    if cfg.equation in ("stokes", "oseen"):
        tau_n = cfg.tau if cfg.tau_n is None else cfg.tau_n
        tau_t = cfg.tau if cfg.tau_t is None else cfg.tau_t
        return {"tau": cfg.tau, "stab": TensorStabilization(tau_n, tau_t)}
    return {"tau": cfg.tau, "stab": None}


def cmd_solve(cfg: StudyConfig, out: Path, seed: int) -> int:
    case = get_case(cfg.case)
    result = solve_case(
        case, cfg.base_n, cfg.degree, condensed=cfg.condensation, **_stab_args(cfg)
    )
    layout = result.system.layout
    lines = [
        f"case = {cfg.case}",
        f"equation = {cfg.equation}",
        f"degree = {cfg.degree}",
        f"n = {cfg.base_n}",
        f"dofs = {layout.total_dim}",
        f"condensed_dofs = {len(retained_dofs(layout))}",
        f"residual = {_fmt(result.system.residual(result.x))}",
        f"config_hash = {cfg.config_hash}",
    ]
    for name, err in result.errors.items():
        lines.append(f"err_{name} = {_fmt(err)}")
    if cfg.condensation:
        x_mono = solve(result.system)
        scale = float(np.abs(x_mono).max()) or 1.0
        gap = float(np.abs(x_mono - result.x).max()) / scale
        lines.append(f"condensation_gap = {_fmt(gap)}")
    if cfg.identities and cfg.equation in ("cdr", "oseen"):
        from .cdr import verify_convection_identity
        from .oseen import verify_oseen_identity

        problem = case.problem(**_stab_args(cfg))
        mesh = case.mesh(cfg.base_n)
        if cfg.equation == "cdr":
            res = verify_convection_identity(
                mesh, problem.beta, cfg.degree, trials=20, c=problem.c, seed=seed
            )
        else:
            res = verify_oseen_identity(mesh, problem.beta, cfg.degree, trials=20, seed=seed)
        lines.append(f"identity_residual = {_fmt(res)}")
    path = out / f"{cfg.prefix}_solve.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_convergence(cfg: StudyConfig, out: Path) -> int:
    case = get_case(cfg.case)
    report = run_convergence_study(
        case,
        cfg.degree,
        cfg.levels,
        base_n=cfg.base_n,
        with_infsup=cfg.infsup,
        **_stab_args(cfg),
    )
    names = report.error_names()
    rates = report.rates()
    header = (
        ["case", "equation", "k", "level", "n", "h", "dofs", "condensed_dofs"]
        + [f"err_{n}" for n in names]
        + [f"rate_{n}" for n in names]
        + ["gamma", "config_hash"]
    )
    rows = []
    for i, rec in enumerate(report.levels):
        row = [cfg.case, cfg.equation, cfg.degree, i, rec.n, rec.h, rec.dofs, rec.condensed_dofs]
        row += [rec.errors[n] for n in names]
        row += [rates[n][i - 1] if i > 0 else None for n in names]
        row += [rec.gamma, cfg.config_hash]
        rows.append(row)
    csv_path = out / f"{cfg.prefix}_convergence.csv"
    _write_csv(csv_path, header, rows)
    for name in names:
        data = "\n".join(
            f"{_fmt(rec.h)} {_fmt(rec.errors[name])}" for rec in report.levels
        )
        (out / f"{cfg.prefix}_{name}.dat").write_text(data + "\n", encoding="utf-8")

    print(f"{'n':>6} {'h':>10} " + " ".join(f"{n:>12}" for n in names))
    for rec in report.levels:
        print(
            f"{rec.n:>6} {rec.h:>10.4g} "
            + " ".join(f"{rec.errors[n]:>12.4e}" for n in names)
            + f"   [{rec.seconds:.2f}s]"
        )
    last = report.last_rates()
    print("last-pair rates: " + ", ".join(f"{n}={r:.3f}" for n, r in last.items()))
    print(f"wrote {csv_path}")

    if cfg.levels >= 2:
        watched = cfg.rate_norm or names[0]
        if watched not in last:
            raise ConfigError(f"rate_norm {watched!r} is not a reported error norm")
        rate = last[watched]
        if cfg.rate_band_low is not None or cfg.rate_band_high is not None:
            low = cfg.rate_band_low if cfg.rate_band_low is not None else -np.inf
            high = cfg.rate_band_high if cfg.rate_band_high is not None else np.inf
            if not (low <= rate <= high):
                print(f"FAIL: rate {watched}={rate:.3f} outside [{low}, {high}]")
                return EXIT_CHECK
        else:
            floor = cfg.min_rate if cfg.min_rate is not None else cfg.degree + 0.9
            if rate < floor:
                print(f"FAIL: rate {watched}={rate:.3f} below {floor}")
                return EXIT_CHECK
    if cfg.error_bounds:
        checks = verify_error_bound(
            case, cfg.base_n, cfg.degree, **_stab_args(cfg)
        )
        for chk in checks:
            status = "ok" if chk.passed else "FAIL"
            print(f"bound {chk.name}: lhs={chk.lhs:.4e} rhs={chk.rhs:.4e} [{status}]")
        if any(chk.asserted and not chk.passed for chk in checks):
            return EXIT_CHECK
    return EXIT_OK


def cmd_infsup(cfg: StudyConfig, out: Path) -> int:
    from .study import assemble_case

    case = get_case(cfg.case)
    rows = []
    print(f"{'n':>6} {'dim':>8} {'gamma':>12}")
    for lev in range(cfg.levels):
        n = cfg.base_n * 2**lev
        system = assemble_case(case, n, cfg.degree, **_stab_args(cfg))
        dim = system.layout.total_dim - system.layout.constraint_dim
        if dim > DIMENSION_CAP:
            raise SolverError(
                f"level n={n}: dimension {dim} exceeds the estimator cap {DIMENSION_CAP}"
            )
        gamma = estimate_inf_sup(system)
        rows.append([cfg.case, cfg.degree, lev, n, system.layout.mesh.h_max, dim, gamma, cfg.config_hash])
        print(f"{n:>6} {dim:>8} {gamma:>12.6f}")
    csv_path = out / f"{cfg.prefix}_infsup.csv"
    _write_csv(
        csv_path,
        ["case", "k", "level", "n", "h", "dim", "gamma", "config_hash"],
        rows,
    )
    print(f"wrote {csv_path}")
    return EXIT_OK


def cmd_mesh(args) -> int:
    if args.mesh_action == "generate":
        if args.kind == "structured":
            mesh = generate_structured(args.n)
        else:
            mesh = generate_lshape(args.n)
        text = save_mesh(mesh)
        if args.out_file:
            Path(args.out_file).write_text(text, encoding="utf-8")
            print(f"wrote {args.out_file}")
        else:
            sys.stdout.write(text)
        return EXIT_OK
    mesh = load_mesh(Path(args.file).read_text(encoding="utf-8"))
    check_mesh(mesh)
    tags = {}
    for f in mesh.boundary_facets():
        tags[mesh.facet_tag[f]] = tags.get(mesh.facet_tag[f], 0) + 1
    print(f"vertices = {mesh.num_vertices}")
    print(f"cells = {mesh.num_cells}")
    print(f"facets = {mesh.num_facets}")
    print(f"boundary_facets = {len(mesh.boundary_facets())} {tags}")
    print(f"domain_area = {mesh.domain_area:.17g}")
    print(f"h_max = {mesh.h_max:.17g}")
    print("invariants passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdg2d", description="HDG solvers and stability verification harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "convergence", "infsup"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="study config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--level-override", type=int, default=None, help="override levels")
        p.add_argument("--seed", type=int, default=0, help="seed for random-trial checks")
    pm = sub.add_parser("mesh")
    msub = pm.add_subparsers(dest="mesh_action", required=True)
    pg = msub.add_parser("generate")
    pg.add_argument("--kind", choices=("structured", "lshape"), default="structured")
    pg.add_argument("--n", type=int, required=True)
    pg.add_argument("--out-file", default=None)
    pi = msub.add_parser("inspect")
    pi.add_argument("file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "mesh":
            return cmd_mesh(args)
        cfg = load_config(args.config)
        if args.level_override is not None:
            if args.level_override < 1:
                raise ConfigError("--level-override must be at least 1")
            cfg.levels = args.level_override
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "solve":
            return cmd_solve(cfg, out, args.seed)
        if args.command == "convergence":
            return cmd_convergence(cfg, out)
        return cmd_infsup(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AssemblyError, TopologyError, MeshFormatError) as exc:
        print(f"assembly error: {exc}", file=sys.stderr)
        return EXIT_ASSEMBLY
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except HdgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSEMBLY


if __name__ == "__main__":
    sys.exit(main())
