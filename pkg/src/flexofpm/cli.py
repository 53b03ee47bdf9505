"""Command line front end: ``fpm run | converge | bench | export-domain``.

Exit codes: 0 success, 1 numerical failure, 2 configuration or I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import symmetry_defect, write_matrix_market
from .bench import (BENCHMARKS, default_spec, error_norms, face_forces,
                    run_benchmark)
from .config import (ConfigError, build_partition, build_problem, build_reference, load_config,
                     solver_options)
from .io import BENCH_HEADER, write_domain, write_gauss_csv, write_nodal_csv, write_table, write_vtk

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2

CONVERGE_HEADER = ("level", "npoints", "e_u", "e_phi")


def _threads(arg):
    if arg is not None:
        return arg
    raw = os.environ.get("FPM_THREADS", "")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"FPM_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"FPM_THREADS must be a positive integer, got {raw!r}")
    return n


def _prepare(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _errors(problem, ref):
    g = problem.gauss_fields()
    u_ref, phi_ref = ref.fields(g.xy)
    return error_norms(g.u, g.phi, u_ref, phi_ref, g.w)


def _fmt(x):
    return "nan" if x is None or not np.isfinite(x) else f"{x:.3e}"


def cmd_run(args):
    cfg = load_config(args.config)
    tol, method = solver_options(cfg)
    threads = _threads(args.threads)
    pb = build_problem(cfg)
    pb.assemble(threads)
    if args.check_symmetry:
        print(f"symmetry max|K-K^T|/max|K| = {symmetry_defect(pb.system.K):.3e}")
    sol = pb.solve(tol=tol, method=method)
    nodal = _prepare(cfg.output_path("nodal"))
    write_nodal_csv(nodal, pb.partition.points, sol.ubar, sol.phibar)
    written = [nodal]
    for key, writer in (("gauss", lambda p: write_gauss_csv(p, pb.gauss_fields())),
                        ("vtk", lambda p: write_vtk(p, pb)),
                        ("matrix", lambda p: write_matrix_market(p, pb.system.K))):
        target = cfg.output_path(key)
        if target is not None:
            writer(_prepare(target))
            written.append(target)
    print(f"points {pb.npoints}  nnz {pb.system.nnz}  residual {sol.residual_norm:.2e}  "
          f"assemble {pb.timings['assemble_s']:.2f}s  solve {pb.timings['solve_s']:.2f}s")
    ref = build_reference(cfg, pb)
    if ref is not None:
        e_u, e_phi = _errors(pb, ref)
        print(f"e_u = {_fmt(e_u)}  e_phi = {_fmt(e_phi)}")
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_converge(args):
    cfg = load_config(args.config)
    if args.levels < 1:
        raise ConfigError("--levels must be at least 1")
    tol, method = solver_options(cfg)
    threads = _threads(args.threads)
    rows = []
    print(f"{'level':>5} {'npoints':>8} {'e_u':>10} {'e_phi':>10}")
    for level in range(args.levels):
        pb = build_problem(cfg, refine=level)
        ref = build_reference(cfg, pb)
        if ref is None:
            raise ConfigError("converge needs a reference solution ([reference] oracle)")
        pb.assemble(threads)
        pb.solve(tol=tol, method=method)
        e_u, e_phi = _errors(pb, ref)
        rows.append({"level": level, "npoints": pb.npoints, "e_u": e_u, "e_phi": e_phi})
        print(f"{level:>5} {pb.npoints:>8} {_fmt(e_u):>10} {_fmt(e_phi):>10}")
    out = Path(args.out) if args.out else cfg.output_path("nodal").with_name("convergence.csv")
    write_table(_prepare(out), rows, CONVERGE_HEADER)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_bench(args):
    names = BENCHMARKS if args.name == "all" else (args.name,)
    threads = _threads(args.threads)
    rows = []
    for name in names:
        kw = {}
        if args.grid:
            kw["grid"] = tuple(args.grid)
        if args.partition:
            if name != "block":
                raise ConfigError("--partition applies to the block benchmark only")
            kw["partition"] = args.partition
        spec = default_spec(name, **kw)
        res = run_benchmark(spec, threads=threads, reference=not args.no_reference)
        pb = res.problem
        rows.append(res.row())
        line = (f"{name:9s} points {res.npoints:6d}  e_u {_fmt(res.e_u)}  e_phi {_fmt(res.e_phi)}  "
                f"assemble {res.timings['assemble_s']:.2f}s  solve {res.timings['solve_s']:.2f}s  "
                f"nnz {res.nnz}")
        print(line)
        if args.check_symmetry:
            print(f"{name:9s} symmetry max|K-K^T|/max|K| = {symmetry_defect(pb.system.K):.3e}")
        if name == "pyramid":
            top, bottom = face_forces(pb, "top")[1], face_forces(pb, "bottom")[1]
            tied = pb.constraints.groups[0]
            V = pb.solution.x[tied[0]]
            print(f"{name:9s} bottom potential V = {V:.6g} V  top load {top:.6g} N/m  "
                  f"bottom force {bottom:.6g} N/m")
        if args.nodal:
            target = Path(args.nodal)
            if len(names) > 1:
                target = target.with_name(f"{target.stem}_{name}{target.suffix}")
            write_nodal_csv(_prepare(target), pb.partition.points, pb.solution.ubar,
                            pb.solution.phibar)
            print(f"wrote {target}")
    if args.out:
        write_table(_prepare(args.out), rows, BENCH_HEADER)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_export_domain(args):
    cfg = load_config(args.config)
    part = build_partition(cfg)
    out = Path(args.output) if args.output else cfg.output_path("domain")
    write_domain(_prepare(out), part)
    print(f"wrote {out} ({part.npoints} points, {len(part.edges)} edges)")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="fpm", description="Fragile Points Method solver for "
                                "2D flexoelectric and piezoelectric problems.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="solve the problem described by a config file")
    r.add_argument("config")
    r.add_argument("--check-symmetry", action="store_true",
                   help="print max|K-K^T|/max|K| of the assembled matrix")
    r.add_argument("--threads", type=int, help="assembly workers (default: FPM_THREADS or 1)")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("converge", help="error table over uniform refinements")
    c.add_argument("config")
    c.add_argument("--levels", type=int, default=3, help="number of grids (default 3)")
    c.add_argument("--out", help="CSV path (default: convergence.csv next to the nodal output)")
    c.add_argument("--threads", type=int)
    c.set_defaults(func=cmd_converge)

    b = sub.add_parser("bench", help="run a built-in benchmark")
    b.add_argument("name", choices=BENCHMARKS + ("all",))
    b.add_argument("--out", help="benchmark table CSV")
    b.add_argument("--nodal", help="also write the nodal CSV")
    b.add_argument("--grid", type=int, nargs=2, metavar=("N1", "N2"))
    b.add_argument("--partition", choices=("quad", "voronoi"))
    b.add_argument("--no-reference", action="store_true", help="skip the cylinder error norms")
    b.add_argument("--check-symmetry", action="store_true")
    b.add_argument("--threads", type=int)
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("export-domain", help="write the partition in the domain text format")
    e.add_argument("config")
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_export_domain)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:  # configuration, geometry, file errors
        print(f"fpm: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:  # solver, conditioning, oracle failures
        print(f"fpm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
