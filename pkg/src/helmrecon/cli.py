"""Command-line entry point: ``helmrecon <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config, preset_names
from .verify import CHECKS, verify_suite

log = logging.getLogger("helmrecon")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config file path or preset name (" + ", ".join(preset_names()) + ")")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override a config key (repeatable)")
    p.add_argument("--mode", choices=("oracle", "full"))
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)


def _config(args, validate: bool = True) -> ExperimentConfig:
    extra = list(args.overrides)
    for key in ("mode", "workers", "out", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            extra.append(f"{key}={v}")
    cfg = load_config(args.config, extra)
    return cfg.validate() if validate else cfg


def _progress(msg: str) -> None:
    log.info(msg)


def cmd_forward(args) -> int:
    from .boundary import boundary_geometry, dirichlet_trace
    from .experiment import build_truth
    from .grid import Grid2D, write_field
    from .solver import PicardOptions, assemble_operator, neumann_trace, picard_solve, plane_wave_field

    cfg = _config(args)
    grid = Grid2D(cfg.forward_n)
    zeta = np.array(args.zeta if args.zeta else [cfg.k, 0.0], dtype=float)
    op = assemble_operator(grid, cfg.k)
    c = build_truth(cfg, grid)
    geom = boundary_geometry(grid)
    f = dirichlet_trace(plane_wave_field(grid, zeta), geom)
    res = picard_solve(op, c, [f], PicardOptions(cfg.picard_tol, cfg.picard_max_iters))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_field(out / "forward_u.hfield", res.fields[0])
    write_field(out / "forward_u0.hfield", res.background[0])
    du = neumann_trace(res.fields[0], geom).values
    du0 = neumann_trace(res.background[0], geom).values
    with open(out / "forward_traces.csv", "w") as fh:
        fh.write("node,x,y,dirichlet_re,dirichlet_im,neumann_re,neumann_im,background_neumann_re,background_neumann_im\n")
        for i, (pt, g, a, b) in enumerate(zip(geom.points, f.values, du, du0)):
            fh.write(f"{i},{pt[0]!r},{pt[1]!r},{g.real!r},{g.imag!r},{a.real!r},{a.imag!r},{b.real!r},{b.imag!r}\n")
    print(f"forward solve: {res.iterations[0]} Picard steps, last update {res.updates[0]:.2e}; wrote {out}")
    return 0


def cmd_measure(args) -> int:
    from .experiment import measure_only, measurement_rows
    from .measurement import write_measurements_csv
    from .spectral import write_spectrum_csv

    cfg = _config(args)
    tables, diag = measure_only(cfg, _progress)
    out = Path(cfg.out)
    (out / "spectra").mkdir(parents=True, exist_ok=True)
    (out / "config.cfg").write_text(cfg.echo())
    write_measurements_csv(out / "measurements.csv", measurement_rows(tables, "measured" if cfg.mode == "full" else "oracle"))
    for ell, t in tables.items():
        write_spectrum_csv(out / "spectra" / f"data_l{ell}.csv", t)
    (out / "measure.json").write_text(json.dumps(diag, indent=2, sort_keys=True) + "\n")
    print(f"measured {sum(diag['points_per_level'].values())} frequencies; wrote {out}")
    return 0


def cmd_invert(args) -> int:
    from .experiment import build_truth, invert_tables, make_plan, write_result
    from .grid import Grid2D
    from .spectral import read_spectrum_csv

    cfg = _config(args)
    plan = make_plan(cfg)
    data_dir = Path(args.data)
    tables = {
        ell: read_spectrum_csv(data_dir / "spectra" / f"data_l{ell}.csv", plan.frequency_grid(ell), cfg.fill)
        for ell in plan.levels
    }
    result = invert_tables(cfg, tables)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_result(out, cfg, result, build_truth(cfg, Grid2D(cfg.inverse_n)))
    _print_errors([(ell, result.naive_errors[ell].value, result.errors[ell].value) for ell in plan.levels])
    return 0


def _print_errors(rows) -> None:
    print(f"{'ell':>3}  {'naive':>12}  {'corrected':>12}")
    for ell, naive, corr in rows:
        print(f"{ell:>3}  {naive:12.4e}  {corr:12.4e}")


def cmd_run(args) -> int:
    from .experiment import run_experiment

    cfg = _config(args, validate=False)  # run_experiment records violations in error.json
    outcome = run_experiment(cfg, _progress)
    if outcome.status != 0:
        print(f"run failed: {outcome.error}; see {outcome.out / 'error.json'}", file=sys.stderr)
        return outcome.status
    r = outcome.result
    _print_errors([(ell, r.naive_errors[ell].value, r.errors[ell].value) for ell in r.plan.levels])
    print(f"artifacts in {outcome.out}")
    return 0


def cmd_verify(args) -> int:
    sel = CHECKS if args.checks is None else [s for s in args.checks.split(",") if s]
    results = verify_suite(sel)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_report(args) -> int:
    from .experiment import read_errors_csv

    run = Path(args.run)
    rows = read_errors_csv(run / "errors.csv")
    _print_errors([(r["ell"], r["naive"], r["corrected"]) for r in rows])
    man = run / "manifest.json"
    if man.is_file():
        m = json.loads(man.read_text())
        print(f"mode: {m.get('mode')}  config hash: {m.get('config_hash', '')[:12]}")
        print(f"frequencies per level: {m.get('points_per_level')}")
        print(f"forward solves: {m.get('forward_solves')}  linear solves: {m.get('linear_solves')}")
        t = m.get("timings", {})
        if t:
            print("timings [s]: " + ", ".join(f"{k}={v:.2f}" for k, v in sorted(t.items())))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="helmrecon", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", help="one nonlinear forward solve for a plane-wave boundary condition")
    _common(p)
    p.add_argument("--zeta", type=float, nargs=2, metavar=("ZX", "ZY"), help="real wave vector (default (k, 0))")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("measure", help="evaluate the data d_ell on every level's band")
    _common(p)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("invert", help="back-substitute data written by 'measure'")
    _common(p)
    p.add_argument("--data", required=True, help="output directory of a previous 'measure'")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("run", help="full experiment with artifact tree")
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="self-check batteries")
    p.add_argument("--checks", help="comma-separated subset of " + ",".join(CHECKS) + " (default: all)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="summarise a finished run directory")
    p.add_argument("run")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
