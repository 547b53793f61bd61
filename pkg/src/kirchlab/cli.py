"""Command line entry point: ``run``, ``list`` and ``compare``."""
from __future__ import annotations

import argparse
import sys

from . import experiments as ex

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kirchlab", description="Kirchhoff singular-perturbation experiments")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario configuration")
    run.add_argument("config", help="path to a JSON config, or the name of a bundled scenario")
    run.add_argument("--out", help=f"output root (default ${ex.OUTPUT_ENV} or ./{ex.DEFAULT_OUTPUT_ROOT})")
    run.add_argument("--threads", type=int, default=1, help="worker processes for the eps cells")
    run.add_argument("--tol", type=float, help="override the solver rel_tol")
    run.add_argument("--horizon", type=float, help="override the horizon T")
    ls = sub.add_parser("list", help="list bundled scenarios")
    ls.add_argument("--dir", help="scenario directory (default: the bundled one)")
    cmp_ = sub.add_parser("compare", help="diff the fitted quantities of two runs")
    cmp_.add_argument("a")
    cmp_.add_argument("b")
    cmp_.add_argument("--all", action="store_true", help="show unchanged rows too")
    return p


def _resolve_config_path(arg: str):
    from pathlib import Path

    path = Path(arg)
    if path.exists():
        return path
    bundled = ex.scenario_dir() / (arg if arg.endswith(".json") else arg + ".json")
    return bundled if bundled.exists() else path


def _run(args) -> int:
    cfg = ex.load_config(_resolve_config_path(args.config))
    cfg = ex.apply_overrides(cfg, args.tol, args.horizon)
    if args.threads < 1:
        raise ex.ConfigError("--threads must be at least 1")
    record = ex.run_config(cfg, args.out, args.threads)
    rep = record.report
    if record.status == "solver_failure":
        for cell in rep["cells"]:
            if "solver_error" in cell:
                print(f"solver failure in scenario {record.name} at eps={cell['eps']:.6g}: "
                      f"{cell['solver_error']}", file=sys.stderr)
        return EXIT_SOLVER
    for name, chk in rep["checks"].items():
        print(f"{name:18s} {chk['status']}")
    print(f"{record.name}: {record.status}  ({record.out_dir})")
    return record.exit_code


def _list(args) -> int:
    for name, desc in ex.list_scenarios(args.dir):
        print(f"{name:36s} {desc}")
    return EXIT_OK


def _compare(args) -> int:
    res = ex.compare_runs(args.a, args.b)
    print(f"{'quantity':60s} {'a':>24s} {'b':>24s} {'diff':>12s}")
    for row in res["rows"]:
        if args.all or row["diff"] != 0:
            print(f"{row['quantity']:60s} {row['a']:24.17g} {row['b']:24.17g} {row['diff']:12.3e}")
    print(f"max order difference: {res['max_order_diff']:.3e}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return {"run": _run, "list": _list, "compare": _compare}[args.command](args)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
