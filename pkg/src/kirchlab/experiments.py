"""Scenario configuration, sweep orchestration and run persistence.

A scenario is a JSON document (see ``schema/config.schema.json``).  A run
solves the problem for every requested eps in independent cells, each cell
writing its own CSV files, then aggregates the checks into ``report.json``.
Wall-clock timings go to a separate ``timings.json`` so that the report of a
given configuration is bit-identical between runs.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import analysis
from .corrector import assemble, verify_corrector_ode
from .energies import bound_suite, energy_series, s_condition_margin
from .hyperbolic import hamiltonian_identity_gap, solve_hyperbolic
from .integrator import IntegrationError
from .model import DissipationSpec, NonlinearitySpec, ProblemSetup, reference_eps0
from .parabolic import closed_form_constant, solve_parabolic
from .spectral import OperatorSpec
from .trajectory import SolverConfig

OUTPUT_ENV = "KIRCHLAB_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "runs"

GAP_TOL = 1e-6
ORACLE_TOL = 1e-8
ORACLE_HORIZON = 50.0
CORRECTOR_TOL = 1e-10
RATE_LIMITS = {"a12u2": -2.0 + 0.2, "du2": -2.0 + 0.2, "au2": -4.0 + 0.3}

CRITICAL_ONLY = {"bounds", "s_condition", "decay_rates", "decay_constants",
                 "error_orders", "higher_order", "corrector_exact"}
SWEEP_CHECKS = {"error_orders", "higher_order"}


class ConfigError(ValueError):
    """Invalid scenario configuration (exit code 2)."""


class SolverFailure(RuntimeError):
    """A cell's integration failed (exit code 3)."""


# ---------------------------------------------------------------------------
# configuration


def schema() -> dict:
    return json.loads(resources.files("kirchlab").joinpath("schema/config.schema.json").read_text())


def scenario_dir() -> Path:
    return Path(str(resources.files("kirchlab").joinpath("scenarios")))


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse and validate a configuration document."""
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            where = "/".join(str(p) for p in err.absolute_path) or "(root)"
            lines.append(f"{source}: field {where}: {err.message}")
        raise ConfigError("\n".join(lines))
    _semantic_checks(cfg, source)
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def _semantic_checks(cfg: dict, source: str):
    try:
        setup = build_setup(cfg)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    checks = set(cfg.get("checks", []))
    if cfg["p"] != 1 and checks & CRITICAL_ONLY:
        bad = sorted(checks & CRITICAL_ONLY)
        raise ConfigError(f"{source}: field checks: {bad} need p = 1")
    if cfg["p"] <= 1 and checks & {"supercritical"}:
        raise ConfigError(f"{source}: field checks: 'supercritical' needs p > 1")
    if checks & SWEEP_CHECKS and len(cfg["eps"]) < 3:
        raise ConfigError(f"{source}: field eps: order fits need at least three values")
    if "parabolic_oracle" in checks and setup.m.family != "constant":
        raise ConfigError(f"{source}: field checks: 'parabolic_oracle' needs a constant nonlinearity")
    if "fit_window" in cfg:
        lo, hi = cfg["fit_window"]
        if not lo < hi <= horizon(cfg):
            raise ConfigError(f"{source}: field fit_window: must satisfy lo < hi <= horizon")


def apply_overrides(cfg: dict, rel_tol: float | None = None, horizon_T: float | None = None) -> dict:
    cfg = json.loads(json.dumps(cfg))
    if rel_tol is not None:
        if not 1e-12 <= rel_tol <= 1e-4:
            raise ConfigError(f"--tol {rel_tol} outside [1e-12, 1e-4]")
        cfg.setdefault("solver", {})["rel_tol"] = rel_tol
    if horizon_T is not None:
        if not horizon_T > 0:
            raise ConfigError("--horizon must be positive")
        cfg["horizon"] = horizon_T
    return cfg


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical JSON of everything that affects numerics."""
    core = {k: v for k, v in cfg.items() if k not in ("output_dir", "description")}
    canon = json.dumps(core, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def horizon(cfg: dict) -> float:
    return float(cfg.get("horizon", SolverConfig.T))


def solver_config(cfg: dict) -> SolverConfig:
    s = cfg.get("solver", {})
    base = SolverConfig()
    return SolverConfig(rel_tol=s.get("rel_tol", base.rel_tol), abs_tol=s.get("abs_tol", base.abs_tol),
                        max_steps=s.get("max_steps", base.max_steps), T=horizon(cfg))


def build_operator(spec: dict) -> OperatorSpec:
    if "eigenvalues" in spec:
        return OperatorSpec(np.asarray(spec["eigenvalues"], dtype=float))
    g = spec["geometric"]
    return OperatorSpec.geometric(g["n"], g["lam_min"], g["ratio"], spec.get("zero_modes", 0))


def build_nonlinearity(spec: dict) -> NonlinearitySpec:
    family = spec["family"]
    if family == "constant":
        return NonlinearitySpec.constant(spec["mu"])
    if family == "affine":
        return NonlinearitySpec.affine(spec["a"], spec["slope"])
    return NonlinearitySpec.table(spec["knots"], spec["values"])


def build_initial_data(spec: dict, op: OperatorSpec):
    if "u0" in spec:
        u0, u1 = (np.asarray(spec[k], dtype=float) for k in ("u0", "u1"))
        if u0.size != op.n or u1.size != op.n:
            raise ValueError(f"initial data must have {op.n} modes")
        return u0, u1
    r = spec["random"]
    rng = np.random.default_rng(r["seed"])
    damp = (1.0 + op.eigenvalues) ** -r.get("decay", 1.0)
    out = []
    for key in ("u0_norm", "u1_norm"):
        g = rng.standard_normal(op.n) * damp
        out.append(r.get(key, 1.0) * g / np.linalg.norm(g))
    return tuple(out)


def build_setup(cfg: dict, eps: float = 0.125) -> ProblemSetup:
    op = build_operator(cfg["operator"])
    u0, u1 = build_initial_data(cfg["initial_data"], op)
    return ProblemSetup(eps, op, build_nonlinearity(cfg["nonlinearity"]), DissipationSpec(cfg["p"]), u0, u1)


def resolve_eps(cfg: dict, setup: ProblemSetup) -> tuple[float, list[float]]:
    """Reference eps0 and the numeric eps list (``"eps0/N"`` entries resolved)."""
    eps0 = reference_eps0(setup)
    values = []
    for e in cfg["eps"]:
        if isinstance(e, str):
            _, _, div = e.partition("/")
            values.append(eps0 / float(div) if div else eps0)
        else:
            values.append(float(e))
    for v in values:
        if not 0 < v < 1:
            raise ConfigError(f"resolved eps {v} outside (0, 1)")
    return eps0, values


# ---------------------------------------------------------------------------
# cells


def write_csv(path: Path, columns: dict):
    """CSV with header ``t,<names>``; 17 significant digits round-trip exactly."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(names), comments="")


def read_csv(path) -> dict:
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {n: data[:, i] for i, n in enumerate(names)}


def _mode_columns(t, **fields):
    cols = {"t": t}
    for name, arr in fields.items():
        for i in range(arr.shape[1]):
            cols[f"{name}_{i}"] = arr[:, i]
    return cols


def _plot_rows(t, series: dict) -> list:
    """Long-format rows ``(t, quantity, weight, (1+t)^weight * value)``."""
    rows = []
    for name, (weight, values) in series.items():
        for ti, v in zip(t, (1.0 + t) ** weight * values):
            rows.append((ti, name, weight, v))
    return rows


def _write_plot(path: Path, rows):
    with open(path, "w") as fh:
        fh.write("t,quantity,weight,value\n")
        for t, name, w, v in rows:
            fh.write(f"{t:.17g},{name},{w:.17g},{v:.17g}\n")


def _status(ok) -> str:
    return "pass" if ok else "fail"


def run_cell(job: dict) -> dict:
    """Solve and check one eps of a scenario; writes the cell's CSV files."""
    cfg, eps, eps0, cell_dir = job["cfg"], job["eps"], job["eps0"], Path(job["dir"])
    cell_dir.mkdir(parents=True, exist_ok=True)
    checks = set(cfg.get("checks", []))
    setup = build_setup(cfg, eps)
    scfg = solver_config(cfg)
    tic = time.perf_counter()
    result = {"eps": eps, "eps_over_eps0": eps / eps0, "checks": {}, "files": []}
    admissible = setup.b.p == 1.0 and eps <= eps0
    try:
        hyp = solve_hyperbolic(setup, scfg)
        dec = None
        if checks & (SWEEP_CHECKS | {"corrector_exact", "parabolic_oracle"}):
            par = solve_parabolic(setup, scfg)
            if setup.b.p == 1.0:
                dec = assemble(hyp, par)
        else:
            par = None
        doubled = None
        if "decay_constants" in checks:
            doubled = solve_hyperbolic(setup, scfg.replace(T=2 * scfg.T))
        dich = None
        if "dichotomy" in checks:
            dich = analysis.dichotomy(setup, scfg, hyp if setup.b.p == 2.0 else None)
    except IntegrationError as exc:
        return {"eps": eps, "solver_error": str(exc), "t": exc.t}

    result["solver"] = dict(hyp.meta)
    c = result["checks"]
    gap = hamiltonian_identity_gap(setup, hyp)
    result["hamiltonian_gap"] = gap
    if "hamiltonian" in checks:
        c["hamiltonian"] = {"status": _status(gap <= GAP_TOL), "gap": gap, "tol": GAP_TOL}
    if "bounds" in checks:
        if admissible:
            suite = bound_suite(setup, hyp)
            c["bounds"] = {"status": _status(all(v["holds"] for v in suite.values())), **suite}
        else:
            c["bounds"] = {"status": "skipped", "reason": "eps > eps0"}
    if "s_condition" in checks:
        if admissible:
            margin, where = s_condition_margin(setup, hyp)
            c["s_condition"] = {"status": _status(margin > 0), "margin": margin, "argmin_t": where}
        else:
            c["s_condition"] = {"status": "skipped", "reason": "eps > eps0"}
    if "decay_rates" in checks:
        window = tuple(cfg.get("fit_window", (100.0, 1000.0) if scfg.T >= 1000 else (scfg.T / 10, scfg.T)))
        fits, ok = {}, True
        for name, series in analysis.decay_series(setup, hyp).items():
            try:
                fit = analysis.fit_decay_rate(hyp.times, series, window)
            except ValueError as exc:
                fits[name] = {"error": str(exc)}
                ok = False
                continue
            fits[name] = {**fit.as_dict(), "limit": RATE_LIMITS[name]}
            ok &= fit.exponent <= RATE_LIMITS[name]
        c["decay_rates"] = {"status": _status(ok), "fits": fits}
    if "decay_constants" in checks:
        rep = analysis.verify_hyperbolic_decay(setup, hyp, doubled)
        c["decay_constants"] = {"status": _status(rep["finite"] and all(rep["stable"].values())), **rep}
    if "supercritical" in checks:
        rep = analysis.verify_supercritical(setup, hyp)
        c["supercritical"] = {"status": _status(rep["floor_holds"] and rep["tail_holds"]), **rep}
    if dich is not None:
        c["dichotomy"] = {"status": _status(dich["holds"]), **dich}
    if "parabolic_oracle" in checks:
        sel = par.times <= min(ORACLE_HORIZON, scfg.T)
        exact = closed_form_constant(setup, par.times[sel])
        scale = max(float(np.linalg.norm(setup.u0.coeffs)), 1e-300)
        err = float(np.max(np.linalg.norm(par.u[sel] - exact, axis=1)) / scale)
        c["parabolic_oracle"] = {"status": _status(err <= ORACLE_TOL), "rel_error": err, "tol": ORACLE_TOL}
    if "corrector_exact" in checks:
        ode = verify_corrector_ode(eps, dec.w0, hyp.times)
        size = float(max(np.max(np.abs(dec.r)), np.max(np.abs(dec.dr))))
        zero_only = bool(np.all(setup.op.eigenvalues == 0))
        ok = ode <= 1e-12 and (size <= CORRECTOR_TOL or not zero_only)
        c["corrector_exact"] = {"status": _status(ok), "ode_residual": ode, "max_r": size,
                                "zero_modes_only": zero_only}
    if "error_orders" in checks:
        result["error_metrics"] = analysis.error_metrics(dec)
    if "higher_order" in checks:
        result["higher_order_metrics"] = analysis.higher_order_metrics(dec, 2)

    # artifacts
    files = result["files"]
    write_csv(cell_dir / "hyperbolic.csv", _mode_columns(hyp.times, u=hyp.u, du=hyp.du))
    files.append("hyperbolic.csv")
    en = energy_series(setup, hyp, dec)
    write_csv(cell_dir / "energies.csv", en)
    files.append("energies.csv")
    if par is not None:
        write_csv(cell_dir / "parabolic.csv", _mode_columns(par.times, u=par.u, du=par.du))
        files.append("parabolic.csv")
    series = {name: (w, analysis.decay_series(setup, hyp)[name])
              for name, w in (("a12u2", 2.0), ("du2", 2.0), ("au2", 4.0))}
    if dec is not None:
        write_csv(cell_dir / "errors.csv", _mode_columns(dec.times, rho=dec.rho, drho=dec.drho, theta=dec.theta, r=dec.r, dr=dec.dr))
        files.append("errors.csv")
        series["rho_norm"] = (0.0, np.linalg.norm(dec.rho, axis=1))
        series["dr_norm"] = (1.0, np.linalg.norm(dec.dr, axis=1))
    _write_plot(cell_dir / "plot.csv", _plot_rows(hyp.times, series))
    files.append("plot.csv")
    result["files"] = [str(Path(cell_dir.name) / f) for f in files]
    result["seconds"] = time.perf_counter() - tic
    return result


# ---------------------------------------------------------------------------
# runs


@dataclass
class RunRecord:
    config_hash: str
    name: str
    status: str
    exit_code: int
    report: dict
    out_dir: Path


def default_output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT_ROOT))


def run_config(cfg: dict, out_root=None, threads: int = 1) -> RunRecord:
    """Run every eps cell of ``cfg`` and aggregate the checks.

    Cells run in a process pool when ``threads > 1``; results are collected in
    eps order, so the report does not depend on the pool.
    """
    digest = config_hash(cfg)
    if cfg.get("output_dir"):
        out_dir = Path(cfg["output_dir"])
    else:
        out_dir = Path(out_root or default_output_root()) / f"{cfg['name']}-{digest[:12]}"
    setup = build_setup(cfg)
    eps0, eps_values = resolve_eps(cfg, setup)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [{"cfg": cfg, "eps": e, "eps0": eps0, "dir": str(out_dir / f"eps_{i}")}
            for i, e in enumerate(eps_values)]
    tic = time.perf_counter()
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            cells = list(pool.map(run_cell, jobs))
    else:
        cells = [run_cell(j) for j in jobs]
    wall = time.perf_counter() - tic

    timings = {"total_seconds": wall, "cells": [cell.pop("seconds", None) for cell in cells]}
    failed = [cell for cell in cells if "solver_error" in cell]
    checks = _aggregate(cfg, cells, eps_values) if not failed else {}
    if failed:
        status, code = "solver_failure", 3
    elif all(v["status"] in ("pass", "skipped") for v in checks.values()):
        status, code = "pass", 0
    else:
        status, code = "fail", 1
    report = {
        "schema_version": 1,
        "config_hash": digest,
        "name": cfg["name"],
        "status": status,
        "eps0": eps0,
        "eps": eps_values,
        "checks": checks,
        "cells": cells,
        "config": cfg,
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    (out_dir / "timings.json").write_text(json.dumps(timings, indent=1) + "\n")
    return RunRecord(digest, cfg["name"], status, code, report, out_dir)


def _aggregate(cfg, cells, eps_values) -> dict:
    out = {}
    for name in cfg.get("checks", []):
        if name in SWEEP_CHECKS:
            continue
        per = [cell["checks"][name] for cell in cells]
        statuses = {p["status"] for p in per}
        status = "fail" if "fail" in statuses else ("pass" if "pass" in statuses else "skipped")
        out[name] = {"status": status, "per_eps": [p["status"] for p in per]}
    if "error_orders" in cfg.get("checks", []):
        rep = analysis.orders_report(eps_values, [c["error_metrics"] for c in cells], analysis.ERROR_EXPECTED)
        out["error_orders"] = {"status": _status(all(rep["pass"].values())), **_orders_only(rep)}
    if "higher_order" in cfg.get("checks", []):
        rep = analysis.orders_report(eps_values, [c["higher_order_metrics"] for c in cells],
                                     analysis.HIGHER_EXPECTED)
        finite = all(math.isfinite(c["higher_order_metrics"]["hyp_local"]) for c in cells)
        out["higher_order"] = {"status": _status(finite and all(rep["pass"].values())), **_orders_only(rep)}
    return out


def _orders_only(rep: dict) -> dict:
    return {"orders": {k: v["order"] for k, v in rep["orders"].items()},
            "pass": rep["pass"], "non_monotone": rep["non_monotone"], "degenerate": rep["degenerate"]}


# ---------------------------------------------------------------------------
# listing and comparison


def list_scenarios(directory=None) -> list[tuple[str, str]]:
    """``(file name, description)`` for every ``*.json`` in the scenario directory."""
    directory = scenario_dir() if directory is None else Path(directory)
    try:
        entries = sorted(p for p in directory.iterdir() if p.suffix == ".json")
    except OSError as exc:
        raise ConfigError(f"{directory}: {exc.strerror}") from None
    out = []
    for path in entries:
        try:
            desc = json.loads(path.read_text()).get("description", "")
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: unreadable scenario ({exc})") from None
        out.append((path.name, desc))
    return out


def load_report(run_dir) -> dict:
    path = Path(run_dir) / "report.json"
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: cannot read report ({exc})") from None


def _numeric_leaves(obj, prefix=""):
    if isinstance(obj, bool):
        return
    if isinstance(obj, (int, float)):
        yield prefix, float(obj)
    elif isinstance(obj, dict):
        for k in sorted(obj):
            yield from _numeric_leaves(obj[k], f"{prefix}.{k}" if prefix else k)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _numeric_leaves(v, f"{prefix}[{i}]")


def compare_runs(a, b) -> dict:
    """Differences of every fitted exponent, order and constant of two runs."""
    ra, rb = load_report(a), load_report(b)
    if ra["name"] != rb["name"] or len(ra["eps"]) != len(rb["eps"]):
        raise ConfigError(f"runs are of different scenarios ({ra['name']} vs {rb['name']})")
    la = dict(_numeric_leaves(ra["checks"]))
    lb = dict(_numeric_leaves(rb["checks"]))
    for i, (ca, cb) in enumerate(zip(ra["cells"], rb["cells"])):
        for key in ("checks", "error_metrics", "higher_order_metrics"):
            la.update(_numeric_leaves(ca.get(key, {}), f"cells[{i}].{key}"))
            lb.update(_numeric_leaves(cb.get(key, {}), f"cells[{i}].{key}"))
    rows = []
    for key in sorted(set(la) & set(lb)):
        rows.append({"quantity": key, "a": la[key], "b": lb[key], "diff": lb[key] - la[key]})
    orders = [r for r in rows if ".orders." in r["quantity"]]
    return {
        "a": str(a), "b": str(b), "name": ra["name"], "rows": rows,
        "max_order_diff": max((abs(r["diff"]) for r in orders), default=0.0),
    }
