"""Decay-exponent fits in (1+t), convergence orders in eps, and the
supercritical non-decay checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from functools import partial

import numpy as np

from .corrector import assemble
from .energies import bound_suite, s_condition_margin, weighted_integral
from .hyperbolic import hamiltonian_series, solve_hyperbolic
from .model import DissipationSpec, ProblemSetup, compute_mu2, hamiltonian_initial
from .parabolic import solve_parabolic
from .trajectory import SolverConfig

# one decade is 1.0; the natural [100, 1000] window spans log10(1001/101) = 0.996
MIN_DECADES = 0.95


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    log_constant: float
    r_squared: float
    window: tuple
    drift: float      # |exponent(first half) - exponent(second half)|
    flagged: bool     # poor power-law fit: low r^2 or exponent drifting

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class OrderFit:
    order: float
    eps: tuple
    values: tuple
    residual: float
    monotone: bool
    degenerate: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(icpt), min(max(r2, 0.0), 1.0), resid


def fit_decay_rate(t, q, window=None, min_decades: float = MIN_DECADES) -> DecayFit:
    """Least-squares slope of ``ln q`` against ``ln(1+t)`` on ``window``.

    The default window is ``[T/10, T]``.  A fit is flagged when ``r^2 < 0.99``
    or when the two halves of the window disagree by more than
    ``0.1 + 0.05 |exponent|`` (super-polynomial decay shows up that way).
    """
    t = np.asarray(t, dtype=float)
    q = np.asarray(q, dtype=float)
    lo, hi = (t[-1] / 10, t[-1]) if window is None else window
    if lo < t[0] or hi > t[-1] * (1 + 1e-12):
        raise ValueError("window outside the series span")
    sel = (t >= lo) & (t <= hi)
    if np.log10((1 + hi) / (1 + lo)) < min_decades - 1e-12:
        raise ValueError(f"window spans fewer than {min_decades} decades of 1+t")
    if np.count_nonzero(sel) < 4:
        raise ValueError("too few samples in window")
    if np.any(q[sel] <= 0) or not np.all(np.isfinite(q[sel])):
        raise ValueError("series must be positive on the fit window")
    x, y = np.log1p(t[sel]), np.log(q[sel])
    slope, icpt, r2, _ = _linfit(x, y)
    mid = 0.5 * (x[0] + x[-1])
    halves = [x <= mid, x >= mid]
    slopes = [_linfit(x[h], y[h])[0] for h in halves if np.count_nonzero(h) >= 3]
    drift = abs(slopes[0] - slopes[1]) if len(slopes) == 2 else 0.0
    flagged = r2 < 0.99 or drift > 0.1 + 0.05 * abs(slope)
    return DecayFit(slope, icpt, r2, (float(lo), float(hi)), float(drift), bool(flagged))


def fit_order(eps, values) -> OrderFit:
    """Slope of ``ln value`` against ``ln eps``."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    if eps.size < 3:
        raise ValueError("order fits need at least three eps values")
    order = np.argsort(eps)
    eps, values = eps[order], values[order]
    if np.all(values == 0):
        return OrderFit(math.nan, tuple(eps), tuple(values), 0.0, True, degenerate=True)
    if np.any(values <= 0):
        raise ValueError("order fit needs positive values")
    slope, _, _, resid = _linfit(np.log(eps), np.log(values))
    monotone = bool(np.all(np.diff(values) >= 0))
    return OrderFit(slope, tuple(eps), tuple(values), float(np.max(np.abs(resid))), monotone)


# ---------------------------------------------------------------------------
# decay of the hyperbolic solution


def _hyperbolic_sups(setup, traj):
    eps, lam = setup.eps, setup.op.eigenvalues
    w = 1.0 + traj.times
    u, du, q = traj.u, traj.du, traj.integrals
    return {
        "u2": float(np.max(np.sum(u * u, axis=1))),
        "w2_a12u2": float(np.max(w**2 * np.sum(lam * u * u, axis=1))),
        "w2_du2": float(np.max(w**2 * np.sum(du * du, axis=1))),
        "w4_energy": float(np.max(w**4 * (eps * np.sum(lam * du * du, axis=1) + np.sum((lam * u) ** 2, axis=1)))),
        "int_w1": float(q["w1_du2"][-1] + q["w1_a12u2"][-1]),
        "int_w3": float(q["w3_a12du2"][-1] + q["w3_au2"][-1]),
    }


def decay_series(setup: ProblemSetup, traj) -> dict:
    """``|A^{1/2}u|^2``, ``|u'|^2`` and ``|Au|^2`` on the grid."""
    lam = setup.op.eigenvalues
    u, du = traj.u, traj.du
    return {
        "a12u2": np.sum(lam * u * u, axis=1),
        "du2": np.sum(du * du, axis=1),
        "au2": np.sum((lam * u) ** 2, axis=1),
    }


def verify_hyperbolic_decay(setup: ProblemSetup, traj, doubled=None, stability_tol: float = 0.05) -> dict:
    """Empirical constants of the six decay estimates and their T-doubling check.

    ``doubled`` is a trajectory of the same problem on ``[0, 2T]``; each sup or
    integral is stable when the value over ``[0, 2T]`` exceeds the one over
    ``[0, T]`` by at most ``stability_tol`` (relative).
    """
    sups = _hyperbolic_sups(setup, traj)
    report = {"constants": sups, "finite": all(math.isfinite(v) for v in sups.values())}
    if doubled is not None:
        long = _hyperbolic_sups(setup, doubled)
        report["doubled"] = long
        report["stable"] = {
            k: bool(long[k] <= sups[k] * (1 + stability_tol) + 1e-300) for k in sups
        }
    report["final_u2"] = float(np.sum(traj.u[-1] ** 2))
    return report


def fit_hyperbolic_rates(setup: ProblemSetup, traj, window=None) -> dict:
    """Decay exponents of ``|A^{1/2}u|^2``, ``|u'|^2``, ``|Au|^2``."""
    return {k: fit_decay_rate(traj.times, v, window) for k, v in decay_series(setup, traj).items()}


# ---------------------------------------------------------------------------
# eps-convergence of the error fields

ERROR_EXPECTED = {
    "sup_rho": (1.0, 0.15, "eq"),
    "sup_w_a12rho": (1.0, 0.15, "eq"),
    "sup_w_dr": (0.5, 0.1, "ge"),
    "int_w1_a12rho2": (2.0, 0.3, "eq"),
    "int_w1_dr2": (2.0, 0.3, "eq"),
}


def error_metrics(dec) -> dict:
    """Uniform-in-time error sizes of one decomposition."""
    lam = dec.hyp.setup.op.eigenvalues
    w = 1.0 + dec.times
    return {
        "sup_rho": float(np.max(np.sqrt(np.sum(dec.rho**2, axis=1)))),
        "sup_w_a12rho": float(np.max(w * np.sqrt(np.sum(lam * dec.rho**2, axis=1)))),
        "sup_w_dr": float(np.max(w * np.sqrt(np.sum(dec.dr**2, axis=1)))),
        "int_w1_a12rho2": weighted_integral(dec, 1, "|A^1/2 rho|^2").value,
        "int_w1_dr2": weighted_integral(dec, 1, "|r'|^2").value,
    }


def higher_order_metrics(dec, k: int = 2) -> dict:
    """Hyperbolic and error-side quantities of the order-``k`` extensions."""
    if k < 2:
        raise ValueError("k must be at least 2")
    setup = dec.hyp.setup
    lam, eps = setup.op.eigenvalues, setup.eps
    w = 1.0 + dec.times
    u, du = dec.hyp.u, dec.hyp.du

    def sq(alpha, x):
        return np.sum(lam ** (2 * alpha) * x * x, axis=1) if alpha else np.sum(x * x, axis=1)

    hyp_local = (w ** (2 * k) * sq((k - 1) / 2, du)
                 + w ** (2 * k + 2) * (eps * sq(k / 2, du) + sq((k + 1) / 2, u)))
    hyp_int = (weighted_integral(dec.hyp, 2 * k + 1, ("du", k / 2)).value
               + weighted_integral(dec.hyp, 2 * k + 1, ("u", (k + 1) / 2)).value)
    return {
        "hyp_local": float(np.max(hyp_local)),
        "hyp_int": float(hyp_int),
        "sup_wk1_dr": float(np.max(w ** (k - 1) * np.sqrt(sq((k - 2) / 2, dec.dr)))),
        "sup_wk_sqrt_eps_dr": float(np.max(w**k * math.sqrt(eps) * np.sqrt(sq((k - 1) / 2, dec.dr)))),
        "sup_wk_rho": float(np.max(w**k * np.sqrt(sq(k / 2, dec.rho)))),
        "int_err": float(weighted_integral(dec, 2 * k - 1, ("rho", k / 2)).value
                         + weighted_integral(dec, 2 * k - 1, ("dr", (k - 1) / 2)).value),
    }


HIGHER_EXPECTED = {
    "sup_wk1_dr": (1.0, 0.15, "eq"),
    "sup_wk_sqrt_eps_dr": (1.0, 0.15, "ge"),
    "sup_wk_rho": (1.0, 0.15, "eq"),
    "int_err": (2.0, 0.3, "eq"),
}


def solve_pair(setup: ProblemSetup, cfg: SolverConfig = SolverConfig()):
    """Hyperbolic and parabolic solves plus their error decomposition."""
    hyp = solve_hyperbolic(setup, cfg)
    par = solve_parabolic(setup, cfg)
    return hyp, par, assemble(hyp, par)


def _judge(fit: OrderFit, expected) -> bool:
    target, tol, kind = expected
    if fit.degenerate:
        return True
    if kind == "ge":
        return fit.order >= target - tol
    return abs(fit.order - target) <= tol


def _sweep(setup, eps_values, cfg, metric, executor):
    eps_values = sorted(float(e) for e in eps_values)
    if len(eps_values) < 3:
        raise ValueError("an eps sweep needs at least three values")
    setups = [setup.with_eps(e) for e in eps_values]
    jobs = [(s, cfg, metric) for s in setups]
    mapper = executor.map if executor is not None else map
    return eps_values, list(mapper(_metric_cell, jobs))


def _metric_cell(job):
    setup, cfg, metric = job
    _, _, dec = solve_pair(setup, cfg)
    return metric(dec)


def orders_report(eps_values, rows, expected) -> dict:
    """Order fits for every metric in ``expected`` with pass flags."""
    fits, passes = {}, {}
    for key, exp in expected.items():
        fit = fit_order(eps_values, [r[key] for r in rows])
        fits[key] = fit.as_dict()
        passes[key] = _judge(fit, exp)
    degenerate = all(f["degenerate"] for f in fits.values())
    non_monotone = [k for k, f in fits.items() if not f["monotone"]]
    return {"eps": list(eps_values), "metrics": rows, "orders": fits, "pass": passes,
            "degenerate": degenerate, "non_monotone": non_monotone}


def verify_error_decay(setup: ProblemSetup, eps_values, cfg: SolverConfig = SolverConfig(),
                       executor=None) -> dict:
    """eps-orders of the error estimates over a sweep (p = 1).

    ``executor`` may be any object with an ordered ``map`` (e.g. a process pool).
    """
    if setup.b.p != 1.0:
        raise PreconditionError("error estimates are stated for b = (1+t)^{-1}")
    eps_values, rows = _sweep(setup, eps_values, cfg, error_metrics, executor)
    return orders_report(eps_values, rows, ERROR_EXPECTED)


def verify_higher_order(setup: ProblemSetup, eps_values, k: int = 2, cfg: SolverConfig = SolverConfig(),
                        executor=None) -> dict:
    """Order-``k`` extensions: finiteness of the hyperbolic side and eps-orders
    of the error side."""
    if setup.b.p != 1.0:
        raise PreconditionError("higher-order estimates are stated for b = (1+t)^{-1}")
    eps_values, rows = _sweep(setup, eps_values, cfg, partial(higher_order_metrics, k=k), executor)
    report = orders_report(eps_values, rows, HIGHER_EXPECTED)
    report["k"] = k
    report["finite"] = all(math.isfinite(r["hyp_local"]) and math.isfinite(r["hyp_int"]) for r in rows)
    return report


# ---------------------------------------------------------------------------
# supercritical regime


def energy_floor(setup: ProblemSetup, t) -> np.ndarray:
    """``H(0) exp(-(2/eps) int_0^t b)``."""
    return hamiltonian_initial(setup) * np.exp(-2.0 / setup.eps * setup.b.integral(t))


def tail_energy(setup: ProblemSetup, traj, start: float | None = None) -> float:
    """``inf |u'|^2 + |A^{1/2}u|^2`` over ``[start, T]`` (default ``T/2``)."""
    start = traj.T / 2 if start is None else start
    sel = traj.times >= start
    lam = setup.op.eigenvalues
    e = np.sum(traj.du[sel] ** 2, axis=1) + np.sum(lam * traj.u[sel] ** 2, axis=1)
    return float(np.min(e))


def verify_supercritical(setup: ProblemSetup, traj, slack: float = 1e-6) -> dict:
    """Pointwise Hamiltonian floor and the positive lower bound of the tail energy."""
    if not setup.b.p > 1:
        raise PreconditionError("needs integrable dissipation (p > 1)")
    if setup.norm2(0, setup.u1) + setup.norm2(0.5, setup.u0) <= 0:
        raise PreconditionError("needs |u1|^2 + |A^{1/2}u0|^2 > 0")
    H = hamiltonian_series(setup, traj)
    floor = energy_floor(setup, traj.times)
    H0 = hamiltonian_initial(setup)
    limit_floor = H0 * math.exp(-2.0 * setup.b.total / setup.eps)
    # H <= max(eps, mu2) (|u'|^2 + |A^{1/2}u|^2) converts the floor on H
    normalized = limit_floor / max(1.0, compute_mu2(setup))
    inf_tail = tail_energy(setup, traj)
    return {
        "H0": H0,
        "floor_holds": bool(np.all(H >= floor * (1 - slack))),
        "min_H_over_floor": float(np.min(H / floor)),
        "limit_floor": limit_floor,
        "normalized_floor": normalized,
        "tail_inf": inf_tail,
        "tail_holds": bool(inf_tail > normalized),
    }


def dichotomy(setup: ProblemSetup, cfg: SolverConfig = SolverConfig(), sup_traj=None) -> dict:
    """Same data with ``p = 2`` and ``p = 1``: non-decay versus decay.

    The p = 2 run must keep its tail energy above the floor; the p = 1 run must
    bring it under ``1e-4 H(0)`` by the end of the horizon.  ``sup_traj`` may
    pass an existing p = 2 trajectory of ``setup``.
    """
    sup = setup if setup.b.p == 2.0 else with_p(setup, 2.0)
    crit = with_p(setup, 1.0)
    if sup_traj is None:
        sup_traj = solve_hyperbolic(sup, cfg)
    crit_traj = solve_hyperbolic(crit, cfg)
    rep = verify_supercritical(sup, sup_traj)
    crit_tail = tail_energy(crit, crit_traj)
    H0 = hamiltonian_initial(crit)
    return {
        "supercritical": rep,
        "critical_tail_inf": crit_tail,
        "critical_H0": H0,
        "critical_decays": bool(crit_tail < 1e-4 * H0),
        "holds": bool(rep["floor_holds"] and rep["tail_holds"] and crit_tail < 1e-4 * H0),
    }


def with_p(setup: ProblemSetup, p: float) -> ProblemSetup:
    return ProblemSetup(setup.eps, setup.op, setup.m, DissipationSpec(p), setup.u0, setup.u1)


def critical_run_checks(setup: ProblemSetup, traj) -> dict:
    """Bound suite and S-condition margin for one p = 1 trajectory."""
    margin, where = s_condition_margin(setup, traj)
    return {"bounds": bound_suite(setup, traj), "s_margin": margin, "s_margin_t": where}
