"""Energy functionals, weighted time integrals, the S-condition margin and the
two ODE comparison bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import DerivedConstants, ProblemSetup, derived_constants


def _sq(lam, alpha, x):
    w = np.ones_like(lam) if alpha == 0 else lam ** (2 * alpha)
    return np.sum(w * x * x, axis=-1)


def _dot(lam, alpha, x, y):
    w = np.ones_like(lam) if alpha == 0 else lam ** (2 * alpha)
    return np.sum(w * x * y, axis=-1)


@dataclass(frozen=True)
class EnergySample:
    t: float
    H: float
    D_eps0: float
    D_eps1: float
    F_eps: float
    G_eps: float
    c_eps: float
    c_eps_prime: float
    cal_D: float | None = None
    cal_E: float | None = None
    higher: dict = field(default_factory=dict)  # k -> {"cal_D_k", "cal_E_k", "cal_G_k"}


def energy_series(setup: ProblemSetup, traj, decomposition=None, orders=()) -> dict:
    """Every energy on the trajectory grid, as arrays keyed like :class:`EnergySample`."""
    t = traj.times
    return _energies(setup, t, traj.u, traj.du, decomposition and (
        decomposition.rho, decomposition.drho, decomposition.dr), orders)


def _energies(setup, t, u, du, errors, orders):
    eps, lam = setup.eps, setup.op.eigenvalues
    w = 1.0 + np.asarray(t, dtype=float)
    sigma = _sq(lam, 0.5, u)
    c = setup.m(sigma)
    dc = setup.m.derivative(sigma) * 2.0 * _dot(lam, 0.5, du, u)
    out = {
        "t": np.asarray(t, dtype=float),
        "H": eps * _sq(lam, 0, du) + setup.m.primitive(sigma),
        "D_eps0": 0.5 * (1 - eps) * _sq(lam, 0, u) + eps * w * _dot(lam, 0, du, u),
        "D_eps1": 0.5 * (1 - 3 * eps) * w**2 * sigma + eps * w**3 * _dot(lam, 0.5, du, u),
        "F_eps": eps * _sq(lam, 0.5, du) / c + _sq(lam, 1, u),
        "G_eps": w**2 * _sq(lam, 0, du),
        "c_eps": c,
        "c_eps_prime": dc,
    }
    if errors is not None:
        rho, drho, dr = errors
        out["cal_D"] = 0.5 * (1 - eps) * _sq(lam, 0, rho) + eps * w * _dot(lam, 0, drho, rho)
        out["cal_E"] = eps * _sq(lam, 0, dr) / c + _sq(lam, 0.5, rho)
        for k in orders:
            if k < 2:
                raise ValueError("higher-order energies need k >= 2")
            a = (k - 1) / 2
            out[f"cal_D_{k}"] = (0.5 * (1 - (2 * k - 1) * eps) * w ** (2 * k - 2) * _sq(lam, a, rho)
                                 + eps * w ** (2 * k - 1) * _dot(lam, a, drho, rho))
            out[f"cal_E_{k}"] = eps * _sq(lam, a, dr) / c + _sq(lam, k / 2, rho)
            out[f"cal_G_{k}"] = w ** (2 * k - 2) * _sq(lam, (k - 2) / 2, dr)
    return out


def eval_energies(setup: ProblemSetup, traj, t: float, decomposition=None, orders=()) -> EnergySample:
    """All energies at one time (grid value when ``t`` is a grid point)."""
    hit = np.flatnonzero(traj.times == t)
    if hit.size:
        j = hit[0]
        u, du = traj.u[j], traj.du[j]
        errors = decomposition and (decomposition.rho[j], decomposition.drho[j], decomposition.dr[j])
    else:
        u, du, _ = traj.at(t)
        errors = None
        if decomposition is not None:
            rho, drho, _, dr = decomposition.at(t)
            errors = (rho, drho, dr)
    e = {k: (float(v) if np.ndim(v) == 0 else v) for k, v in _energies(setup, t, u, du, errors, orders).items()}
    higher = {k: {n: e.pop(f"{n}_{k}") for n in ("cal_D", "cal_E", "cal_G")} for k in orders}
    return EnergySample(higher=higher, **e)


# ---------------------------------------------------------------------------
# weighted integrals

INTEGRANDS = {
    "|u|^2": ("u", 0.0),
    "|u'|^2": ("du", 0.0),
    "|A^1/2 u|^2": ("u", 0.5),
    "|Au|^2": ("u", 1.0),
    "|A^1/2 u'|^2": ("du", 0.5),
    "|A^1/2 rho|^2": ("rho", 0.5),
    "|rho|^2": ("rho", 0.0),
    "|r'|^2": ("dr", 0.0),
}


def integrand_spec(tag):
    """``tag`` is a key of :data:`INTEGRANDS` or a ``(field, alpha)`` pair."""
    if isinstance(tag, str):
        try:
            return INTEGRANDS[tag]
        except KeyError:
            raise ValueError(f"unknown integrand {tag!r}") from None
    field_name, alpha = tag
    return field_name, float(alpha)


def _field_on_grid(source, name):
    if name in ("u", "du"):
        return getattr(source, name)
    return {"rho": source.rho, "drho": source.drho, "r": source.r, "dr": source.dr}[name]


def _field_dense(source, name, t):
    if name in ("u", "du"):
        u, du, _ = source.at(t)
        return u if name == "u" else du
    rho, drho, r, dr = source.at(t)
    return {"rho": rho, "drho": drho, "r": r, "dr": dr}[name]


def _lam(source):
    setup = source.setup if hasattr(source, "setup") else source.hyp.setup
    return setup.op.eigenvalues


def integrand_values(source, weight: float, tag, times=None):
    """``(1+t)^weight |A^alpha X(t)|^2`` on the grid (or at ``times``)."""
    name, alpha = integrand_spec(tag)
    lam = _lam(source)
    if times is None:
        t = source.times
        x = _field_on_grid(source, name)
    else:
        t = np.asarray(times, dtype=float)
        x = _field_dense(source, name, t)
    return (1.0 + t) ** weight * _sq(lam, alpha, x)


@dataclass(frozen=True)
class WeightedIntegral:
    weight: float
    integrand: str
    T: float
    value: float
    error_estimate: float
    converged: bool
    tail: float = 0.0
    tail_exponent: float | None = None


def weighted_integral(source, weight: float, tag, T: float | None = None, tail: bool = False) -> WeightedIntegral:
    """``int_0^T (1+s)^weight |A^alpha X(s)|^2 ds``.

    Trapezoid on the output grid, refined once by halving every interval
    (midpoints from the dense interpolant) and Richardson-extrapolated.  With
    ``tail=True`` the contribution of ``[T, inf)`` is added from a power-law
    fit of the integrand over ``[T/10, T]``; a fitted exponent >= -1 gives an
    infinite tail.
    """
    t = source.times
    T = float(t[-1]) if T is None else float(T)
    sel = t <= T * (1 + 1e-14)
    t = t[sel]
    f = integrand_values(source, weight, tag)[sel]
    h = np.diff(t)
    coarse = float(np.sum(0.5 * h * (f[1:] + f[:-1])))
    fm = integrand_values(source, weight, tag, times=0.5 * (t[1:] + t[:-1]))
    fine = 0.5 * coarse + float(np.sum(0.5 * h * fm))
    value = (4.0 * fine - coarse) / 3.0
    err = abs(value - fine)
    scale = max(abs(value), 1e-300)
    converged = abs(fine - coarse) <= 0.01 * scale or abs(fine - coarse) < 1e-300
    tail_val, tail_exp = 0.0, None
    if tail:
        tail_val, tail_exp = _tail_estimate(t, f)
        value += tail_val
    name = tag if isinstance(tag, str) else f"{tag[0]}:{tag[1]}"
    return WeightedIntegral(float(weight), name, T, value, err, bool(converged), tail_val, tail_exp)


def _tail_estimate(t, f):
    T = t[-1]
    win = (t >= T / 10) & (f > 0)
    if f[-1] <= 0 or np.count_nonzero(win) < 3:
        return 0.0, None
    x, y = np.log1p(t[win]), np.log(f[win])
    slope = float(np.polyfit(x, y, 1)[0])
    if slope >= -1.0:
        return math.inf, slope
    return float(f[-1] * (1.0 + T) / (-slope - 1.0)), slope


def cumulative_integral(source, weight: float, tag) -> np.ndarray:
    """Running ``int_0^t`` on the grid, Simpson per interval with dense midpoints."""
    t = source.times
    f = integrand_values(source, weight, tag)
    fm = integrand_values(source, weight, tag, times=0.5 * (t[1:] + t[:-1]))
    pieces = np.diff(t) / 6.0 * (f[:-1] + 4.0 * fm + f[1:])
    return np.concatenate([[0.0], np.cumsum(pieces)])


# ---------------------------------------------------------------------------
# global-existence mechanism


def s_condition_margin(setup: ProblemSetup, traj) -> tuple[float, float]:
    """``min_t [1/(2(1+t)) - eps |c'|/c]`` over the grid, and where it occurs."""
    e = energy_series(setup, traj)
    margin = 0.5 / (1.0 + traj.times) - setup.eps * np.abs(e["c_eps_prime"]) / e["c_eps"]
    j = int(np.argmin(margin))
    return float(margin[j]), float(traj.times[j])


def bound_suite(setup: ProblemSetup, traj, consts: DerivedConstants | None = None,
                slack: float = 1.0 + 1e-6) -> dict:
    """The four explicit-constant bounds along a hyperbolic trajectory.

    Each entry reports ``max_t LHS(t)``, the bound and whether
    ``LHS <= bound * slack`` at every grid time.  Running integrals come from
    the integrator.
    """
    if consts is None:
        consts = derived_constants(setup)
    eps, lam = setup.eps, setup.op.eigenvalues
    w = 1.0 + traj.times
    u, du, q = traj.u, traj.du, traj.integrals
    lhs = {
        "decay_E": w**2 * eps * _sq(lam, 0, du) + w**2 * _sq(lam, 0.5, u) + q["w1_du2"],
        "D0_final": _sq(lam, 0, u) + q["w1_a12u2"],
        "F": w**4 * eps * _sq(lam, 0.5, du) + w**4 * _sq(lam, 1, u) + q["w3_a12du2"],
        "D1_final": q["w3_au2"],
    }
    bounds = {
        "decay_E": consts.k1, "D0_final": consts.k2, "F": consts.k4,
        "D1_final": (consts.k4 + consts.k3) / consts.mu1,
    }
    out = {}
    for name, series in lhs.items():
        bound = bounds[name]
        out[name] = {
            "max_lhs": float(np.max(series)), "bound": float(bound),
            "ratio": float(np.max(series) / bound) if bound > 0 else 0.0,
            "holds": bool(np.all(series <= bound * slack)),
        }
    return out


# ---------------------------------------------------------------------------
# comparison lemmas


def lemma_sqrt_bound(y0: float, c1: float, c2: float) -> float:
    """Bound ``max{y(0), (c2/c1)^2}`` for ``y' <= psi (-c1 y + c2 sqrt(y))``."""
    if not (c1 > 0 and c2 > 0):
        raise ValueError("c1 and c2 must be positive")
    if y0 < 0:
        raise ValueError("y0 must be nonnegative")
    return max(y0, (c2 / c1) ** 2)


def lemma_lin_bound(G1: float, G2: float, G3: float) -> float:
    """Bound on ``y(t)`` from ``y + G1 <= exp(G2) G3`` (``y(0) = 0``)."""
    return math.exp(G2) * G3 - G1
