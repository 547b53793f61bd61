"""Boundary-layer corrector and the error fields rho = u_eps - u, r = rho - theta."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import corrector_initial_velocity
from .trajectory import Trajectory

UNDERFLOW = 1e-300


def _layer_power(eps: float, t, shift: float):
    """``(1+t)^(shift - 1/eps)`` via exp/log, clamped to 0 below 1e-300."""
    val = np.exp((shift - 1.0 / eps) * np.log1p(np.asarray(t, dtype=float)))
    return np.where(val < UNDERFLOW, 0.0, val)


def _w0(w0) -> np.ndarray:
    return np.asarray(getattr(w0, "coeffs", w0), dtype=float)


def theta(eps: float, w0, t):
    """Corrector for ``b = (1+t)^{-1}``: value and derivative at ``t``.

    ``theta = eps/(1-eps) (1 - (1+t)^{1-1/eps}) w0``,
    ``theta' = (1+t)^{-1/eps} w0``.  Broadcasts over an array of times
    (leading axis) against the mode axis of ``w0``.
    """
    if not 0 < eps < 1:
        raise ValueError("corrector formula needs 0 < eps < 1")
    w0 = _w0(w0)
    t = np.asarray(t, dtype=float)
    value = (eps / (1.0 - eps)) * (1.0 - _layer_power(eps, t, 1.0))
    deriv = _layer_power(eps, t, 0.0)
    return np.multiply.outer(value, w0), np.multiply.outer(deriv, w0)


def theta_second(eps: float, w0, t):
    """``theta'' = -(1/eps) (1+t)^{-1/eps-1} w0``."""
    return np.multiply.outer(-_layer_power(eps, t, -1.0) / eps, _w0(w0))


def verify_corrector_ode(eps: float, w0, times) -> float:
    """Max of ``|eps theta'' + theta'/(1+t)|`` over ``times``, relative to the
    largest of the two terms (0 when ``w0 = 0``)."""
    times = np.asarray(times, dtype=float)
    _, d1 = theta(eps, w0, times)
    d2 = theta_second(eps, w0, times)
    a = eps * d2
    b = d1 / (1.0 + times)[:, None]
    res = np.linalg.norm(a + b, axis=1)
    size = np.maximum(np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1))
    if not np.any(size > 0):
        return 0.0
    return float(np.max(np.where(size > 0, res / np.where(size > 0, size, 1.0), 0.0)))


@dataclass(frozen=True)
class ErrorDecomposition:
    """Error fields on the shared output grid of a hyperbolic/parabolic pair.

    ``hyp`` and ``par`` are kept for dense evaluation off the grid.
    """

    times: np.ndarray
    rho: np.ndarray
    drho: np.ndarray
    theta: np.ndarray
    dtheta: np.ndarray
    r: np.ndarray
    dr: np.ndarray
    eps: float
    w0: np.ndarray
    hyp: Trajectory
    par: Trajectory

    def at(self, t):
        """Dense ``(rho, rho', r, r')`` from both trajectories' interpolants."""
        ue, due, _ = self.hyp.at(t)
        u, du, _ = self.par.at(t)
        th, dth = theta(self.eps, self.w0, t)
        rho, drho = ue - u, due - du
        return rho, drho, rho - th, drho - dth


class AssemblyError(ValueError):
    pass


def assemble(hyp: Trajectory, par: Trajectory, eps: float | None = None, w0=None) -> ErrorDecomposition:
    """Form ``rho``, ``theta``, ``r`` and their derivatives.

    Both trajectories are sampled on the union of their grids through their
    own interpolants; with the default configuration the grids coincide and no
    interpolation happens.
    """
    setup = hyp.setup
    if par.setup.op != setup.op or par.setup.m != setup.m or par.setup.b != setup.b \
            or not np.array_equal(par.setup.u0.coeffs, setup.u0.coeffs):
        raise AssemblyError("trajectories come from different problems")
    if setup.b.p != 1.0:
        raise AssemblyError("the explicit corrector is defined for b = (1+t)^{-1} only")
    eps = setup.eps if eps is None else eps
    w0 = corrector_initial_velocity(setup).coeffs if w0 is None else _w0(w0)
    if np.array_equal(hyp.times, par.times):
        times = hyp.times
        ue, due, u, du = hyp.u, hyp.du, par.u, par.du
    else:
        T = min(hyp.T, par.T)
        times = np.union1d(hyp.times[hyp.times <= T], par.times[par.times <= T])
        ue, due, _ = hyp.at(times)
        u, du, _ = par.at(times)
    th, dth = theta(eps, w0, times)
    rho, drho = ue - u, due - du
    r, dr = rho - th, drho - dth
    # exact initial values by construction
    rho[0] = 0.0
    r[0] = 0.0
    dr[0] = 0.0
    drho[0] = w0
    arrays = [times, rho, drho, th, dth, r, dr]
    for a in arrays:
        a.setflags(write=False)
    return ErrorDecomposition(*arrays, eps=eps, w0=w0, hyp=hyp, par=par)
