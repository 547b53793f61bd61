"""Adaptive L-stable SDIRK integration for Kirchhoff-type mode systems.

The right-hand sides handled here are linear in the state once the scalar
coefficient ``c = m(|A^{1/2}u|^2)`` is frozen, so every implicit stage reduces
to independent per-mode 2x2 (or 1x1) solves plus a scalar Newton iteration on
``c``.  That is the rank-one-plus-diagonal structure of the Jacobian solved in
O(N) per iteration.

Method: the 5-stage, order 4, stiffly accurate SDIRK of Hairer & Wanner
(Solving ODEs II, Table IV.6.5) with its embedded order-3 solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GAMMA = 0.25
A = np.array([
    [1 / 4, 0, 0, 0, 0],
    [1 / 2, 1 / 4, 0, 0, 0],
    [17 / 50, -1 / 25, 1 / 4, 0, 0],
    [371 / 1360, -137 / 2720, 15 / 544, 1 / 4, 0],
    [25 / 24, -49 / 48, 125 / 16, -85 / 12, 1 / 4],
])
C = A.sum(axis=1)
B = A[-1].copy()
B_HAT = np.array([59 / 48, -17 / 96, 225 / 32, -85 / 12, 0.0])
ERR_ORDER = 3

NEWTON_RTOL = 1e-12
NEWTON_MAXITER = 30


class IntegrationError(RuntimeError):
    """Integrator gave up; ``t`` is the time reached."""

    def __init__(self, msg: str, t: float):
        super().__init__(f"{msg} (t = {t:.17g})")
        self.t = t


class StepSizeUnderflow(IntegrationError):
    pass


class MaxStepsExceeded(IntegrationError):
    pass


class BlowUp(IntegrationError):
    pass


class StageFailure(Exception):
    """Scalar Newton on the coupling coefficient did not converge."""


def newton_coefficient(m, c, sigma_and_slope):
    """Solve ``c = m(sigma(c))`` by Newton's method.

    ``sigma_and_slope(c)`` returns ``(sigma, dsigma/dc, payload)``.  Iterates
    until ``|dc|/c < NEWTON_RTOL``; returns ``(c, payload)``.
    """
    if m.family == "constant":
        c = m.params[0]
        return c, sigma_and_slope(c)[2]
    for _ in range(NEWTON_MAXITER):
        sigma, dsigma, payload = sigma_and_slope(c)
        phi = c - m(sigma)
        dphi = 1.0 - m.derivative(sigma) * dsigma
        if dphi <= 0.0 or not np.isfinite(dphi):
            raise StageFailure("nonmonotone coefficient equation")
        dc = phi / dphi
        c_new = c - dc
        if not c_new > 0:
            c_new = 0.5 * c
        if abs(c_new - c) <= NEWTON_RTOL * c_new:
            return c_new, sigma_and_slope(c_new)[2]
        c = c_new
    raise StageFailure("coefficient iteration did not converge")


@dataclass
class IntegratorStats:
    accepted: int = 0
    rejected: int = 0
    stage_failures: int = 0

    def as_dict(self):
        return dict(self.__dict__)


def integrate(problem, y0, t_out, rtol, atol, max_steps=2_000_000, h0=None):
    """Integrate ``problem`` from ``t_out[0]`` through every time in ``t_out``.

    ``problem`` provides ``solve_stage(t, z, hg, c_guess) -> (y, c)`` solving
    ``y = z + hg*f(t, y)``, ``coefficient(y) -> c``, ``quadrature(ts, ys, cs)``
    returning the integrands carried alongside for a batch of stage values
    (shape ``(len(ts), nq)``, ``nq`` may be 0), ``scale(y)``
    returning per-component reference magnitudes for the error norm,
    ``filter_error(t, e, hg, c)`` applying ``(I - hg J)^{-1}`` with ``c``
    frozen, and ``check(t, y)`` raising :class:`BlowUp` on runaway states.

    Steps are clipped so that each output time is hit exactly.  Returns the
    states, coefficients and running integrals at the output times plus stats.
    """
    t_out = np.asarray(t_out, dtype=float)
    y = np.array(y0, dtype=float)
    c = problem.coefficient(y)
    nq = problem.quadrature(t_out[:1], y[None, :], np.array([c])).shape[1]
    q = np.zeros(nq)
    k_out = t_out.size
    Y = np.empty((k_out, y.size))
    Cs = np.empty(k_out)
    Q = np.empty((k_out, nq))
    Y[0], Cs[0], Q[0] = y, c, q
    stats = IntegratorStats()
    t = t_out[0]
    t_end = t_out[-1]
    h = h0 if h0 is not None else 1e-6 * max(t_end - t, 1.0)
    n_stages = C.size
    F = np.empty((n_stages, y.size))
    Ys = np.empty((n_stages, y.size))
    Cst = np.empty(n_stages)
    err_w = B - B_HAT
    n_inv = 1.0 / y.size
    j_next = 1
    while j_next < k_out:
        target = t_out[j_next]
        hit = False
        h_try = h
        if t + h_try >= target * (1 - 1e-15) or t + h_try >= target - 1e-15 * abs(target):
            h_try = target - t
            hit = True
        if h_try < 1e-15 * max(1.0, abs(t)):
            raise StepSizeUnderflow("step size underflow", t)
        if stats.accepted + stats.rejected >= max_steps:
            raise MaxStepsExceeded(f"more than {max_steps} steps", t)
        hg = h_try * GAMMA
        try:
            ci = c
            for i in range(n_stages):
                z = y + h_try * (A[i, :i] @ F[:i]) if i else y.copy()
                ti = t + C[i] * h_try
                yi, ci = problem.solve_stage(ti, z, hg, ci)
                F[i] = (yi - z) / hg
                Ys[i] = yi
                Cst[i] = ci
        except StageFailure:
            stats.stage_failures += 1
            stats.rejected += 1
            h = 0.25 * h_try
            continue
        # stiffly accurate: last stage is the step result
        y_new = yi
        # stiff components would swamp the raw embedded estimate
        err_vec = problem.filter_error(t + h_try, h_try * (err_w @ F), hg, ci)
        sc = atol + rtol * np.maximum(problem.scale(y), problem.scale(y_new))
        ratio = err_vec / sc
        err = math.sqrt(float(ratio @ ratio) * n_inv)
        if not math.isfinite(err):
            stats.rejected += 1
            h = 0.25 * h_try
            continue
        if err <= 1.0:
            stats.accepted += 1
            t_prev = t
            t = target if hit else t + h_try
            y = y_new
            c = ci
            if nq:
                q = q + h_try * (B @ problem.quadrature(t_prev + C * h_try, Ys, Cst))
            problem.check(t, y)
            fac = 0.9 * err ** (-1.0 / (ERR_ORDER + 1)) if err > 0 else 5.0
            h_new = h_try * min(5.0, max(0.2, fac))
            # a step clipped to land on an output keeps the unclipped proposal
            h = max(h_new, h) if hit else h_new
            if hit:
                Y[j_next], Cs[j_next], Q[j_next] = y, c, q
                j_next += 1
        else:
            stats.rejected += 1
            fac = 0.9 * err ** (-1.0 / (ERR_ORDER + 1))
            h = h_try * min(1.0, max(0.1, fac))
    return Y, Cs, Q, stats
