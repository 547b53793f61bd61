"""The reduced problem  b(t) u' + m(|A^{1/2}u|^2) A u = 0,  u(0) = u0.

With the clock ``tau(t) = int_0^t 1/b`` the equation becomes the autonomous
gradient flow ``du/dtau = -c A u``, integrated with the same SDIRK stepper as
the hyperbolic problem (it is stiff for large ``lambda_max * tau``).
"""
from __future__ import annotations

import numpy as np

from .integrator import integrate, newton_coefficient
from .model import ProblemSetup
from .trajectory import SolverConfig, Trajectory, output_grid


class _GradientFlow:
    def __init__(self, setup: ProblemSetup):
        self.lam = setup.op.eigenvalues
        self.m = setup.m

    def coefficient(self, u):
        return float(self.m(self.lam @ (u * u)))

    def solve_stage(self, tau, z, hg, c_guess):
        lam = self.lam
        if self.m.family == "constant":
            c = self.m.params[0]
            return z / (1.0 + hg * c * lam), c

        def sigma_of(c):
            D = 1.0 + hg * c * lam
            U = z / D
            lu = lam * U
            return lu @ U, -2.0 * hg * np.sum(lu * lu / D), U

        c, U = newton_coefficient(self.m, c_guess, sigma_of)
        return U, c

    def filter_error(self, tau, e, hg, c):
        return e / (1.0 + hg * c * self.lam)

    def quadrature(self, taus, us, cs):
        return np.empty((len(taus), 0))

    def scale(self, u):
        return np.abs(u)

    def check(self, tau, u):
        pass


def velocity(setup: ProblemSetup, t, u, c):
    """``u' = -c A u / b(t)``; broadcasts over leading time axis."""
    t = np.asarray(t, dtype=float)
    return -(np.asarray(c)[..., None] / setup.b(t)[..., None]) * setup.op.eigenvalues * u


def acceleration(setup: ProblemSetup, t, u, du, c):
    """``u''`` by differentiating ``u' = -(1+t)^p c A u`` (any p)."""
    lam = setup.op.eigenvalues
    p = setup.b.p
    t = np.asarray(t, dtype=float)[..., None]
    c = np.asarray(c, dtype=float)[..., None]
    sigma = np.sum(lam * u * u, axis=-1)
    dc = (setup.m.derivative(sigma) * 2.0 * np.sum(lam * u * du, axis=-1))[..., None]
    w = (1.0 + t) ** p
    return -p * (1.0 + t) ** (p - 1.0) * c * lam * u - w * dc * lam * u - w * c * lam * du


def solve_parabolic(setup: ProblemSetup, cfg: SolverConfig = SolverConfig()) -> Trajectory:
    """Integrate the reduced problem on the same output grid the hyperbolic
    solver uses for ``setup`` (eps only shapes the grid)."""
    flow = _GradientFlow(setup)
    times = output_grid(cfg, setup.eps)
    taus = setup.b.clock(times)
    u0 = setup.u0.coeffs
    rate = max(float(flow.coefficient(u0) * flow.lam[-1]), 1.0)
    U, Cs, _, stats = integrate(flow, u0, taus, cfg.rel_tol, cfg.abs_tol, cfg.max_steps, 1e-4 / rate)
    U[0] = u0
    du = velocity(setup, times, U, Cs)
    ddu = acceleration(setup, times, U, du, Cs)
    meta = {"solver": "sdirk4-L (tau clock)", "rel_tol": cfg.rel_tol, "abs_tol": cfg.abs_tol,
            "T": cfg.T, **stats.as_dict()}
    return Trajectory("parabolic", setup, times, U, du, ddu, Cs, {}, meta)


def closed_form_constant(setup: ProblemSetup, t):
    """Exact solution for constant ``m = mu``: ``u0 * exp(-mu lam tau(t))``."""
    if setup.m.family != "constant":
        raise ValueError("closed form needs a constant nonlinearity")
    mu = setup.m.params[0]
    tau = setup.b.clock(np.asarray(t, dtype=float))
    return setup.u0.coeffs * np.exp(-mu * np.multiply.outer(tau, setup.op.eigenvalues))


def parabolic_second_derivative(setup: ProblemSetup, traj: Trajectory, t: float) -> np.ndarray:
    """``u''(t)`` for ``b = (1+t)^{-1}`` assembled from

        u'' = -c A u + (1+t)^2 c^2 A^2 u + 2 (1+t)^2 c m'(|A^{1/2}u|^2) |Au|^2 A u.

    For other ``p`` the chain-rule derivative of the reduced equation is used.
    """
    if not t > 0:
        raise ValueError("second derivative formula needs t > 0")
    u, _, _ = traj.at(t)
    lam = setup.op.eigenvalues
    sigma = lam @ (u * u)
    c = setup.m(sigma)
    if setup.b.p != 1.0:
        du = velocity(setup, t, u, c)
        return acceleration(setup, t, u, du, c)
    au = lam * u
    w2 = (1.0 + t) ** 2
    return -c * au + w2 * c * c * lam * au + 2.0 * w2 * c * setup.m.derivative(sigma) * (au @ au) * au


def check_parabolic_decay(setup: ProblemSetup, traj: Trajectory, k: int) -> dict:
    """Empirical constants of the order-``k`` parabolic decay estimates.

    Reports ``sup_t (1+t)^{2k} |A^{k/2}u|^2`` and
    ``int_0^T (1+s)^{2k+1} |A^{(k+1)/2}u|^2 ds`` (trapezoid), each divided by
    ``|u0|^2 + |A^{k/2}u0|^2``.
    """
    lam = setup.op.eigenvalues
    t = traj.times
    u = traj.u
    w = 1.0 + t
    local = w ** (2 * k) * np.sum(lam**k * u * u, axis=1) if k else np.sum(u * u, axis=1)
    integrand = w ** (2 * k + 1) * np.sum(lam ** (k + 1) * u * u, axis=1)
    integral = float(np.trapezoid(integrand, t))
    norm = setup.norm2(0, setup.u0) + setup.norm2(k / 2, setup.u0)
    if norm == 0:
        return {"k": k, "local_ratio": 0.0, "integral_ratio": 0.0, "growing": False, "degenerate": True}
    tail = local[t >= t[-1] / 2]
    return {
        "k": k,
        "local_ratio": float(np.max(local) / norm),
        "integral_ratio": integral / norm,
        "argmax_t": float(t[int(np.argmax(local))]),
        # unbounded growth shows up as the sup sitting at the end of the horizon
        "growing": bool(tail.size > 1 and tail[-1] > tail[0] and tail[-1] >= np.max(local)),
        "degenerate": False,
    }
