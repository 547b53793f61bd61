"""The singularly perturbed problem  eps u'' + b(t) u' + m(|A^{1/2}u|^2) A u = 0."""
from __future__ import annotations

import numpy as np

from .integrator import BlowUp, integrate, newton_coefficient
from .model import ProblemSetup, hamiltonian_initial
from .trajectory import SolverConfig, Trajectory, output_grid

BLOWUP_LEVEL = 1e12

# running integrals carried alongside the solution
INTEGRAL_NAMES = (
    "dissipation",   # int b |u'|^2
    "w1_du2",        # int (1+s) |u'|^2
    "w1_a12u2",      # int (1+s) |A^{1/2}u|^2
    "w3_a12du2",     # int (1+s)^3 |A^{1/2}u'|^2
    "w3_au2",        # int (1+s)^3 |Au|^2
)


class _ModeSystem:
    """First-order form u' = v, v' = -(b v + c lam u)/eps, mode by mode."""

    def __init__(self, setup: ProblemSetup):
        self.eps = setup.eps
        self.lam = setup.op.eigenvalues
        self.n = self.lam.size
        self.m = setup.m
        self.b = setup.b
        self.mp = -float(setup.b.p)
        self.const_c = self.m.params[0] if self.m.family == "constant" else None

    def coefficient(self, y):
        u = y[: self.n]
        return float(self.m(self.lam @ (u * u)))

    def solve_stage(self, t, z, hg, c_guess):
        eps, lam = self.eps, self.lam
        zu, zv = z[: self.n], z[self.n:]
        beta = (1.0 + t) ** self.mp
        hg2 = hg * hg
        if self.const_c is not None:
            c = self.const_c
            V = (eps * zv - hg * c * lam * zu) / (eps + hg * beta + hg2 * c * lam)
            return np.concatenate([zu + hg * V, V]), c

        def sigma_of(c):
            D = eps + hg * beta + hg2 * c * lam
            V = (eps * zv - hg * c * lam * zu) / D
            U = zu + hg * V
            lu = lam * U
            return lu @ U, -2.0 * hg2 * np.sum(lu * lu / D), (U, V)

        c, (U, V) = newton_coefficient(self.m, c_guess, sigma_of)
        return np.concatenate([U, V]), c

    def filter_error(self, t, e, hg, c):
        eu, ev = e[: self.n], e[self.n:]
        D = self.eps + hg * (1.0 + t) ** self.mp + hg * hg * c * self.lam
        xv = (self.eps * ev - hg * c * self.lam * eu) / D
        return np.concatenate([eu + hg * xv, xv])

    def quadrature(self, ts, ys, cs):
        u, v = ys[:, : self.n], ys[:, self.n:]
        lam = self.lam
        w = 1.0 + ts
        v2 = np.einsum("ij,ij->i", v, v)
        lu = lam * u
        return np.column_stack([
            self.b(ts) * v2,
            w * v2,
            w * np.einsum("ij,ij->i", lu, u),
            w**3 * ((v * v) @ lam),
            w**3 * np.einsum("ij,ij->i", lu, lu),
        ])

    def scale(self, y):
        return np.abs(y)

    def check(self, t, y):
        u, v = y[: self.n], y[self.n:]
        size = self.lam @ (v * v) + (self.lam * u) @ (self.lam * u)
        if not np.isfinite(size) or size > BLOWUP_LEVEL:
            raise BlowUp("|A^{1/2}u'|^2 + |Au|^2 exceeded the blow-up guard", t)

    def acceleration(self, t, u, v, c):
        return -(self.b(t)[..., None] * v + c[..., None] * self.lam * u) / self.eps


def solve_hyperbolic(setup: ProblemSetup, cfg: SolverConfig = SolverConfig()) -> Trajectory:
    """Integrate the second order problem on ``[0, cfg.T]``.

    Raises :class:`~kirchlab.integrator.IntegrationError` subclasses on step
    size underflow, step budget exhaustion or blow-up.
    """
    sys = _ModeSystem(setup)
    times = output_grid(cfg, setup.eps)
    y0 = np.concatenate([setup.u0.coeffs, setup.u1.coeffs])
    h0 = 1e-4 * setup.eps
    Y, Cs, Q, stats = integrate(sys, y0, times, cfg.rel_tol, cfg.abs_tol, cfg.max_steps, h0)
    u, v = Y[:, : sys.n], Y[:, sys.n:]
    u[0], v[0] = setup.u0.coeffs, setup.u1.coeffs
    ddu = sys.acceleration(times, u, v, Cs)
    meta = {
        "solver": "sdirk4-L", "rel_tol": cfg.rel_tol, "abs_tol": cfg.abs_tol, "T": cfg.T,
        **stats.as_dict(), "H0": hamiltonian_initial(setup),
    }
    return Trajectory("hyperbolic", setup, times, u, v, ddu, Cs,
                      {k: Q[:, i] for i, k in enumerate(INTEGRAL_NAMES)}, meta)


def residual(setup: ProblemSetup, traj: Trajectory, t) -> float:
    """``|eps u'' + b u' + c A u|`` with ``u''`` taken from the derivative of
    the Hermite interpolant of ``u'``."""
    u, du, ddu = traj.at(t)
    c = setup.m(setup.op.eigenvalues @ (u * u))
    r = setup.eps * ddu + float(setup.b(t)) * du + c * setup.op.eigenvalues * u
    return float(np.sqrt(r @ r))


def hamiltonian_series(setup: ProblemSetup, traj: Trajectory) -> np.ndarray:
    lam = setup.op.eigenvalues
    sigma = np.sum(lam * traj.u**2, axis=1)
    return setup.eps * np.sum(traj.du**2, axis=1) + setup.m.primitive(sigma)


def hamiltonian_identity_gap(setup: ProblemSetup, traj: Trajectory) -> float:
    """``max_t |H(t) + 2 int_0^t b|u'|^2 - H(0)| / H(0)``.

    Holds for every ``b``; the dissipation integral is the one integrated
    alongside the solution by the stepper.
    """
    H = hamiltonian_series(setup, traj)
    H0 = hamiltonian_initial(setup)
    gap = np.abs(H + 2.0 * traj.integrals["dissipation"] - H0)
    return float(np.max(gap) / max(H0, 1e-300))
