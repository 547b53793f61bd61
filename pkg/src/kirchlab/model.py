"""Nonlinearity, dissipation and problem setup, plus the explicit constants
(mu1, mu2, L, H(0), k1..k4, eps0, w0) that control the energy estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .spectral import OperatorSpec, SpectralVector, sq_norms


@dataclass(frozen=True)
class NonlinearitySpec:
    """The Kirchhoff coefficient ``m(sigma)``.

    Families
    --------
    ``constant``  m = mu
    ``affine``    m = a + slope * sigma   (a > 0, slope >= 0)
    ``table``     C^1 cubic spline through ``(knots, values)``, clamped to zero
                  slope at the last knot and extended constantly beyond it
    """

    family: str
    params: tuple = ()
    _spline: CubicSpline | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.family == "constant":
            (mu,) = self.params
            if not mu > 0:
                raise ValueError("constant nonlinearity must be positive")
        elif self.family == "affine":
            a, slope = self.params
            if not a > 0 or slope < 0:
                raise ValueError("affine nonlinearity needs a > 0 and slope >= 0")
        elif self.family == "table":
            knots, values = (np.asarray(p, dtype=float) for p in self.params)
            if knots.size < 3 or knots[0] != 0.0 or np.any(np.diff(knots) <= 0):
                raise ValueError("table knots must start at 0, increase, and number >= 3")
            if values.shape != knots.shape:
                raise ValueError("table values must match knots")
            spline = CubicSpline(knots, values, bc_type=((2, 0.0), (1, 0.0)), extrapolate=True)
            object.__setattr__(self, "params", (tuple(knots), tuple(values)))
            object.__setattr__(self, "_spline", spline)
            if self._table_min() <= 0:
                raise ValueError("table nonlinearity must stay positive (nondegeneracy)")
        else:
            raise ValueError(f"unknown nonlinearity family {self.family!r}")

    @classmethod
    def constant(cls, mu: float):
        return cls("constant", (float(mu),))

    @classmethod
    def affine(cls, a: float, slope: float):
        return cls("affine", (float(a), float(slope)))

    @classmethod
    def table(cls, knots, values):
        return cls("table", (tuple(knots), tuple(values)))

    @classmethod
    def sampled(cls, func, sigma_max: float, n: int = 201):
        """Tabulate ``func`` on ``n`` equispaced knots of ``[0, sigma_max]``."""
        knots = np.linspace(0.0, sigma_max, n)
        return cls.table(knots, [func(s) for s in knots])

    @property
    def _last_knot(self) -> float:
        return self.params[0][-1]

    def _table_min(self) -> float:
        s = self._spline
        crit = [r for r in s.derivative().roots(extrapolate=False) if 0 <= r <= self._last_knot]
        cand = np.concatenate([[0.0, self._last_knot], crit])
        return float(np.min(s(cand)))

    def __call__(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        if self.family == "constant":
            return np.full_like(sigma, self.params[0]) if sigma.ndim else float(self.params[0])
        if self.family == "affine":
            a, slope = self.params
            return a + slope * sigma
        out = self._spline(np.minimum(sigma, self._last_knot))
        return out if sigma.ndim else float(out)

    def derivative(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        if self.family == "constant":
            return np.zeros_like(sigma) if sigma.ndim else 0.0
        if self.family == "affine":
            return np.full_like(sigma, self.params[1]) if sigma.ndim else float(self.params[1])
        out = np.where(sigma < self._last_knot, self._spline(sigma, 1), 0.0)
        return out if sigma.ndim else float(out)

    def primitive(self, sigma):
        """``M(sigma) = int_0^sigma m``."""
        sigma = np.asarray(sigma, dtype=float)
        if self.family == "constant":
            out = self.params[0] * sigma
        elif self.family == "affine":
            a, slope = self.params
            out = a * sigma + 0.5 * slope * sigma**2
        else:
            last = self._last_knot
            s = np.minimum(sigma, last)
            anti = self._spline.antiderivative()
            out = anti(s) - anti(0.0) + self._spline(last) * np.maximum(sigma - last, 0.0)
        return out if sigma.ndim else float(out)

    @property
    def mu1(self) -> float:
        """``inf_{sigma >= 0} m(sigma)``."""
        if self.family == "constant":
            return self.params[0]
        if self.family == "affine":
            return self.params[0]
        return self._table_min()


@dataclass(frozen=True)
class DissipationSpec:
    """``b(t) = (1+t)**(-p)``."""

    p: float = 1.0

    def __post_init__(self):
        if not self.p >= 0:
            raise ValueError("dissipation exponent must be >= 0")

    def __call__(self, t):
        return (1.0 + np.asarray(t, dtype=float)) ** (-self.p)

    def derivative(self, t):
        return -self.p * (1.0 + np.asarray(t, dtype=float)) ** (-self.p - 1.0)

    def integral(self, t):
        """``int_0^t b``."""
        s = 1.0 + np.asarray(t, dtype=float)
        if self.p == 1.0:
            return np.log(s)
        return (s ** (1.0 - self.p) - 1.0) / (1.0 - self.p)

    def clock(self, t):
        """``tau(t) = int_0^t 1/b``; the reduced problem is autonomous in ``tau``."""
        return ((1.0 + np.asarray(t, dtype=float)) ** (self.p + 1.0) - 1.0) / (self.p + 1.0)

    @property
    def total(self) -> float:
        """``int_0^inf b`` (``inf`` unless p > 1)."""
        return 1.0 / (self.p - 1.0) if self.p > 1 else math.inf


@dataclass(frozen=True)
class ProblemSetup:
    eps: float
    op: OperatorSpec
    m: NonlinearitySpec
    b: DissipationSpec
    u0: SpectralVector
    u1: SpectralVector

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        for name in ("u0", "u1"):
            vec = getattr(self, name)
            if not isinstance(vec, SpectralVector):
                vec = SpectralVector(vec)
                object.__setattr__(self, name, vec)
            if len(vec) != self.op.n:
                raise ValueError(f"{name} has {len(vec)} modes, operator has {self.op.n}")

    def with_eps(self, eps: float) -> "ProblemSetup":
        return ProblemSetup(eps, self.op, self.m, self.b, self.u0, self.u1)

    def norm2(self, alpha: float, x) -> float:
        return float(sq_norms(self.op, alpha, np.asarray(x)))


@dataclass(frozen=True)
class DerivedConstants:
    mu1: float
    mu2: float
    L: float
    H0: float
    k1: float
    k2: float
    k3: float
    k4: float
    eps0: float
    w0: SpectralVector


def hamiltonian_initial(setup: ProblemSetup) -> float:
    """``H(0) = eps |u1|^2 + M(|A^{1/2} u0|^2)``."""
    return setup.eps * setup.norm2(0, setup.u1) + setup.m.primitive(setup.norm2(0.5, setup.u0))


def _sigma_max(setup: ProblemSetup) -> float:
    return hamiltonian_initial(setup) / setup.m.mu1


def _max_on(func, hi: float) -> float:
    """Max of ``func`` on ``[0, hi]``: grid scan then bounded golden/Brent refinement."""
    if hi <= 0:
        return float(func(0.0))
    grid = np.linspace(0.0, hi, 2001)
    vals = np.asarray([func(s) for s in grid])
    j = int(np.argmax(vals))
    lo_b, hi_b = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
    res = minimize_scalar(lambda s: -func(s), bounds=(lo_b, hi_b), method="bounded",
                          options={"xatol": 1e-12 * max(1.0, hi)})
    return float(max(vals[j], -res.fun))


def compute_mu2(setup: ProblemSetup) -> float:
    """``max m`` on ``[0, H(0)/mu1]``."""
    m, hi = setup.m, _sigma_max(setup)
    if m.family == "constant":
        return m.params[0]
    if m.family == "affine":
        return float(m(hi))
    return _max_on(m, hi)


def compute_L(setup: ProblemSetup) -> float:
    """``max |m'|`` on ``[0, H(0)/mu1]``."""
    m, hi = setup.m, _sigma_max(setup)
    if m.family == "constant":
        return 0.0
    if m.family == "affine":
        return m.params[1]
    return _max_on(lambda s: abs(m.derivative(s)), hi)


def _data_norms(setup: ProblemSetup) -> dict:
    n = setup.norm2
    return {
        "u0": n(0, setup.u0), "u1": n(0, setup.u1),
        "a12u0": n(0.5, setup.u0), "a12u1": n(0.5, setup.u1), "au0": n(1, setup.u0),
    }


def compute_k_constants(setup: ProblemSetup, mu2: float | None = None):
    mu1 = setup.m.mu1
    if mu2 is None:
        mu2 = compute_mu2(setup)
    d = _data_norms(setup)
    k1 = max(2.0, 1.0 / mu1) * (mu2 / mu1 * (d["u1"] + d["u0"]) + d["u1"] + mu2 * d["a12u0"])
    k2 = max(8.0, 1.0 / mu1) * (k1 + d["u1"] + d["u0"])
    k3 = k2 + 0.5 * (d["a12u0"] + d["a12u1"])
    k4 = max(1.0, 2.0 * mu2) * (d["a12u1"] / mu1 + d["au0"] + 4.0 / mu1 * k3)
    return k1, k2, k3, k4


# strict inequality realized with a safety factor
STRICT_FACTOR = 0.999


def eps0_caps(setup: ProblemSetup, mu2=None, L=None, ks=None) -> dict:
    """Each smallness condition on eps0 as an upper cap (``inf`` when vacuous)."""
    mu1 = setup.m.mu1
    mu2 = compute_mu2(setup) if mu2 is None else mu2
    L = compute_L(setup) if L is None else L
    k1, _, _, k4 = compute_k_constants(setup, mu2) if ks is None else ks
    coupling = abs(float(np.dot(setup.u1.coeffs, setup.op.eigenvalues * setup.u0.coeffs)))
    caps = {"base": min(1.0 / 8.0, mu1 / (8.0 * mu2)), "initial_s": math.inf,
            "global_s": math.inf, "error": mu1 / (128.0 * mu2)}
    if L * coupling > 0:
        caps["initial_s"] = STRICT_FACTOR * mu1 / (4.0 * L * coupling)
    if L * (k1 + k4) > 0:
        caps["global_s"] = (mu1 / (2.0 * L * (k1 + k4))) ** 2
    return caps


def compute_eps0(setup: ProblemSetup, mu2=None, L=None, ks=None) -> float:
    return min(eps0_caps(setup, mu2, L, ks).values())


def corrector_initial_velocity(setup: ProblemSetup) -> SpectralVector:
    """``w0 = u1 + m(|A^{1/2}u0|^2) A u0 / b(0)``."""
    u0 = setup.u0.coeffs
    c0 = setup.m(setup.norm2(0.5, u0))
    return SpectralVector(setup.u1.coeffs + c0 / float(setup.b(0.0)) * setup.op.eigenvalues * u0)


def derived_constants(setup: ProblemSetup) -> DerivedConstants:
    mu2 = compute_mu2(setup)
    L = compute_L(setup)
    ks = compute_k_constants(setup, mu2)
    return DerivedConstants(
        mu1=setup.m.mu1, mu2=mu2, L=L, H0=hamiltonian_initial(setup),
        k1=ks[0], k2=ks[1], k3=ks[2], k4=ks[3],
        eps0=compute_eps0(setup, mu2, L, ks), w0=corrector_initial_velocity(setup),
    )


# eps0 is always <= 1/8, so H(0) evaluated there bounds H(0) for every admissible eps
REFERENCE_EPS = 1.0 / 8.0


def reference_eps0(setup: ProblemSetup) -> float:
    """``eps0`` for the data of ``setup`` with ``H(0)`` taken at ``eps = 1/8``.

    ``H(0)`` (and with it ``mu2`` and ``L``) depends on eps; evaluating it at
    the largest admissible eps gives a threshold valid for all smaller eps.
    """
    return compute_eps0(setup.with_eps(REFERENCE_EPS))
