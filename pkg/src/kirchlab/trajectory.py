"""Solver configuration, output grids and the :class:`Trajectory` container."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    T: float = 1e3
    max_steps: int = 2_000_000
    n_log: int = 400
    n_layer: int = 100
    layer_width: float = 10.0  # in units of eps

    def __post_init__(self):
        if not 1e-12 <= self.rel_tol <= 1e-4:
            raise ValueError(f"rel_tol {self.rel_tol} outside [1e-12, 1e-4]")
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if self.n_log < 2 or self.n_layer < 0:
            raise ValueError("bad output grid sizes")

    def replace(self, **kw) -> "SolverConfig":
        d = dict(self.__dict__)
        d.update(kw)
        return SolverConfig(**d)


def output_grid(cfg: SolverConfig, eps: float) -> np.ndarray:
    """Log-spaced points in ``1+t`` over ``[0, T]`` merged with a linear grid
    over the boundary layer ``[0, layer_width*eps]``."""
    log_part = np.geomspace(1.0, 1.0 + cfg.T, cfg.n_log) - 1.0
    log_part[0], log_part[-1] = 0.0, cfg.T
    width = min(cfg.layer_width * eps, cfg.T)
    layer = np.linspace(0.0, width, cfg.n_layer + 1) if cfg.n_layer else np.zeros(1)
    grid = np.union1d(log_part, layer)
    # drop near-duplicates that would force vanishing steps
    keep = np.concatenate([[True], np.diff(grid) > 1e-12 * (1.0 + grid[1:])])
    grid = grid[keep]
    grid[-1] = cfg.T
    return grid


def _ro(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def hermite(times, y, dy, t):
    """Cubic Hermite interpolation of samples ``y`` with slopes ``dy``.

    Returns the value and the derivative of the interpolant at ``t``
    (scalar or array); rows of ``y`` correspond to ``times``.
    """
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    if np.any(t < times[0] - 1e-12) or np.any(t > times[-1] * (1 + 1e-12) + 1e-12):
        raise ValueError("evaluation time outside trajectory span")
    j = np.clip(np.searchsorted(times, t, side="right") - 1, 0, times.size - 2)
    t0, t1 = times[j], times[j + 1]
    h = (t1 - t0)[:, None]
    s = ((t - t0) / (t1 - t0))[:, None]
    y0, y1, m0, m1 = y[j], y[j + 1], dy[j], dy[j + 1]
    s2, s3 = s * s, s * s * s
    val = (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * m0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * m1
    der = (6 * s2 - 6 * s) / h * (y0 - y1) + (3 * s2 - 4 * s + 1) * m0 + (3 * s2 - 2 * s) * m1
    if scalar:
        return val[0], der[0]
    return val, der


@dataclass(frozen=True)
class Trajectory:
    """Samples of ``u`` and its first two time derivatives on an output grid.

    ``integrals`` holds running integrals carried by the integrator (only the
    hyperbolic solver fills it); ``coeff`` is ``c(t) = m(|A^{1/2}u(t)|^2)``.
    """

    kind: str
    setup: object
    times: np.ndarray
    u: np.ndarray
    du: np.ndarray
    ddu: np.ndarray
    coeff: np.ndarray
    integrals: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("times", "u", "du", "ddu", "coeff"):
            object.__setattr__(self, name, _ro(getattr(self, name)))
        object.__setattr__(self, "integrals", {k: _ro(v) for k, v in self.integrals.items()})
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must start at 0 and increase strictly")

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def at(self, t):
        """Dense evaluation ``(u, u', u'')`` at ``t`` (cubic Hermite)."""
        u, du_from_u = hermite(self.times, self.u, self.du, t)
        du, ddu = hermite(self.times, self.du, self.ddu, t)
        return u, du, ddu
