"""Diagonal (spectral) representation of a nonnegative self-adjoint operator.

The operator ``A`` is stored as its eigenvalue list; a vector of the Hilbert
space is the array of its coefficients in the eigenbasis.  Fractional powers
act mode by mode, with the convention ``0**0 == 1`` so that ``A**0`` is the
identity on the kernel as well.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Vector length does not match the operator."""


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class OperatorSpec:
    """Nonnegative operator given by eigenvalues, stored sorted ascending."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        lam = np.sort(np.atleast_1d(np.asarray(self.eigenvalues, dtype=float)))
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("need at least one eigenvalue")
        if not np.all(np.isfinite(lam)) or np.any(lam < 0):
            raise ValueError("eigenvalues must be finite and nonnegative")
        object.__setattr__(self, "eigenvalues", _frozen(lam))

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @property
    def zero_modes(self) -> int:
        return int(np.count_nonzero(self.eigenvalues == 0.0))

    @classmethod
    def geometric(cls, n: int, lam_min: float, ratio: float, zero_modes: int = 0):
        """``zero_modes`` kernel modes followed by ``lam_min * ratio**j``."""
        lam = [0.0] * zero_modes + [lam_min * ratio**j for j in range(n)]
        return cls(np.array(lam))

    def power_weights(self, alpha: float) -> np.ndarray:
        """``lambda_i**alpha`` with ``0**0 = 1``."""
        if alpha < 0:
            raise ValueError(f"negative power {alpha!r} is not defined for a noncoercive operator")
        if alpha == 0:
            return np.ones_like(self.eigenvalues)
        return self.eigenvalues**alpha


@dataclass(frozen=True)
class SpectralVector:
    """Mode coefficients of a vector, paired with an :class:`OperatorSpec`."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen(np.atleast_1d(self.coeffs)))
        if self.coeffs.ndim != 1:
            raise ValueError("coefficients must be one-dimensional")

    def __len__(self):
        return self.coeffs.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coeffs, dtype=dtype)


def _coeffs(x) -> np.ndarray:
    return x.coeffs if isinstance(x, SpectralVector) else np.asarray(x, dtype=float)


def _check(op: OperatorSpec, x: np.ndarray):
    if x.shape[-1] != op.n:
        raise DimensionError(f"vector has {x.shape[-1]} modes, operator has {op.n}")


def apply_power(op: OperatorSpec, alpha: float, x) -> SpectralVector:
    """Return ``A**alpha x``."""
    c = _coeffs(x)
    _check(op, c)
    return SpectralVector(op.power_weights(alpha) * c)


def norm_power(op: OperatorSpec, alpha: float, x) -> float:
    """Return ``|A**alpha x|``."""
    c = _coeffs(x)
    _check(op, c)
    v = op.power_weights(alpha) * c
    big = float(np.max(np.abs(v))) if v.size else 0.0
    if big == 0.0 or not np.isfinite(big):
        return big
    # scaled so that tiny coefficients do not underflow when squared
    return big * float(np.linalg.norm(v / big))


def inner(x, y) -> float:
    a, b = _coeffs(x), _coeffs(y)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a, b))


def sq_norms(op: OperatorSpec, alpha: float, x: np.ndarray) -> np.ndarray:
    """Vectorized ``|A**alpha x|**2`` over the leading axes of ``x``."""
    x = np.asarray(x, dtype=float)
    _check(op, x)
    return np.sum(op.power_weights(2 * alpha) * x * x, axis=-1)
