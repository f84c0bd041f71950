"""Clamped B-spline feature expansion used by the action and Q-function fits.

Clamped splines form a partition of unity on their domain, which keeps the
regression Gram matrices well conditioned.  Points outside the domain are
clamped to its boundary rather than extrapolated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .errors import ConfigError, DegenerateDomainError

__all__ = ["BasisSpec", "build_spec", "spec_from_domain", "evaluate", "evaluate_matrix"]

DEFAULT_M = 12
DEFAULT_DEGREE = 3


@dataclass(frozen=True)
class BasisSpec:
    """m spline functions of the given degree on [x_lo, x_hi] with a fixed knot vector."""

    m: int
    degree: int
    knots: np.ndarray
    x_lo: float
    x_hi: float


def spec_from_domain(x_lo: float, x_hi: float, m: int = DEFAULT_M, degree: int = DEFAULT_DEGREE) -> BasisSpec:
    """Clamped uniform knot vector over [x_lo, x_hi] yielding exactly m functions."""
    if m < degree + 1:
        raise ConfigError(f"need m >= degree+1, got m={m}, degree={degree}")
    if not x_lo < x_hi:
        raise ConfigError(f"need x_lo < x_hi, got [{x_lo}, {x_hi}]")
    interior = np.linspace(x_lo, x_hi, m - degree + 1)[1:-1]
    knots = np.concatenate([np.full(degree + 1, x_lo), interior, np.full(degree + 1, x_hi)])
    return BasisSpec(m=m, degree=degree, knots=knots, x_lo=x_lo, x_hi=x_hi)


def build_spec(x_samples: np.ndarray, m: int = DEFAULT_M, degree: int = DEFAULT_DEGREE) -> BasisSpec:
    """Spec whose domain covers the sample cloud with a tiny pad on each side."""
    x = np.asarray(x_samples, dtype=float)
    if x.size == 0:
        raise ConfigError("x_samples must be non-empty")
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        raise DegenerateDomainError("all samples equal: cannot build a basis domain")
    pad = 1e-6 * (hi - lo)
    return spec_from_domain(lo - pad, hi + pad, m=m, degree=degree)


def evaluate_matrix(spec: BasisSpec, x: np.ndarray) -> np.ndarray:
    """Dense n x m design matrix; x is clamped to the spec domain first."""
    xc = np.clip(np.asarray(x, dtype=float), spec.x_lo, spec.x_hi)
    return BSpline.design_matrix(xc, spec.knots, spec.degree).toarray()


def evaluate(spec: BasisSpec, x: float) -> np.ndarray:
    """All m basis values at one point (non-negative, summing to 1)."""
    if not np.isfinite(x):
        raise ConfigError(f"x must be finite, got {x!r}")
    return evaluate_matrix(spec, np.array([x]))[0]
