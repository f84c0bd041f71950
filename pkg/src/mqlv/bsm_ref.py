"""Closed-form Black-Scholes-Merton digital reference values.

The undiscounted digital probability is N(d2); the discounted price
exp(-r*t)*N(d2) is exposed separately.  Used as the cross-validation
reference for the Q-iteration estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import erfc

from .errors import InvalidInputError

__all__ = [
    "BsmInputs",
    "norm_cdf",
    "digital_probability",
    "digital_price",
    "digital_curve",
    "vanilla_call",
    "write_digital_curve_csv",
]


@dataclass(frozen=True)
class BsmInputs:
    s0: float
    k: float
    sigma: float
    r: float = 0.0
    t: float = 0.5

    def __post_init__(self) -> None:
        if self.s0 <= 0 or self.k <= 0:
            raise InvalidInputError("s0 and k must be > 0")
        if self.sigma < 0:
            raise InvalidInputError("sigma must be >= 0")
        if self.t <= 0:
            raise InvalidInputError("t must be > 0")


def norm_cdf(x):
    """Standard normal CDF via the complementary error function (abs err < 1e-12)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("x must be finite")
    out = 0.5 * erfc(-x / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def _d1_d2(inputs: BsmInputs) -> tuple[float, float]:
    v = inputs.sigma * math.sqrt(inputs.t)
    d1 = (math.log(inputs.s0 / inputs.k) + (inputs.r + 0.5 * inputs.sigma**2) * inputs.t) / v
    return d1, d1 - v


def digital_probability(inputs: BsmInputs) -> float:
    """P(S_t >= k) under the lognormal model: N(d2).  sigma=0 degenerates to an indicator."""
    if inputs.sigma == 0.0:
        return 1.0 if inputs.s0 * math.exp(inputs.r * inputs.t) >= inputs.k else 0.0
    _, d2 = _d1_d2(inputs)
    return float(norm_cdf(d2))


def digital_price(inputs: BsmInputs) -> float:
    """Discounted cash-or-nothing value exp(-r*t)*N(d2)."""
    return math.exp(-inputs.r * inputs.t) * digital_probability(inputs)


def digital_curve(inputs: BsmInputs, strikes: np.ndarray) -> np.ndarray:
    """digital_probability at each strike, other inputs held fixed."""
    ks = np.asarray(strikes, dtype=float)
    if ks.size == 0:
        raise InvalidInputError("strike grid must be non-empty")
    return np.array(
        [digital_probability(BsmInputs(inputs.s0, float(k), inputs.sigma, inputs.r, inputs.t)) for k in ks]
    )


def vanilla_call(inputs: BsmInputs) -> float:
    """European call s0*N(d1) - k*exp(-r*t)*N(d2); finite differences of this in k recover the digital."""
    if inputs.sigma == 0.0:
        return max(inputs.s0 - inputs.k * math.exp(-inputs.r * inputs.t), 0.0)
    d1, d2 = _d1_d2(inputs)
    return inputs.s0 * float(norm_cdf(d1)) - inputs.k * math.exp(-inputs.r * inputs.t) * float(norm_cdf(d2))


def write_digital_curve_csv(inputs: BsmInputs, strikes: np.ndarray, path: str | Path) -> None:
    """Reference curve as `strike,bsm_probability` rows."""
    probs = digital_curve(inputs, strikes)
    lines = ["strike,bsm_probability"]
    for k, p in zip(np.asarray(strikes, dtype=float), probs):
        lines.append(f"{k:g},{p:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
