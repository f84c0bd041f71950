"""Mean-reverting (Vasicek / Ornstein-Uhlenbeck) path generation and calibration.

Paths are sampled with the exact conditional-Gaussian transition, so the grid
carries no discretization bias.  Every path draws from its own RNG substream
keyed by (master seed, path index), which makes generation bit-deterministic
for any worker count.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CalibrationError, ConfigError, InvalidInputError

__all__ = [
    "VasicekParams",
    "PathGrid",
    "StateGrid",
    "exact_step",
    "simulate",
    "analytic_mean",
    "analytic_var",
    "mean_curve",
    "to_state",
    "delta_s",
    "calibrate",
    "rmse",
    "write_paths_csv",
    "read_paths_csv",
    "write_series_csv",
    "read_series_csv",
]

# Below this value of kappa*dt the transition switches to its kappa->0 limit.
_KAPPA_DT_EPS = 1e-8


@dataclass(frozen=True)
class VasicekParams:
    """Diffusion parameters: dS = kappa*(b - S)*dt + sigma*dB."""

    kappa: float
    b: float
    sigma: float
    s0: float

    def __post_init__(self) -> None:
        for name in ("kappa", "b", "sigma", "s0"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidInputError(f"{name} must be finite, got {v!r}")
        if self.kappa < 0:
            raise InvalidInputError("kappa must be >= 0")
        if self.sigma < 0:
            raise InvalidInputError("sigma must be >= 0")
        if self.s0 <= 0:
            raise InvalidInputError("s0 must be > 0")


@dataclass(frozen=True)
class PathGrid:
    """Monte Carlo levels, one row per path, columns at times 0, dt, ..., maturity."""

    values: np.ndarray
    dt: float
    maturity: float
    seed: int

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.shape[1]) * self.dt

    def terminal(self) -> np.ndarray:
        return self.values[:, -1]


@dataclass(frozen=True)
class StateGrid:
    """Detrended states X = S minus the deterministic mean curve, same layout as PathGrid."""

    values: np.ndarray
    dt: float
    maturity: float


def _transition(params: VasicekParams, dt: float) -> tuple[float, float, float]:
    """Coefficients (decay, pull, noise std) of the exact one-step transition.

    s' = decay*s + pull + std*z with z standard normal.
    """
    kdt = params.kappa * dt
    if kdt < _KAPPA_DT_EPS:
        return 1.0, 0.0, params.sigma * math.sqrt(dt)
    decay = math.exp(-kdt)
    pull = params.b * (1.0 - decay)
    var = params.sigma**2 * (1.0 - math.exp(-2.0 * kdt)) / (2.0 * params.kappa)
    return decay, pull, math.sqrt(var)


def exact_step(s: float, params: VasicekParams, dt: float, z: float) -> float:
    """One exact conditional-Gaussian transition from level `s` over `dt`."""
    if not (math.isfinite(s) and math.isfinite(z)):
        raise InvalidInputError("s and z must be finite")
    if dt <= 0:
        raise InvalidInputError("dt must be > 0")
    decay, pull, std = _transition(params, dt)
    return decay * s + pull + std * z


def analytic_mean(params: VasicekParams, t: float) -> float:
    """E[S_t] = s0*exp(-kappa*t) + b*(1 - exp(-kappa*t))."""
    if t < 0:
        raise InvalidInputError("t must be >= 0")
    decay = math.exp(-params.kappa * t)
    return params.s0 * decay + params.b * (1.0 - decay)


def analytic_var(params: VasicekParams, t: float) -> float:
    """Var[S_t] = sigma^2*(1 - exp(-2*kappa*t))/(2*kappa), sigma^2*t in the kappa->0 limit."""
    if t < 0:
        raise InvalidInputError("t must be >= 0")
    if params.kappa * t < _KAPPA_DT_EPS:
        return params.sigma**2 * t
    return params.sigma**2 * (1.0 - math.exp(-2.0 * params.kappa * t)) / (2.0 * params.kappa)


def mean_curve(params: VasicekParams, times: np.ndarray) -> np.ndarray:
    """Deterministic mean path evaluated at an array of times."""
    decay = np.exp(-params.kappa * np.asarray(times, dtype=float))
    return params.s0 * decay + params.b * (1.0 - decay)


def _path_rng(seed: int, path_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(path_index,)))


def _fill_block(out: np.ndarray, params: VasicekParams, dt: float, seed: int, lo: int, hi: int) -> None:
    n_steps = out.shape[1] - 1
    decay, pull, std = _transition(params, dt)
    z = np.empty((hi - lo, n_steps))
    for i, k in enumerate(range(lo, hi)):
        z[i] = _path_rng(seed, k).standard_normal(n_steps)
    block = out[lo:hi]
    block[:, 0] = params.s0
    for j in range(n_steps):
        block[:, j + 1] = decay * block[:, j] + pull + std * z[:, j]


def simulate(
    params: VasicekParams,
    maturity: float,
    n_steps: int,
    n_paths: int,
    seed: int,
    threads: int = 1,
) -> PathGrid:
    """Exact-transition Monte Carlo grid of `n_paths` x (`n_steps`+1) levels.

    Identical output for any `threads` value: path k consumes only the
    substream spawned from (seed, k).
    """
    if n_steps < 1 or n_paths < 1:
        raise ConfigError("n_steps and n_paths must be >= 1")
    if maturity <= 0:
        raise ConfigError("maturity must be > 0")
    dt = maturity / n_steps
    values = np.empty((n_paths, n_steps + 1))
    threads = max(1, int(threads))
    if threads == 1 or n_paths < 2 * threads:
        _fill_block(values, params, dt, seed, 0, n_paths)
    else:
        bounds = np.linspace(0, n_paths, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = [
                pool.submit(_fill_block, values, params, dt, seed, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])
            ]
            for f in futs:
                f.result()
    return PathGrid(values=values, dt=dt, maturity=maturity, seed=seed)


def to_state(grid: PathGrid, params: VasicekParams) -> StateGrid:
    """Subtract the deterministic mean curve from every column of the grid."""
    x = grid.values - mean_curve(params, grid.times)[None, :]
    return StateGrid(values=x, dt=grid.dt, maturity=grid.maturity)


def delta_s(grid: PathGrid, r: float) -> np.ndarray:
    """Per-step discounted increments S_{t+1} - exp(r*dt)*S_t, shape n_paths x n_steps."""
    if not math.isfinite(r):
        raise InvalidInputError("r must be finite")
    growth = math.exp(r * grid.dt)
    return grid.values[:, 1:] - growth * grid.values[:, :-1]


def calibrate(series: np.ndarray, dt: float) -> VasicekParams:
    """Recover (kappa, b, sigma, s0) from one observed series via an AR(1) OLS fit.

    Fits S_{t+1} = c0 + c1*S_t + eps and inverts the exact discretization:
    kappa = -ln(c1)/dt, b = c0/(1-c1), sigma = std(eps)*sqrt(-2*ln(c1)/(dt*(1-c1^2))).
    """
    s = np.asarray(series, dtype=float)
    if s.ndim != 1 or s.size < 3:
        raise InvalidInputError("series must be 1-D with at least 3 points")
    if dt <= 0:
        raise InvalidInputError("dt must be > 0")
    x, y = s[:-1], s[1:]
    vx = x.var()
    if vx == 0.0:
        raise CalibrationError("constant series: zero-variance regressor")
    c1 = float(np.cov(x, y, bias=True)[0, 1] / vx)
    c0 = float(y.mean() - c1 * x.mean())
    if c1 <= 0.0 or c1 >= 1.0:
        raise CalibrationError(f"AR(1) slope {c1:.6g} outside (0, 1): sample is not mean-reverting")
    resid = y - (c0 + c1 * x)
    kappa = -math.log(c1) / dt
    b = c0 / (1.0 - c1)
    sigma = float(resid.std()) * math.sqrt(-2.0 * math.log(c1) / (dt * (1.0 - c1**2)))
    return VasicekParams(kappa=kappa, b=b, sigma=sigma, s0=float(s[0]))


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    """Root mean squared difference of two equal-length series."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidInputError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


# ---------------------------------------------------------------------------
# File formats: long-form path CSV (path_id,step,time,value) and series CSV
# (time,value).  Floats are written with repr-round-trip precision so a reread
# reproduces the grid bit-exactly.
# ---------------------------------------------------------------------------


def write_paths_csv(grid: PathGrid, path: str | Path) -> None:
    times = grid.times
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["path_id", "step", "time", "value"])
        for k in range(grid.n_paths):
            row = grid.values[k]
            for j in range(grid.n_steps + 1):
                w.writerow([k, j, f"{times[j]:.17g}", f"{row[j]:.17g}"])


def read_paths_csv(path: str | Path) -> PathGrid:
    data: dict[int, dict[int, float]] = {}
    times: dict[int, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"path_id", "step", "time", "value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise InvalidInputError(f"paths CSV must have header {sorted(required)}")
        for row in reader:
            k = int(row["path_id"])
            j = int(row["step"])
            data.setdefault(k, {})[j] = float(row["value"])
            times[j] = float(row["time"])
    if not data:
        raise InvalidInputError("paths CSV contains no rows")
    n_paths = max(data) + 1
    n_steps = max(times)
    values = np.empty((n_paths, n_steps + 1))
    for k in range(n_paths):
        cols = data.get(k)
        if cols is None or len(cols) != n_steps + 1:
            raise InvalidInputError(f"path {k} is missing or ragged")
        for j in range(n_steps + 1):
            values[k, j] = cols[j]
    dt = times[1] - times[0] if n_steps >= 1 else 0.0
    return PathGrid(values=values, dt=dt, maturity=times[n_steps], seed=-1)


def write_series_csv(times: np.ndarray, values: np.ndarray, path: str | Path) -> None:
    if len(times) != len(values):
        raise InvalidInputError("times and values must have equal length")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "value"])
        for t, v in zip(times, values):
            w.writerow([f"{t:.17g}", f"{v:.17g}"])


def read_series_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    times: list[float] = []
    values: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"time", "value"}.issubset(reader.fieldnames):
            raise InvalidInputError("series CSV must have header time,value")
        for row in reader:
            times.append(float(row["time"]))
            values.append(float(row["value"]))
    if not values:
        raise InvalidInputError("series CSV contains no rows")
    return np.asarray(times), np.asarray(values)
