"""Experiment harness: dataset comparisons, strike curves, calibration demo.

A run is described by an INI-style config with sections [vasicek] [grid]
[learner] [strikes] [output].  Scalar keys in [vasicek] and the paths key in
[grid] may carry comma-separated lists; list-valued keys are zipped into one
dataset per entry (scalars broadcast).  Unknown sections or keys are errors.
Reruns with the same config produce byte-identical CSV outputs.
"""

from __future__ import annotations

import configparser
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bsm_ref import BsmInputs, digital_probability
from .errors import ConfigError
from .learner import LearnerConfig, event_probability, fit
from .vasicek import PathGrid, VasicekParams, calibrate, read_series_csv, rmse, simulate

__all__ = [
    "DatasetSpec",
    "ExperimentConfig",
    "ComparisonRow",
    "CalibrationReport",
    "load_config",
    "run_comparison",
    "run_strike_curve",
    "run_calibration_demo",
    "empirical_frequency",
    "write_comparison_csv",
    "write_curve_csv",
    "comparison_report_text",
    "curve_report_text",
    "calibration_report_text",
]


@dataclass(frozen=True)
class DatasetSpec:
    dataset_id: int
    params: VasicekParams
    n_paths: int


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple[DatasetSpec, ...]
    n_steps: int
    maturity: float
    strikes: tuple[float, ...]
    learner: LearnerConfig
    output_dir: Path
    seed: int

    def __post_init__(self) -> None:
        if not self.strikes:
            raise ConfigError("strike grid must be non-empty")
        if any(b <= a for a, b in zip(self.strikes, self.strikes[1:])):
            raise ConfigError("strikes must be strictly increasing")
        if any(d.n_paths < 1000 for d in self.datasets):
            raise ConfigError("each dataset needs at least 1000 paths")

    def dataset_seed(self, dataset_id: int) -> int:
        return self.seed + dataset_id


@dataclass(frozen=True)
class ComparisonRow:
    """One (dataset, strike) result; probability fields are in percent."""

    dataset_id: int
    n_paths: int
    strike: float
    bsm_value: float
    mqlv_value: float
    abs_difference: float
    empirical_frequency: float


@dataclass(frozen=True)
class CalibrationReport:
    params: VasicekParams
    n_points: int
    dt: float
    series_rmse: float
    times: np.ndarray
    observed: np.ndarray
    regenerated: np.ndarray


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

_SCHEMA = {
    "vasicek": {"kappa", "b", "sigma", "s0"},
    "grid": {"paths", "steps", "maturity", "seed"},
    "learner": {"r", "lambda", "dropout_p", "ridge", "m_basis", "degree", "seed"},
    "strikes": {"values"},
    "output": {"dir"},
}

_DEFAULTS = {
    "vasicek": {"kappa": "0.01", "b": "1.0", "sigma": "0.15", "s0": "1.0"},
    "grid": {"paths": "40000", "steps": "5", "maturity": "0.5", "seed": "0"},
    "learner": {
        "r": "0.0",
        "lambda": "0.001",
        "dropout_p": "1.0",
        "ridge": "1e-8",
        "m_basis": "12",
        "degree": "3",
        "seed": "0",
    },
    "strikes": {"values": "0.92, 0.98, 1.00, 1.02"},
    "output": {"dir": "out"},
}


def _float_list(raw: str, section: str, key: str) -> list[float]:
    try:
        return [float(tok) for tok in raw.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as numbers") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a run config; raises ConfigError on any unknown key."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise OSError(f"cannot read config file {path}")

    values = {sec: dict(defaults) for sec, defaults in _DEFAULTS.items()}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser[section].items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            values[section][key] = raw

    lists = {key: _float_list(values["vasicek"][key], "vasicek", key) for key in ("kappa", "b", "sigma", "s0")}
    lists["paths"] = _float_list(values["grid"]["paths"], "grid", "paths")
    lengths = {len(v) for v in lists.values() if len(v) > 1}
    if len(lengths) > 1:
        raise ConfigError(f"list-valued keys disagree on dataset count: {sorted(lengths)}")
    n_datasets = lengths.pop() if lengths else 1

    def pick(name: str, i: int) -> float:
        vals = lists[name]
        return vals[i] if len(vals) > 1 else vals[0]

    datasets = tuple(
        DatasetSpec(
            dataset_id=i + 1,
            params=VasicekParams(kappa=pick("kappa", i), b=pick("b", i), sigma=pick("sigma", i), s0=pick("s0", i)),
            n_paths=int(pick("paths", i)),
        )
        for i in range(n_datasets)
    )

    lc = values["learner"]
    learner = LearnerConfig(
        r=float(lc["r"]),
        lam=float(lc["lambda"]),
        dropout_p=float(lc["dropout_p"]),
        ridge=float(lc["ridge"]),
        m_basis=int(lc["m_basis"]),
        degree=int(lc["degree"]),
        seed=int(lc["seed"]),
    )
    strikes = tuple(_float_list(values["strikes"]["values"], "strikes", "values"))
    return ExperimentConfig(
        datasets=datasets,
        n_steps=int(values["grid"]["steps"]),
        maturity=float(values["grid"]["maturity"]),
        strikes=strikes,
        learner=learner,
        output_dir=Path(values["output"]["dir"]),
        seed=int(values["grid"]["seed"]),
    )


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------


def empirical_frequency(grid: PathGrid, strike: float) -> float:
    """Fraction of paths whose terminal level reaches the strike (the brute-force oracle)."""
    return float((grid.terminal() >= strike).mean())


def _fit_probability(grid: PathGrid, params: VasicekParams, strike: float, learner: LearnerConfig) -> float:
    return event_probability(fit(grid, params, strike, learner)).probability


def _dataset_rows(
    config: ExperimentConfig, spec: DatasetSpec, grid: PathGrid, threads: int
) -> list[ComparisonRow]:
    def one(strike: float) -> ComparisonRow:
        mqlv = 100.0 * _fit_probability(grid, spec.params, strike, config.learner)
        bsm = 100.0 * digital_probability(
            BsmInputs(s0=spec.params.s0, k=strike, sigma=spec.params.sigma, r=config.learner.r, t=config.maturity)
        )
        return ComparisonRow(
            dataset_id=spec.dataset_id,
            n_paths=spec.n_paths,
            strike=strike,
            bsm_value=bsm,
            mqlv_value=mqlv,
            abs_difference=abs(bsm - mqlv),
            empirical_frequency=100.0 * empirical_frequency(grid, strike),
        )

    if threads > 1 and len(config.strikes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, config.strikes))
    else:
        rows = [one(k) for k in config.strikes]
    return rows


def simulate_dataset(config: ExperimentConfig, spec: DatasetSpec, threads: int = 1) -> PathGrid:
    return simulate(
        spec.params,
        maturity=config.maturity,
        n_steps=config.n_steps,
        n_paths=spec.n_paths,
        seed=config.dataset_seed(spec.dataset_id),
        threads=threads,
    )


def run_comparison(config: ExperimentConfig, threads: int = 1) -> list[ComparisonRow]:
    """One row per (dataset, strike): fitted probability vs closed-form vs empirical.

    Each dataset is simulated once and every strike refits on the cached grid.
    Rows come back sorted by (dataset_id, strike) regardless of thread count.
    """
    rows: list[ComparisonRow] = []
    for spec in config.datasets:
        grid = simulate_dataset(config, spec, threads=threads)
        rows.extend(_dataset_rows(config, spec, grid, threads))
    rows.sort(key=lambda r: (r.dataset_id, r.strike))
    return rows


def run_strike_curve(config: ExperimentConfig, threads: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Fitted and closed-form probability curves (percent) over a dense strike grid.

    Uses the first dataset of the config.  Returns (strikes, fitted, reference,
    rmse_in_percentage_points).
    """
    if len(config.strikes) < 20:
        raise ConfigError("curve runs need at least 20 strikes")
    if config.strikes[0] > 0.8 + 1e-9 or config.strikes[-1] < 1.2 - 1e-9:
        raise ConfigError("curve strike grid must span at least [0.8, 1.2]")
    spec = config.datasets[0]
    rows = _dataset_rows(config, spec, simulate_dataset(config, spec, threads=threads), threads)
    rows.sort(key=lambda r: r.strike)
    strikes = np.array([r.strike for r in rows])
    mqlv = np.array([r.mqlv_value for r in rows])
    bsm = np.array([r.bsm_value for r in rows])
    return strikes, mqlv, bsm, rmse(mqlv, bsm)


def run_calibration_demo(series_path: str | Path, dt: float, seed: int = 0) -> CalibrationReport:
    """Calibrate a series file, regenerate one path of the same length, report the gap."""
    times, observed = read_series_csv(series_path)
    calibrated = calibrate(observed, dt)
    n = observed.size
    regen_grid = simulate(calibrated, maturity=dt * (n - 1), n_steps=n - 1, n_paths=1, seed=seed)
    regenerated = regen_grid.values[0]
    return CalibrationReport(
        params=calibrated,
        n_points=n,
        dt=dt,
        series_rmse=rmse(observed, regenerated),
        times=times,
        observed=observed,
        regenerated=regenerated,
    )


# ---------------------------------------------------------------------------
# Delimited outputs (percent columns fixed to 3 decimals, mirroring the tables)
# ---------------------------------------------------------------------------


def write_comparison_csv(rows: list[ComparisonRow], path: str | Path) -> None:
    lines = ["dataset_id,n_paths,strike,bsm_value,mqlv_value,abs_difference,empirical_frequency"]
    for r in rows:
        lines.append(
            f"{r.dataset_id},{r.n_paths},{r.strike:g},{r.bsm_value:.3f},{r.mqlv_value:.3f},"
            f"{r.abs_difference:.3f},{r.empirical_frequency:.3f}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_curve_csv(strikes: np.ndarray, mqlv: np.ndarray, bsm: np.ndarray, path: str | Path) -> None:
    lines = ["strike,mqlv,bsm"]
    for k, m, b in zip(strikes, mqlv, bsm):
        lines.append(f"{k:g},{m:.3f},{b:.3f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _config_summary(config: ExperimentConfig) -> list[str]:
    lines = []
    for d in config.datasets:
        p = d.params
        lines.append(
            f"dataset {d.dataset_id}: kappa={p.kappa:g} b={p.b:g} sigma={p.sigma:g} s0={p.s0:g} "
            f"paths={d.n_paths} seed={config.dataset_seed(d.dataset_id)}"
        )
    lc = config.learner
    lines.append(
        f"learner: r={lc.r:g} lambda={lc.lam:g} dropout_p={lc.dropout_p:g} ridge={lc.ridge:g} "
        f"m_basis={lc.m_basis} degree={lc.degree} seed={lc.seed}"
    )
    lines.append(f"grid: steps={config.n_steps} maturity={config.maturity:g} master seed={config.seed}")
    return lines


def comparison_report_text(config: ExperimentConfig, rows: list[ComparisonRow]) -> str:
    lines = ["event probability comparison (percent)", ""]
    lines += _config_summary(config)
    lines.append("")
    lines.append(f"{'ds':>3} {'paths':>7} {'strike':>7} {'reference':>10} {'mqlv':>8} {'|diff|':>7} {'empirical':>10}")
    for r in rows:
        lines.append(
            f"{r.dataset_id:>3} {r.n_paths:>7} {r.strike:>7.3f} {r.bsm_value:>10.3f} "
            f"{r.mqlv_value:>8.3f} {r.abs_difference:>7.3f} {r.empirical_frequency:>10.3f}"
        )
    gaps = [abs(r.mqlv_value - r.empirical_frequency) for r in rows]
    lines.append("")
    lines.append(f"max |mqlv - empirical| = {max(gaps):.3f} pp")
    return "\n".join(lines) + "\n"


def curve_report_text(config: ExperimentConfig, strikes: np.ndarray, mqlv: np.ndarray, bsm: np.ndarray, rmse_pp: float) -> str:
    lines = ["strike curve (percent)", ""]
    lines += _config_summary(config)
    lines.append("")
    lines.append(f"strikes: {len(strikes)} points in [{strikes[0]:g}, {strikes[-1]:g}]")
    lines.append(f"curve RMSE vs closed-form reference: {rmse_pp:.3f} pp")
    lines.append(f"max pointwise gap: {np.abs(mqlv - bsm).max():.3f} pp")
    return "\n".join(lines) + "\n"


def calibration_report_text(report: CalibrationReport) -> str:
    p = report.params
    lines = [
        "calibration demo",
        "",
        f"points={report.n_points} dt={report.dt:g}",
        f"kappa={p.kappa:.6g} b={p.b:.6g} sigma={p.sigma:.6g} s0={p.s0:.6g}",
        f"rmse(observed, regenerated) = {report.series_rmse:.6g}",
    ]
    return "\n".join(lines) + "\n"
