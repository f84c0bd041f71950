"""Figure rendering for the report outputs.

Each report-writing command drops a PNG next to its CSV so results can be
eyeballed without a plotting session.  Rendering is headless (Agg).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiments import CalibrationReport, ComparisonRow

__all__ = ["comparison_figure", "curve_figure", "calibration_figure"]

_DPI = 150


def comparison_figure(rows: list[ComparisonRow], path: str | Path) -> None:
    """Fitted vs closed-form vs empirical probability by strike, one marker set per dataset."""
    fig, ax = plt.subplots(figsize=(7.0, 4.4))
    datasets = sorted({r.dataset_id for r in rows})
    for ds in datasets:
        sub = sorted((r for r in rows if r.dataset_id == ds), key=lambda r: r.strike)
        ks = [r.strike for r in sub]
        ax.plot(ks, [r.mqlv_value for r in sub], "o-", label=f"dataset {ds} fitted ({sub[0].n_paths:,} paths)")
        ax.plot(ks, [r.empirical_frequency for r in sub], "x--", alpha=0.6, label=f"dataset {ds} empirical")
    first = sorted((r for r in rows if r.dataset_id == datasets[0]), key=lambda r: r.strike)
    ax.plot([r.strike for r in first], [r.bsm_value for r in first], "k:", lw=2, label="closed-form reference")
    ax.set_xlabel("strike")
    ax.set_ylabel("event probability (%)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def curve_figure(strikes: np.ndarray, mqlv: np.ndarray, bsm: np.ndarray, rmse_pp: float, path: str | Path) -> None:
    """Strike curve of the fitted estimator against the closed-form reference."""
    fig, ax = plt.subplots(figsize=(7.0, 4.4))
    ax.plot(strikes, mqlv, "o-", ms=4, label="MQLV")
    ax.plot(strikes, bsm, "s--", ms=4, label="closed-form reference")
    ax.set_xlabel("strike")
    ax.set_ylabel("event probability (%)")
    ax.set_title(f"curve RMSE = {rmse_pp:.3f} pp")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def calibration_figure(report: CalibrationReport, path: str | Path) -> None:
    """Observed series against one path regenerated from the calibrated parameters."""
    fig, ax = plt.subplots(figsize=(7.0, 4.4))
    ax.plot(report.times, report.observed, lw=1.0, label="observed")
    ax.plot(report.times, report.regenerated, lw=1.0, alpha=0.8, label="regenerated")
    p = report.params
    ax.set_title(
        f"kappa={p.kappa:.4f}  b={p.b:.4f}  sigma={p.sigma:.4f}  rmse={report.series_rmse:.4f}"
    )
    ax.set_xlabel("time")
    ax.set_ylabel("level")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
