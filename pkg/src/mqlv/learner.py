"""Backward batch Q-iteration over a Monte Carlo grid (the MQLV core).

Each backward step fits two ridge-regularized least-squares problems on the
cross-section of paths: first the optimal-action coefficients on the state
basis, then the Q-function weights on (1, a, a^2/2) x basis features against
the one-step Bellman targets.  The event probability is read off the fitted
Q-values at t=0.

Sign convention: the terminal condition is Q_T = -payoff - lambda*Var[payoff],
so the t=0 probability is the negated mean of the fitted Q-values.  Values are
clipped to [0, 1]; the raw mean is kept for diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import basis as basis_mod
from .basis import BasisSpec
from .errors import ConfigError, SolverFailure
from .vasicek import PathGrid, VasicekParams, delta_s, to_state

__all__ = [
    "LearnerConfig",
    "FitResult",
    "ProbabilityEstimate",
    "terminal_payoff",
    "terminal_q",
    "optimal_action_coeffs",
    "optimal_action",
    "pi_backward",
    "reward",
    "fqi_weights",
    "q_value",
    "fit",
    "event_probability",
    "write_fit_csvs",
]

# Half-width of the synthetic basis domain used when a cross-section is
# constant (always at t=0, and at every step on zero-noise grids).
_DEGENERATE_HALF_WIDTH = 1e-6


@dataclass(frozen=True)
class LearnerConfig:
    """Settings of the backward Q-iteration.

    `gamma` is derived per grid as exp(-r*dt).  `drift_term` toggles the
    1/(2*gamma*lambda) * dS channel of the action regression; it is off by
    default because at small lambda its in-sample noise gain corrupts the
    probability estimate (see ``optimal_action_coeffs``).
    """

    r: float = 0.0
    lam: float = 1e-3
    dropout_p: float = 1.0
    ridge: float = 1e-8
    m_basis: int = basis_mod.DEFAULT_M
    degree: int = basis_mod.DEFAULT_DEGREE
    seed: int = 0
    drift_term: bool = False

    def __post_init__(self) -> None:
        if self.r < 0:
            raise ConfigError("r must be >= 0 (per-step discount must lie in (0, 1])")
        if self.lam <= 0:
            raise ConfigError("lam must be > 0")
        if not 0.0 < self.dropout_p <= 1.0:
            raise ConfigError("dropout_p must lie in (0, 1]")
        if self.ridge < 0:
            raise ConfigError("ridge must be >= 0")

    def gamma(self, dt: float) -> float:
        return math.exp(-self.r * dt)


@dataclass(frozen=True)
class FitResult:
    """Everything the backward pass produced, one column per grid time."""

    strike: float
    gamma: float
    phi: np.ndarray        # (n_steps, m) action coefficients
    w: np.ndarray          # (n_steps, 3, m) Q-function weights
    actions: np.ndarray    # (n_paths, n_steps+1), terminal column all zero
    q_values: np.ndarray   # (n_paths, n_steps+1)
    pi_values: np.ndarray  # (n_paths, n_steps+1), terminal column in {0, 1}
    specs: tuple[BasisSpec, ...]
    config: LearnerConfig
    cond_action: np.ndarray = field(repr=False, default=None)
    cond_q: np.ndarray = field(repr=False, default=None)

    @property
    def n_paths(self) -> int:
        return self.q_values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.q_values.shape[1] - 1


@dataclass(frozen=True)
class ProbabilityEstimate:
    """Clipped t=0 event probability plus solve diagnostics."""

    probability: float
    raw_probability: float
    strike: float
    n_paths: int
    lam: float
    dropout_p: float
    m_basis: int
    seed: int
    max_condition: float

    def as_record(self) -> dict:
        return {
            "strike": self.strike,
            "probability": self.probability,
            "raw_probability": self.raw_probability,
            "n_paths": self.n_paths,
            "lambda": self.lam,
            "dropout_p": self.dropout_p,
            "m_basis": self.m_basis,
            "seed": self.seed,
        }


def terminal_payoff(s_terminal: np.ndarray, strike: float) -> np.ndarray:
    """Digital payoff 1_{S_T >= K}; the boundary S_T == K pays 1."""
    if strike <= 0:
        raise ConfigError("strike must be > 0")
    return (np.asarray(s_terminal, dtype=float) >= strike).astype(float)


def terminal_q(pi_terminal: np.ndarray, lam: float) -> np.ndarray:
    """Q_T = -payoff - lam * Var[payoff] (population variance, one scalar for all paths)."""
    pi_t = np.asarray(pi_terminal, dtype=float)
    return -pi_t - lam * pi_t.var()


def _solve_ridge(mat: np.ndarray, rhs: np.ndarray, ridge: float, step: int, what: str) -> tuple[np.ndarray, float]:
    reg = mat + ridge * np.eye(mat.shape[0])
    cond = float(np.linalg.cond(reg))
    try:
        sol = np.linalg.solve(reg, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverFailure(f"{what} solve failed at step {step} (cond~{cond:.3g})", step=step, condition=cond) from exc
    if not np.all(np.isfinite(sol)):
        raise SolverFailure(f"{what} solve produced non-finite values at step {step} (cond~{cond:.3g})", step=step, condition=cond)
    return sol, cond


def optimal_action_coeffs(
    t: int,
    phi_matrix: np.ndarray,
    delta_s_col: np.ndarray,
    pi_next: np.ndarray,
    config: LearnerConfig,
    gamma: float,
) -> tuple[np.ndarray, float]:
    """Coefficients of the variance-minimizing action on the basis at step t.

    Solves (A + ridge*I) phi = B with
        A_nm = sum_k Phi_n(x_k) Phi_m(x_k) dS_hat_k^2
        B_n  = sum_k Phi_n(x_k) [pi_hat_k * dS_hat_k  (+ dS_k/(2*gamma*lam))]
    where hats are cross-sectional demeanings.  The optional dS/(2*gamma*lam)
    channel rewards positions aligned with the realized drift; in-sample it
    also converts pure sampling noise into apparent reward (a chi-square gain
    of order m/(4*lam*N) per step), which at small lam overwhelms the actual
    signal, so it is enabled only when config.drift_term is set.
    """
    ds = np.asarray(delta_s_col, dtype=float)
    ds_hat = ds - ds.mean()
    pi_hat = np.asarray(pi_next, dtype=float) - np.mean(pi_next)
    a_mat = phi_matrix.T @ (phi_matrix * (ds_hat**2)[:, None])
    target = pi_hat * ds_hat
    if config.drift_term:
        target = target + ds / (2.0 * gamma * config.lam)
    b_vec = phi_matrix.T @ target
    return _solve_ridge(a_mat, b_vec, config.ridge, t, "action")


def optimal_action(phi_t: np.ndarray, phi_matrix: np.ndarray) -> np.ndarray:
    """Per-path action a(x_k) = sum_n phi_n Phi_n(x_k)."""
    return phi_matrix @ np.asarray(phi_t, dtype=float)


def pi_backward(pi_next: np.ndarray, a_t: np.ndarray, delta_s_col: np.ndarray, gamma: float) -> np.ndarray:
    """One backward portfolio step: pi_t = gamma * (pi_{t+1} - a_t * dS_t)."""
    return gamma * (np.asarray(pi_next, dtype=float) - np.asarray(a_t) * np.asarray(delta_s_col))


def reward(pi_next: np.ndarray, a_t: np.ndarray, delta_s_col: np.ndarray, config: LearnerConfig, gamma: float) -> np.ndarray:
    """One-step reward gamma*a*dS - lam*gamma^2*(pi_hat - a*dS_hat)^2, kept per path."""
    ds = np.asarray(delta_s_col, dtype=float)
    a = np.asarray(a_t, dtype=float)
    ds_hat = ds - ds.mean()
    pi_hat = np.asarray(pi_next, dtype=float) - np.mean(pi_next)
    return gamma * a * ds - config.lam * gamma**2 * (pi_hat - a * ds_hat) ** 2


def _action_features(a_t: np.ndarray) -> np.ndarray:
    """Monomials (1, a, a^2/2) of the action, shape (n, 3)."""
    a = np.asarray(a_t, dtype=float)
    return np.stack([np.ones_like(a), a, 0.5 * a**2], axis=1)


def _q_features(phi_matrix: np.ndarray, a_t: np.ndarray) -> np.ndarray:
    """Feature matrix Psi with rows vec(outer((1, a, a^2/2), Phi(x))), shape (n, 3m)."""
    feats = _action_features(a_t)
    n = phi_matrix.shape[0]
    return (feats[:, :, None] * phi_matrix[:, None, :]).reshape(n, -1)


def fqi_weights(
    t: int,
    phi_matrix: np.ndarray,
    actions_col: np.ndarray,
    rewards: np.ndarray,
    q_next_opt: np.ndarray,
    config: LearnerConfig,
    gamma: float,
    keep_mask: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Q-function weights at step t from targets R_t + gamma * Q*_{t+1}.

    Solves (S + ridge*I) vec(W) = M with S the feature Gram matrix and
    M_n = sum_k Psi_n(x_k, a_k) * eta_k * y_k, where eta is the Bernoulli
    keep mask (all ones when dropout is off).  Returns W as 3 x m.
    """
    psi = _q_features(phi_matrix, actions_col)
    y = np.asarray(rewards, dtype=float) + gamma * np.asarray(q_next_opt, dtype=float)
    if keep_mask is not None:
        y = y * keep_mask
    s_mat = psi.T @ psi
    m_vec = psi.T @ y
    sol, cond = _solve_ridge(s_mat, m_vec, config.ridge, t, "q-weights")
    return sol.reshape(3, -1), cond


def q_value(w_t: np.ndarray, phi_matrix: np.ndarray, actions_col: np.ndarray) -> np.ndarray:
    """Per-path Q(x_k, a_k) = (1, a_k, a_k^2/2) . W . Phi(x_k)."""
    return np.einsum("ni,ij,nj->n", _action_features(actions_col), np.asarray(w_t, dtype=float), phi_matrix)


def _spec_for_column(x_col: np.ndarray, m: int, degree: int) -> BasisSpec:
    lo, hi = float(x_col.min()), float(x_col.max())
    if hi == lo:
        # Constant cross-section (t=0 always; every step when sigma=0): give
        # the basis a tiny synthetic domain so the ridge solve recovers the
        # scalar regression.
        return basis_mod.spec_from_domain(lo - _DEGENERATE_HALF_WIDTH, hi + _DEGENERATE_HALF_WIDTH, m=m, degree=degree)
    return basis_mod.build_spec(x_col, m=m, degree=degree)


def _dropout_masks(config: LearnerConfig, n_steps: int, n_paths: int) -> np.ndarray | None:
    """Bernoulli keep masks, one row per backward step; None when dropout is off."""
    if config.dropout_p >= 1.0:
        return None
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(0xD0,)))
    u = rng.random((n_steps, n_paths))
    return (u < config.dropout_p).astype(float)


def fit(grid: PathGrid, params: VasicekParams, strike: float, config: LearnerConfig) -> FitResult:
    """Full backward pass over the grid; deterministic given (grid, config.seed)."""
    n_paths, n_cols = grid.values.shape
    n_steps = n_cols - 1
    gamma = config.gamma(grid.dt)
    x = to_state(grid, params).values
    ds = delta_s(grid, config.r)

    pi = np.empty((n_paths, n_cols))
    actions = np.zeros((n_paths, n_cols))
    q = np.empty((n_paths, n_cols))
    pi[:, n_steps] = terminal_payoff(grid.terminal(), strike)
    q[:, n_steps] = terminal_q(pi[:, n_steps], config.lam)

    phi_all = np.empty((n_steps, config.m_basis))
    w_all = np.empty((n_steps, 3, config.m_basis))
    cond_a = np.empty(n_steps)
    cond_q = np.empty(n_steps)
    specs: list[BasisSpec] = []
    masks = _dropout_masks(config, n_steps, n_paths)

    for t in range(n_steps - 1, -1, -1):
        spec = _spec_for_column(x[:, t], config.m_basis, config.degree)
        phi_matrix = basis_mod.evaluate_matrix(spec, x[:, t])
        phi_t, ca = optimal_action_coeffs(t, phi_matrix, ds[:, t], pi[:, t + 1], config, gamma)
        a_t = optimal_action(phi_t, phi_matrix)
        pi[:, t] = pi_backward(pi[:, t + 1], a_t, ds[:, t], gamma)
        r_t = reward(pi[:, t + 1], a_t, ds[:, t], config, gamma)
        mask = masks[t] if masks is not None else None
        w_t, cq = fqi_weights(t, phi_matrix, a_t, r_t, q[:, t + 1], config, gamma, keep_mask=mask)
        q[:, t] = q_value(w_t, phi_matrix, a_t)

        actions[:, t] = a_t
        phi_all[t] = phi_t
        w_all[t] = w_t
        cond_a[t] = ca
        cond_q[t] = cq
        specs.append(spec)

    specs.reverse()
    return FitResult(
        strike=strike,
        gamma=gamma,
        phi=phi_all,
        w=w_all,
        actions=actions,
        q_values=q,
        pi_values=pi,
        specs=tuple(specs),
        config=config,
        cond_action=cond_a,
        cond_q=cond_q,
    )


def event_probability(result: FitResult) -> ProbabilityEstimate:
    """Negated mean of the fitted t=0 Q-values, clipped to [0, 1]."""
    raw = float(-result.q_values[:, 0].mean())
    max_cond = float(max(result.cond_action.max(), result.cond_q.max())) if result.n_steps else 0.0
    return ProbabilityEstimate(
        probability=float(min(1.0, max(0.0, raw))),
        raw_probability=raw,
        strike=result.strike,
        n_paths=result.n_paths,
        lam=result.config.lam,
        dropout_p=result.config.dropout_p,
        m_basis=result.config.m_basis,
        seed=result.config.seed,
        max_condition=max_cond,
    )


def write_fit_csvs(result: FitResult, phi_path: str | Path, w_path: str | Path) -> None:
    """Dump per-step action coefficients (wide) and Q-weights (long, t/row/col)."""
    m = result.phi.shape[1]
    phi_lines = ["t," + ",".join(f"phi_{n}" for n in range(m))]
    for t in range(result.n_steps):
        phi_lines.append(f"{t}," + ",".join(f"{v:.17g}" for v in result.phi[t]))
    Path(phi_path).write_text("\n".join(phi_lines) + "\n", encoding="utf-8")

    w_lines = ["t,row,col,w_value"]
    for t in range(result.n_steps):
        for i in range(3):
            for n in range(m):
                w_lines.append(f"{t},{i},{n},{result.w[t, i, n]:.17g}")
    Path(w_path).write_text("\n".join(w_lines) + "\n", encoding="utf-8")
