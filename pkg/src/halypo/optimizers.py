"""Update rules: the Lyapunov-projected step, its ablations, and the
baselines, plus step-size schedules and the trajectory loop.

Mini-batch sampling is replaced by exact field evaluation; every run is a
deterministic function of the game, the initial point and the config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .core import DifferentiableGame, as_vector
from .errors import ConfigError, EvaluationError, HalypoError
from .games import CriticSnapshot, refresh_snapshot
from .lyapunov import SmoothnessEstimate, rationality_gap, smoothness_estimate, stability_normal
from .metrics import alignment, block_conflict
from .projection import halypo_project

HALYPO_VARIANTS = ("halypo", "halypo_no_align", "halypo_static")
BASELINE_VARIANTS = ("naive", "team", "soft_penalty", "pcgrad")
VARIANTS = HALYPO_VARIANTS + BASELINE_VARIANTS
SCHEDULES = ("constant", "adaptive", "robbins_monro")


@dataclass(frozen=True)
class Schedule:
    kind: str = "constant"
    eta: float = 0.1
    safety: float = 0.5
    eta0: float = 0.5
    p: float = 1.0
    eta_min: float = 1e-6
    eta_max: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEDULES:
            raise ConfigError(f"unknown schedule {self.kind!r}", "schedule.kind")
        if self.kind == "constant" and not self.eta > 0:
            raise ConfigError("constant step must be positive", "schedule.eta")
        if self.kind == "adaptive" and not 0 < self.safety <= 1:
            raise ConfigError("safety factor must lie in (0, 1]", "schedule.safety")
        if self.kind == "robbins_monro":
            if not self.eta0 > 0:
                raise ConfigError("eta0 must be positive", "schedule.eta0")
            if not 0.5 < self.p <= 1:
                raise ConfigError("p must lie in (0.5, 1] for the Robbins-Monro conditions", "schedule.p")
        if not 0 < self.eta_min <= self.eta_max:
            raise ConfigError("need 0 < eta_min <= eta_max", "schedule.eta_min")


@dataclass(frozen=True)
class OptimizerConfig:
    variant: str = "halypo"
    sigma: float = 1.0
    eps: float = 1e-8
    rho: float = 0.1
    schedule: Schedule = field(default_factory=Schedule)
    h_mode: str = "auto"  # analytic | fd | auto
    snapshot_period: int = 10
    fd_step: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}", "optimizer.variant")
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive", "optimizer.sigma")
        if self.eps < 0:
            raise ConfigError("eps must be nonnegative", "optimizer.eps")
        if self.rho < 0:
            raise ConfigError("rho must be nonnegative", "optimizer.rho")
        if self.h_mode not in ("analytic", "fd", "auto"):
            raise ConfigError(f"unknown h mode {self.h_mode!r}", "optimizer.h_mode")
        if self.snapshot_period < 1:
            raise ConfigError("snapshot period must be >= 1", "optimizer.snapshot_period")


@dataclass
class StepRecord:
    k: int
    eta: float
    lambda_star: float
    d_norm: float
    V: float
    cos_phi: float | None
    conflict: bool
    J_team: float
    regime: str


@dataclass
class OptimizerState:
    snapshot: CriticSnapshot | None = None
    smoothness: SmoothnessEstimate | None = None
    field_evals: int = 0


@dataclass
class TrajectoryLog:
    records: list[StepRecord]
    final_theta: np.ndarray
    final_V: float | None
    sup_d_norm: float = 0.0
    smoothness: SmoothnessEstimate | None = None
    field_evals: int = 0
    error: str | None = None
    fingerprint: str | None = None
    summary: object = None


# ---------------------------------------------------------------------------
# step sizes


def eta_adaptive(sigma, V, L, d_norm_sq, safety=0.5, eta_min=1e-6, eta_max=1.0) -> float:
    """Largest step allowed by the descent bound, scaled by ``safety`` and clamped."""
    if L <= 0:
        raise ValueError("smoothness constant must be positive")
    if d_norm_sq <= 0:
        return eta_max
    eta = safety * 2.0 * sigma * V / (L * d_norm_sq)
    return min(eta_max, max(eta_min, eta))


def eta_schedule_rm(k: int, eta0: float, p: float) -> float:
    return eta0 / (k + 1) ** p


def _step_size(config: OptimizerConfig, state: OptimizerState, k: int, V: float, d_norm_sq: float) -> float:
    s = config.schedule
    if config.variant == "halypo_static" or s.kind == "constant":
        return s.eta
    if s.kind == "robbins_monro":
        return eta_schedule_rm(k, s.eta0, s.p)
    return eta_adaptive(config.sigma, V, state.smoothness.L, d_norm_sq, s.safety, s.eta_min, s.eta_max)


# ---------------------------------------------------------------------------
# direction modifiers


def align_rectify(d, u_team) -> np.ndarray:
    """Remove the component of ``d`` opposing ``u_team``, if any."""
    d = np.asarray(d, dtype=float)
    u_team = np.asarray(u_team, dtype=float)
    tt = float(u_team @ u_team)
    dt = float(d @ u_team)
    if tt == 0.0 or dt >= 0:
        return d.copy()
    return d - (dt / tt) * u_team


def pcgrad_surgery(u_ind, u_team, layout) -> np.ndarray:
    """Per-agent gradient surgery of each independent block against its team block."""
    out = np.array(u_ind, dtype=float)
    for i in range(layout.n_agents):
        b = layout.block(i)
        ut = u_team[b]
        tt = float(ut @ ut)
        if tt == 0.0:
            continue
        dot = float(out[b] @ ut)
        if dot < 0:
            out[b] = out[b] - (dot / tt) * ut
    return out


# ---------------------------------------------------------------------------
# steps


def _resolve_h_mode(game: DifferentiableGame, config: OptimizerConfig) -> str:
    if config.h_mode != "auto":
        return config.h_mode
    return "analytic" if game.has_analytic_jacobians else "fd"


def _current_view(game: DifferentiableGame, theta, config: OptimizerConfig, k: int, state: OptimizerState):
    if not game.needs_critic:
        return game
    if state.snapshot is None or k % config.snapshot_period == 0:
        state.snapshot = refresh_snapshot(game, theta, k, config.snapshot_period)
    return game.with_snapshot(state.snapshot)


def _normal(view, theta, V, config, state):
    if V == 0.0:
        # V >= 0 everywhere, so a zero gap is a minimum and its gradient vanishes
        return np.zeros(view.dim)
    mode = _resolve_h_mode(view, config)
    if mode == "fd":
        state.field_evals += 4 * view.dim
    return stability_normal(view, theta, mode, config.fd_step)


def _fields(view, theta, state):
    u_ind = np.asarray(view.independent_field(theta), dtype=float)
    u_team = np.asarray(view.team_field(theta), dtype=float)
    state.field_evals += 2
    if not (np.all(np.isfinite(u_ind)) and np.all(np.isfinite(u_team))):
        raise EvaluationError(f"non-finite field at theta={theta.tolist()}", theta=theta.copy())
    return u_ind, u_team


def _record(k, eta, lam, d, V, u_ind, u_team, view, theta, regime) -> StepRecord:
    return StepRecord(
        k=k,
        eta=float(eta),
        lambda_star=float(lam),
        d_norm=float(np.linalg.norm(d)),
        V=float(V),
        cos_phi=alignment(u_ind, u_team),
        conflict=block_conflict(u_ind, u_team, view.layout),
        J_team=float(view.team_payoff(theta)),
        regime=regime,
    )


def step_halypo(game, theta, config: OptimizerConfig, k: int, state: OptimizerState):
    """One projected update.

    The full variant first removes the part of the independent field that
    opposes the team field, then projects onto the stability half-space, so
    the certified projection is always the last operation on the direction.
    """
    if config.variant not in HALYPO_VARIANTS:
        raise ValueError(f"step_halypo cannot run variant {config.variant!r}")
    theta = as_vector(theta, game.layout)
    view = _current_view(game, theta, config, k, state)
    u_ind, u_team = _fields(view, theta, state)
    V = rationality_gap(u_ind, u_team)
    h = _normal(view, theta, V, config, state)
    u = align_rectify(u_ind, u_team) if config.variant == "halypo" else u_ind
    proj = halypo_project(u, h, V, config.sigma, config.eps)
    d = proj.d_star
    d_sq = float(d @ d)
    eta = _step_size(config, state, k, V, d_sq)
    rec = _record(k, eta, proj.lambda_star, d, V, u_ind, u_team, view, theta, proj.regime)
    return theta + eta * d, rec


def step_baseline(game, theta, config: OptimizerConfig, k: int, state: OptimizerState | None = None):
    if config.variant not in BASELINE_VARIANTS:
        raise ValueError(f"step_baseline cannot run variant {config.variant!r}")
    state = OptimizerState() if state is None else state
    theta = as_vector(theta, game.layout)
    view = _current_view(game, theta, config, k, state)
    u_ind, u_team = _fields(view, theta, state)
    V = rationality_gap(u_ind, u_team)
    lam = 0.0
    if config.variant == "naive":
        d = u_ind
    elif config.variant == "team":
        d = u_team
    elif config.variant == "soft_penalty":
        lam = config.rho
        d = u_ind - config.rho * _normal(view, theta, V, config, state) if config.rho > 0 else u_ind
    else:
        d = pcgrad_surgery(u_ind, u_team, view.layout)
    d_sq = float(d @ d)
    eta = _step_size(config, state, k, V, d_sq)
    regime = "active" if lam > 0 else "inactive"
    rec = _record(k, eta, lam, d, V, u_ind, u_team, view, theta, regime)
    return theta + eta * d, rec


def step(game, theta, config: OptimizerConfig, k: int, state: OptimizerState):
    if config.variant in HALYPO_VARIANTS:
        return step_halypo(game, theta, config, k, state)
    return step_baseline(game, theta, config, k, state)


# ---------------------------------------------------------------------------
# trajectories


def initial_state(game, theta0, config: OptimizerConfig, n_samples: int = 8, radius: float = 0.5) -> OptimizerState:
    """Prepare critic snapshot and, for the adaptive schedule, the smoothness constant.

    Games without a known constant get an empirical estimate from points
    scattered around ``theta0`` (seeded by ``config.seed``), measured on the
    gap potential defined by the initial critic snapshot.
    """
    theta0 = as_vector(theta0, game.layout)
    state = OptimizerState()
    view = _current_view(game, theta0, config, 0, state)
    if config.schedule.kind == "adaptive" and config.variant != "halypo_static":
        if view.has_exact_smoothness:
            state.smoothness = smoothness_estimate(view)
        else:
            rng = np.random.default_rng(config.seed)
            pts = [theta0] + [theta0 + radius * rng.standard_normal(theta0.size) for _ in range(n_samples - 1)]
            state.smoothness = smoothness_estimate(view, pts, _resolve_h_mode(view, config))
    elif view.has_exact_smoothness:
        state.smoothness = smoothness_estimate(view)
    return state


def run_trajectory(
    game,
    theta0,
    config: OptimizerConfig,
    n_steps: int,
    stop: Callable[[list[StepRecord]], bool] | None = None,
) -> TrajectoryLog:
    """Apply ``n_steps`` updates, logging one StepRecord per step.

    A failing step ends the run; the records gathered so far are kept and
    the error message is stored on the log. ``stop`` may end the run early.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    theta = np.array(as_vector(theta0, game.layout), dtype=float)
    state = initial_state(game, theta, config)
    records: list[StepRecord] = []
    error = None
    sup_d = 0.0
    for k in range(n_steps):
        try:
            theta, rec = step(game, theta, config, k, state)
        except HalypoError as exc:
            error = f"step {k}: {exc}"
            break
        records.append(rec)
        sup_d = max(sup_d, rec.d_norm)
        if stop is not None and stop(records):
            break

    final_V = None
    if error is None:
        try:
            view = _current_view(game, theta, config, len(records), state)
            final_V = rationality_gap(view.independent_field(theta), view.team_field(theta))
        except HalypoError:
            final_V = None
    return TrajectoryLog(
        records=records,
        final_theta=theta,
        final_V=final_V,
        sup_d_norm=sup_d,
        smoothness=state.smoothness,
        field_evals=state.field_evals,
        error=error,
    )


def with_schedule(config: OptimizerConfig, **kwargs) -> OptimizerConfig:
    return replace(config, schedule=replace(config.schedule, **kwargs))


def robbins_monro_sums(eta0: float, p: float, n: int) -> tuple[float, float]:
    """(sum eta_k, sum eta_k^2) over k < n, summed exactly with fsum."""
    etas = [eta_schedule_rm(k, eta0, p) for k in range(n)]
    return math.fsum(etas), math.fsum(e * e for e in etas)
