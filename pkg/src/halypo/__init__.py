"""Lyapunov-projected gradient updates for multi-agent differentiable games."""

from .core import AgentLayout, DifferentiableGame, FieldSample, JointParams, fd_gradient, field_decomposition
from .errors import (
    ConfigError,
    EvaluationError,
    HalypoError,
    InfeasibleConstraintError,
    OracleError,
    UnsupportedOperationError,
)
from .games import (
    CriticSnapshot,
    QuadraticGame,
    TabularMarkovGame,
    bundled_games,
    exact_policy_gradient,
    load_fixture,
    make_bilinear_rotation_game,
    make_quadratic_game,
    policy_eval,
    q_example,
    refresh_snapshot,
    stale_critic_field,
)
from .lyapunov import rationality_gap, smoothness_estimate, stability_normal_analytic, stability_normal_fd
from .metrics import alignment, conflict_rate, decay_rate, descent_certificate_check, summarize
from .optimizers import OptimizerConfig, Schedule, StepRecord, TrajectoryLog, run_trajectory, step
from .projection import ProjectionResult, halfspace_oracle, halypo_project, kkt_residuals

__version__ = "0.1.0"
