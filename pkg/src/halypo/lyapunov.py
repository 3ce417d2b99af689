"""Rationality gap, its gradient (the stability normal) and smoothness
estimates for the gap potential."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DifferentiableGame, as_vector, eval_independent_field, eval_team_field, fd_gradient_batched
from .errors import UnsupportedOperationError

EMPIRICAL_SAFETY = 1.5
L_FLOOR = 1e-12


@dataclass(frozen=True)
class SmoothnessEstimate:
    L: float
    method: str  # "exact-quadratic" or "empirical-sup"
    sample_count: int = 0
    degenerate: bool = False


def rationality_gap(u_ind, u_team) -> float:
    u_ind = np.asarray(u_ind, dtype=float)
    u_team = np.asarray(u_team, dtype=float)
    if u_ind.shape != u_team.shape:
        raise ValueError(f"field shapes differ: {u_ind.shape} vs {u_team.shape}")
    e = u_ind - u_team
    return 0.5 * float(e @ e)


def gap_at(game: DifferentiableGame, theta) -> float:
    return rationality_gap(eval_independent_field(game, theta), eval_team_field(game, theta))


def stability_normal_analytic(game: DifferentiableGame, theta) -> np.ndarray:
    """h = (H_ind - H_team)' (u_ind - u_team) from closed-form Jacobians."""
    if not game.has_analytic_jacobians:
        raise UnsupportedOperationError(f"{type(game).__name__} has no analytic Jacobians; use the fd mode")
    x = as_vector(theta, game.layout)
    e = eval_independent_field(game, x) - eval_team_field(game, x)
    H = game.independent_jacobian(x) - game.team_jacobian(x)
    return H.T @ e


def stability_normal_fd(game: DifferentiableGame, theta, step: float | None = None) -> np.ndarray:
    """Central-difference gradient of the gap; 2D field evaluations."""
    x = as_vector(theta, game.layout)
    return fd_gradient_batched(game.gap_many, x, step)


def stability_normal(game: DifferentiableGame, theta, mode: str = "analytic", step: float | None = None) -> np.ndarray:
    if mode == "analytic":
        return stability_normal_analytic(game, theta)
    if mode == "fd":
        return stability_normal_fd(game, theta, step)
    raise ValueError(f"unknown h mode {mode!r}")


def smoothness_estimate(game: DifferentiableGame, theta_samples=None, h_mode: str | None = None) -> SmoothnessEstimate:
    """Lipschitz constant of the stability normal.

    Games that know their constant (quadratics: top eigenvalue of
    (M - Q)'(M - Q)) report it directly. Otherwise the constant is 1.5x the
    largest difference quotient over all sample pairs, since a finite
    sample underestimates the supremum.
    """
    if game.has_exact_smoothness and theta_samples is None:
        return SmoothnessEstimate(game.smoothness_constant(), "exact-quadratic")
    if theta_samples is None or len(theta_samples) < 2:
        raise ValueError("empirical smoothness estimate needs at least two samples")
    if h_mode is None:
        h_mode = "analytic" if game.has_analytic_jacobians else "fd"
    pts = [as_vector(t, game.layout) for t in theta_samples]
    hs = [stability_normal(game, t, h_mode) for t in pts]
    best = 0.0
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            dist = np.linalg.norm(pts[a] - pts[b])
            if dist > 0:
                best = max(best, float(np.linalg.norm(hs[a] - hs[b]) / dist))
    L = EMPIRICAL_SAFETY * best
    if L < L_FLOOR:
        return SmoothnessEstimate(L_FLOOR, "empirical-sup", len(pts), degenerate=True)
    return SmoothnessEstimate(L, "empirical-sup", len(pts))
