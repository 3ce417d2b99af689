"""Closed-form projection of the independent field onto the stability
half-space {d : <h, d> <= -sigma V}, with an independent oracle and KKT
residuals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleConstraintError


@dataclass(frozen=True)
class ProjectionResult:
    d_star: np.ndarray
    lambda_star: float
    regime: str  # "inactive" or "active"
    constraint_residual: float  # <h, d*> + sigma V


def halypo_project(u_ind, h, V: float, sigma: float = 1.0, eps: float = 1e-8) -> ProjectionResult:
    """Minimum-norm correction of ``u_ind`` satisfying <h, d> <= -sigma V.

    lambda* = max(0, (<h, u_ind> + sigma V) / (|h|^2 + eps)) and
    d* = u_ind - lambda* h. With ``eps > 0`` the active constraint is met
    only up to ``eps * lambda*``; the residual is reported, not enforced.
    """
    u_ind = np.asarray(u_ind, dtype=float)
    h = np.asarray(h, dtype=float)
    if u_ind.shape != h.shape:
        raise ValueError(f"shape mismatch: u_ind {u_ind.shape} vs h {h.shape}")
    if V < 0:
        raise ValueError(f"gap must be nonnegative, got {V}")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if eps < 0:
        raise ValueError("eps must be nonnegative")

    numerator = float(h @ u_ind) + sigma * V
    if numerator <= 0:
        return ProjectionResult(u_ind.copy(), 0.0, "inactive", numerator)
    denom = float(h @ h) + eps
    if denom == 0.0:
        raise InfeasibleConstraintError(
            f"zero stability normal with positive offset {numerator:.3e}: the half-space is empty"
        )
    lam = numerator / denom
    d = u_ind - lam * h
    return ProjectionResult(d, lam, "active", float(h @ d) + sigma * V)


def halfspace_oracle(u, h, c: float, audit: int = 200, rng: np.random.Generator | None = None, slack: float = 1e-9) -> np.ndarray:
    """Euclidean projection of ``u`` onto {d : <h, d> <= c}.

    Written from the generic half-space formula, independently of
    ``halypo_project``. When ``audit`` > 0, random feasible points around the
    result are checked to be no closer to ``u``; a failed audit raises
    AssertionError.
    """
    u = np.asarray(u, dtype=float)
    h = np.asarray(h, dtype=float)
    excess = float(np.dot(h, u)) - c
    if excess <= 0:
        result = u.copy()
    else:
        hh = float(np.dot(h, h))
        if hh == 0.0:
            raise InfeasibleConstraintError("zero normal and infeasible point: empty half-space")
        result = u - (excess / hh) * h

    if audit:
        rng = np.random.default_rng(0) if rng is None else rng
        hh = float(np.dot(h, h))
        base = float(np.linalg.norm(result - u))
        scale = max(1.0, base)
        for _ in range(audit):
            cand = result + scale * rng.standard_normal(u.shape)
            over = float(np.dot(h, cand)) - c
            if over > 0 and hh > 0:
                cand = cand - (over / hh) * h
            if float(np.linalg.norm(cand - u)) < base - slack:
                raise AssertionError("half-space oracle audit found a closer feasible point")
    return result


def kkt_residuals(u_ind, h, V: float, sigma: float, eps: float, result: ProjectionResult) -> tuple[float, float, float]:
    """(stationarity, primal feasibility, complementary slackness).

    For eps > 0 the feasibility entry is the raw constraint value, which
    equals eps * lambda* in the active regime.
    """
    u_ind = np.asarray(u_ind, dtype=float)
    h = np.asarray(h, dtype=float)
    d, lam = result.d_star, result.lambda_star
    g = float(h @ d) + sigma * V
    stationarity = float(np.linalg.norm(d - u_ind + lam * h))
    feasibility = max(0.0, g) if eps == 0 else g
    slackness = abs(lam * g)
    return stationarity, feasibility, slackness
