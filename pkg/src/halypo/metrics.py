"""Mechanism diagnostics: gradient alignment, gradient conflict rate,
gap decay rate, and the per-step descent certificate."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .core import AgentLayout

NORM_FLOOR = 1e-12
V_FLOOR = 1e-300


@dataclass(frozen=True)
class MechanismSummary:
    steady_state_V: float
    mean_alignment: float | None
    gcr: float | None
    gap_decay_rate: float | None
    convergence_step: int | None
    window: int

    def to_dict(self) -> dict:
        return asdict(self)


def alignment(u_ind, u_team) -> float | None:
    """Cosine between the two fields; None when either is (numerically) zero."""
    u_ind = np.asarray(u_ind, dtype=float)
    u_team = np.asarray(u_team, dtype=float)
    if u_ind.shape != u_team.shape:
        raise ValueError("alignment needs vectors of equal length")
    nu, nt = float(np.linalg.norm(u_ind)), float(np.linalg.norm(u_team))
    if nu < NORM_FLOOR or nt < NORM_FLOOR:
        return None
    return float(np.clip(u_ind @ u_team / (nu * nt), -1.0, 1.0))


def block_conflict(u_ind, u_team, layout: AgentLayout) -> bool:
    """True when some agent's independent block points against its team block."""
    for i in range(layout.n_agents):
        b = layout.block(i)
        ui, ut = u_ind[b], u_team[b]
        if np.linalg.norm(ui) >= NORM_FLOOR and np.linalg.norm(ut) >= NORM_FLOOR and float(ui @ ut) < 0:
            return True
    return False


def final_window(n: int, fraction: float = 0.1, minimum: int = 10) -> int:
    return min(n, max(minimum, int(math.ceil(fraction * n))))


def conflict_rate(records: Sequence, window: int | None = None) -> float:
    """Fraction of the last ``window`` steps flagged as conflicting."""
    records = list(records)
    if window is None:
        window = len(records)
    if window <= 0 or not records:
        raise ValueError("conflict rate needs a non-empty window")
    if window > len(records):
        raise ValueError(f"window {window} exceeds trajectory length {len(records)}")
    tail = records[-window:]
    return sum(1 for r in tail if r.conflict) / len(tail)


def descent_certificate_check(V_k, V_next, eta, sigma, L, d_norm_sq, tol: float = 1e-9) -> tuple[bool, float]:
    """Slack in V_next - V_k <= -eta sigma V_k + (L eta^2 / 2) |d|^2."""
    budget = -eta * sigma * V_k + 0.5 * L * eta * eta * d_norm_sq
    slack = budget - (V_next - V_k)
    return slack >= -tol * (1.0 + abs(V_k)), slack


def decay_rate(V_series: Sequence[float], window: int | None = None) -> tuple[float, int]:
    """Mean of log(V_{k+1} / V_k) over the window.

    Returns (rate, excluded) where ``excluded`` counts ratios dropped because
    an endpoint was at or below 1e-300.
    """
    V = [float(v) for v in V_series]
    if window is not None:
        V = V[-window:]
    if len(V) < 2:
        raise ValueError("decay rate needs at least two points")
    logs, excluded = [], 0
    for a, b in zip(V[:-1], V[1:]):
        if a <= V_FLOOR or b <= V_FLOOR:
            excluded += 1
            continue
        logs.append(math.log(b) - math.log(a))
    if not logs:
        raise ValueError("no usable points: every ratio touches a zero gap")
    return math.fsum(logs) / len(logs), excluded


def summarize(log, V_conv: float = 1e-6, window: int | None = None) -> MechanismSummary:
    records = log.records
    if not records:
        raise ValueError("cannot summarise an empty trajectory")
    n = len(records)
    w = final_window(n) if window is None else min(window, n)
    tail = records[-w:]

    steady_V = math.fsum(r.V for r in tail) / w
    cos = [r.cos_phi for r in tail if r.cos_phi is not None]
    mean_align = math.fsum(cos) / len(cos) if cos else None
    defined = [r for r in tail if r.cos_phi is not None]
    gcr = sum(1 for r in defined if r.conflict) / len(defined) if defined else None

    series = [r.V for r in records]
    if getattr(log, "final_V", None) is not None:
        series.append(log.final_V)
    try:
        rate, _ = decay_rate(series)
    except ValueError:
        rate = None

    conv = next((r.k for r in records if r.V < V_conv), None)
    if conv is None and getattr(log, "final_V", None) is not None and log.final_V < V_conv:
        conv = records[-1].k + 1
    return MechanismSummary(steady_V, mean_align, gcr, rate, conv, w)
