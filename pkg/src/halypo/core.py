"""Joint-parameter layout, the differentiable-game interface and
finite-difference oracles.

A game over ``N`` agents exposes two vector fields on the joint
parameter vector ``theta`` (length ``D``):

* the independent field, whose block ``i`` is agent ``i``'s gradient of
  its own payoff with the partners held fixed, and
* the team field, the full gradient of the shared team payoff.

Everything downstream (the gap potential, the stability normal, the
projection) is built from these two fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EvaluationError, OracleError


@dataclass(frozen=True)
class AgentLayout:
    """Contiguous per-agent blocks of the joint parameter vector."""

    block_dims: tuple[int, ...]
    offsets: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.block_dims)
        if not dims:
            raise ValueError("layout needs at least one agent")
        if any(d <= 0 for d in dims):
            raise ValueError(f"block dims must be positive, got {dims}")
        object.__setattr__(self, "block_dims", dims)
        object.__setattr__(self, "offsets", tuple(int(o) for o in np.concatenate([[0], np.cumsum(dims)])))

    @classmethod
    def uniform(cls, n_agents: int, dim: int) -> "AgentLayout":
        return cls((dim,) * n_agents)

    @property
    def n_agents(self) -> int:
        return len(self.block_dims)

    @property
    def total_dim(self) -> int:
        return self.offsets[-1]

    def block(self, i: int) -> slice:
        return slice(self.offsets[i], self.offsets[i + 1])

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        """Per-agent views of a flat vector."""
        return [x[self.block(i)] for i in range(self.n_agents)]


@dataclass(frozen=True)
class JointParams:
    values: np.ndarray
    layout: AgentLayout

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.layout.total_dim,):
            raise ValueError(f"expected {self.layout.total_dim} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("joint parameters must be finite")
        object.__setattr__(self, "values", values)

    def agent(self, i: int) -> np.ndarray:
        return self.values[self.layout.block(i)]


@dataclass(frozen=True)
class FieldSample:
    """One evaluation of both fields at a point, with the derived gap."""

    u_ind: np.ndarray
    u_team: np.ndarray
    h: np.ndarray | None = None

    @property
    def e(self) -> np.ndarray:
        return self.u_ind - self.u_team

    @property
    def V(self) -> float:
        e = self.e
        return 0.5 * float(e @ e)


class DifferentiableGame:
    """Interface for an N-agent differentiable game.

    Subclasses implement ``payoff``, ``team_payoff``, ``independent_field``
    and ``team_field``. Games with closed-form Jacobians set
    ``has_analytic_jacobians`` and implement the two ``*_jacobian`` methods;
    games whose gap potential has a known smoothness constant set
    ``has_exact_smoothness`` and implement ``smoothness_constant``.
    """

    has_analytic_jacobians = False
    has_exact_smoothness = False
    needs_critic = False

    def __init__(self, layout: AgentLayout):
        self.layout = layout

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def payoff(self, i: int, theta: np.ndarray) -> float:
        raise NotImplementedError

    def team_payoff(self, theta: np.ndarray) -> float:
        raise NotImplementedError

    def independent_field(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def team_field(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def independent_jacobian(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def team_jacobian(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def smoothness_constant(self) -> float:
        raise NotImplementedError

    def gap_many(self, thetas: np.ndarray) -> np.ndarray:
        """Rationality gap at each row of ``thetas``; games may vectorise this."""
        out = np.empty(len(thetas))
        for r, t in enumerate(thetas):
            e = self.independent_field(t) - self.team_field(t)
            out[r] = 0.5 * float(e @ e)
        return out

    def local_payoff(self, i: int, anchor: np.ndarray) -> Callable[[np.ndarray], float]:
        """Scalar function whose block-``i`` gradient at ``anchor`` is block
        ``i`` of the independent field.

        For games with genuine per-agent payoffs this is just ``payoff(i, .)``.
        Games whose independent field comes from a surrogate (e.g. a frozen
        critic) override this to freeze whatever the surrogate holds fixed.
        """
        return lambda theta: self.payoff(i, theta)


def as_vector(theta, layout: AgentLayout | None = None) -> np.ndarray:
    if isinstance(theta, JointParams):
        return theta.values
    x = np.asarray(theta, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"theta must be a flat vector, got shape {x.shape}")
    if layout is not None and x.shape[0] != layout.total_dim:
        raise ValueError(f"theta has length {x.shape[0]}, layout expects {layout.total_dim}")
    return x


def _checked(vec: np.ndarray, theta: np.ndarray, what: str) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if not np.all(np.isfinite(vec)):
        raise EvaluationError(f"non-finite {what} at theta={theta.tolist()}", theta=theta.copy())
    return vec


def eval_independent_field(game: DifferentiableGame, theta) -> np.ndarray:
    x = as_vector(theta, game.layout)
    return _checked(game.independent_field(x), x, "independent field")


def eval_team_field(game: DifferentiableGame, theta) -> np.ndarray:
    x = as_vector(theta, game.layout)
    return _checked(game.team_field(x), x, "team field")


def sample_fields(game: DifferentiableGame, theta) -> FieldSample:
    return FieldSample(eval_independent_field(game, theta), eval_team_field(game, theta))


def default_fd_step(theta: np.ndarray) -> float:
    return max(1e-5, 1e-7 * float(np.max(np.abs(theta), initial=0.0)))


def fd_gradient(fn: Callable[[np.ndarray], float], theta, step: float | None = None) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = as_vector(theta).copy()
    s = default_fd_step(x) if step is None else float(step)
    if s <= 0:
        raise ValueError("finite-difference step must be positive")
    grad = np.zeros_like(x)
    for j in range(x.size):
        orig = x[j]
        x[j] = orig + s
        f_plus = fn(x)
        x[j] = orig - s
        f_minus = fn(x)
        x[j] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise OracleError(f"non-finite value probing coordinate {j}", theta=x.copy())
        grad[j] = (f_plus - f_minus) / (2 * s)
    return grad


def fd_gradient_batched(fn_many: Callable[[np.ndarray], np.ndarray], theta, step: float | None = None) -> np.ndarray:
    """Central differences with every probe point handed to ``fn_many`` at once.

    Row ``2j`` of the probe matrix is theta + s e_j, row ``2j + 1`` is
    theta - s e_j.
    """
    x = as_vector(theta)
    s = default_fd_step(x) if step is None else float(step)
    if s <= 0:
        raise ValueError("finite-difference step must be positive")
    n = x.size
    probes = np.repeat(x[None], 2 * n, axis=0)
    idx = np.arange(n)
    probes[2 * idx, idx] += s
    probes[2 * idx + 1, idx] -= s
    vals = np.asarray(fn_many(probes), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0]) // 2
        raise OracleError(f"non-finite value probing coordinate {bad}", theta=x.copy())
    return (vals[0::2] - vals[1::2]) / (2 * s)


def fd_jacobian(fn: Callable[[np.ndarray], np.ndarray], theta, step: float | None = None) -> np.ndarray:
    """Central-difference Jacobian of a vector field, rows = outputs."""
    x = as_vector(theta).copy()
    s = default_fd_step(x) if step is None else float(step)
    cols = []
    for j in range(x.size):
        orig = x[j]
        x[j] = orig + s
        f_plus = np.asarray(fn(x), dtype=float)
        x[j] = orig - s
        f_minus = np.asarray(fn(x), dtype=float)
        x[j] = orig
        if not (np.all(np.isfinite(f_plus)) and np.all(np.isfinite(f_minus))):
            raise OracleError(f"non-finite field probing coordinate {j}", theta=x.copy())
        cols.append((f_plus - f_minus) / (2 * s))
    return np.stack(cols, axis=1)


def field_decomposition(M) -> tuple[np.ndarray, np.ndarray]:
    """Split a field Jacobian into its symmetric (potential) and
    antisymmetric (rotational) parts."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return 0.5 * (M + M.T), 0.5 * (M - M.T)


def block_inner_products(u: np.ndarray, w: np.ndarray, layout: AgentLayout) -> list[tuple[float, float, float]]:
    """(<u_i, w_i>, |u_i|, |w_i|) for every agent block."""
    out = []
    for i in range(layout.n_agents):
        b = layout.block(i)
        out.append((float(u[b] @ w[b]), float(np.linalg.norm(u[b])), float(np.linalg.norm(w[b]))))
    return out


def random_theta(layout: AgentLayout, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    return scale * rng.standard_normal(layout.total_dim)

