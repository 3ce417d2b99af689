"""Concrete games with closed-form fields.

Two sources of disagreement between the independent and team fields are
provided:

* quadratic (and bilinear) games, where every agent has its own payoff
  ``f_i(theta) = 1/2 theta' Q_i theta + b_i' theta`` and the team payoff is
  a separate quadratic, and
* tabular cooperative Markov games with softmax policies, where the team
  field is the exact policy gradient and the independent field is computed
  against a critic snapshot that is only refreshed every ``K`` steps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .core import AgentLayout, DifferentiableGame
from .errors import EvaluationError

SYMMETRY_TOL = 1e-12


# ---------------------------------------------------------------------------
# quadratic games


class QuadraticGame(DifferentiableGame):
    """General-sum quadratic game.

    Block-row ``i`` of the field matrix ``M`` is block-row ``i`` of ``Q_i``,
    so ``u_ind = M theta + c`` and ``u_team = Q theta + b``.
    """

    has_analytic_jacobians = True
    has_exact_smoothness = True

    def __init__(self, Q_i, b_i, Q, b, layout: AgentLayout | None = None, name: str = "quadratic"):
        Q = np.asarray(Q, dtype=float)
        D = Q.shape[0]
        n = len(Q_i)
        if layout is None:
            if n == 0 or D % n:
                raise ValueError("cannot infer an agent layout; pass block_dims explicitly")
            layout = AgentLayout.uniform(n, D // n)
        if layout.total_dim != D or layout.n_agents != n:
            raise ValueError(f"layout {layout.block_dims} inconsistent with {n} agents over dimension {D}")
        super().__init__(layout)
        self.name = name
        self.Q_i = [_symmetric(q, D, f"Q_{i + 1}") for i, q in enumerate(Q_i)]
        self.b_i = [_vector(v, D, f"b_{i + 1}") for i, v in enumerate(b_i)]
        if len(self.b_i) != len(self.Q_i):
            raise ValueError("need one b_i per Q_i")
        self.Q = _symmetric(Q, D, "Q")
        self.b = _vector(b, D, "b")

        self.M = np.zeros((D, D))
        self.c = np.zeros(D)
        for i in range(layout.n_agents):
            blk = layout.block(i)
            self.M[blk] = self.Q_i[i][blk]
            self.c[blk] = self.b_i[i][blk]
        self.gap_matrix = self.M - self.Q
        self.gap_offset = self.c - self.b

    def payoff(self, i, theta):
        return 0.5 * float(theta @ self.Q_i[i] @ theta) + float(self.b_i[i] @ theta)

    def team_payoff(self, theta):
        return 0.5 * float(theta @ self.Q @ theta) + float(self.b @ theta)

    def independent_field(self, theta):
        return self.M @ theta + self.c

    def team_field(self, theta):
        return self.Q @ theta + self.b

    def independent_jacobian(self, theta):
        return self.M

    def team_jacobian(self, theta):
        return self.Q

    def gap(self, theta) -> float:
        """Closed-form rationality gap 1/2 |(M - Q) theta + (c - b)|^2."""
        r = self.gap_matrix @ theta + self.gap_offset
        return 0.5 * float(r @ r)

    def gap_gradient(self, theta) -> np.ndarray:
        return self.gap_matrix.T @ (self.gap_matrix @ theta + self.gap_offset)

    def smoothness_constant(self) -> float:
        A = self.gap_matrix
        return float(np.linalg.eigvalsh(A.T @ A)[-1])

    def to_dict(self) -> dict:
        return {
            "kind": "quadratic",
            "name": self.name,
            "block_dims": list(self.layout.block_dims),
            "Q_i": [q.tolist() for q in self.Q_i],
            "b_i": [v.tolist() for v in self.b_i],
            "Q": self.Q.tolist(),
            "b": self.b.tolist(),
        }


class BilinearRotationGame(QuadraticGame):
    """f_1 = xy, f_2 = -xy, J = -(x^2 + y^2)/2.

    The independent field (y, -x) is a pure rotation.
    """

    def __init__(self):
        super().__init__(
            Q_i=[[[0.0, 1.0], [1.0, 0.0]], [[0.0, -1.0], [-1.0, 0.0]]],
            b_i=[[0.0, 0.0], [0.0, 0.0]],
            Q=-np.eye(2),
            b=[0.0, 0.0],
            layout=AgentLayout((1, 1)),
            name="bilinear",
        )

    def to_dict(self):
        return {"kind": "bilinear"}


def _symmetric(mat, D, label):
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (D, D):
        raise ValueError(f"{label} must be {D}x{D}, got {mat.shape}")
    if np.max(np.abs(mat - mat.T), initial=0.0) > SYMMETRY_TOL * max(1.0, np.max(np.abs(mat), initial=0.0)):
        raise ValueError(f"{label} is not symmetric")
    return mat


def _vector(v, D, label):
    v = np.asarray(v, dtype=float)
    if v.shape != (D,):
        raise ValueError(f"{label} must have length {D}, got shape {v.shape}")
    return v


def make_quadratic_game(Q_i, b_i, Q, b, block_dims=None, name="quadratic") -> QuadraticGame:
    layout = AgentLayout(tuple(block_dims)) if block_dims is not None else None
    return QuadraticGame(Q_i, b_i, Q, b, layout=layout, name=name)


def make_bilinear_rotation_game() -> BilinearRotationGame:
    return BilinearRotationGame()


def q_example() -> QuadraticGame:
    """Two scalar agents with field matrix [[-1, 2], [-2, -1]] and J = -|theta|^2/2."""
    return make_quadratic_game(
        Q_i=[[[-1.0, 2.0], [2.0, 0.0]], [[0.0, -2.0], [-2.0, -1.0]]],
        b_i=[[0.0, 0.0], [0.0, 0.0]],
        Q=-np.eye(2),
        b=[0.0, 0.0],
        block_dims=(1, 1),
        name="q_example",
    )


def random_quadratic_game(rng: np.random.Generator, block_dims, coupling: float = 1.0) -> QuadraticGame:
    """Random general-sum quadratic game with a strongly concave team payoff.

    Each agent's own block of ``Q_i`` is negative definite so the game is
    not trivially unstable; off-diagonal blocks are Gaussian with the given
    coupling scale.
    """
    layout = AgentLayout(tuple(block_dims))
    D = layout.total_dim

    def neg_def(n):
        A = rng.standard_normal((n, n))
        return -(A @ A.T / n + 0.5 * np.eye(n))

    Q_i = []
    for i in range(layout.n_agents):
        A = coupling * rng.standard_normal((D, D))
        q = 0.5 * (A + A.T)
        blk = layout.block(i)
        q[blk, blk] = neg_def(layout.block_dims[i])
        Q_i.append(q)
    b_i = [0.3 * rng.standard_normal(D) for _ in range(layout.n_agents)]
    Q = neg_def(D)
    b = 0.3 * rng.standard_normal(D)
    return QuadraticGame(Q_i, b_i, Q, b, layout=layout, name="random_quadratic")


# ---------------------------------------------------------------------------
# tabular Markov games


@dataclass(frozen=True)
class CriticSnapshot:
    """Frozen action-value table used by the independent field."""

    Q_hat: np.ndarray
    snapshot_step: int
    refresh_period: int = 1

    def staleness(self, step: int) -> int:
        return step - self.snapshot_step

    def is_valid_at(self, step: int) -> bool:
        return 0 <= self.staleness(step) < self.refresh_period


class TabularMarkovGame(DifferentiableGame):
    """Cooperative Markov game with per-agent tabular softmax policies.

    ``P`` has shape (S, A, S) and ``R`` shape (S, A) where ``A`` is the
    number of joint actions, indexed row-major over agents (agent 0 is the
    slowest-varying index). Agent ``i``'s parameters are an (S, A_i) table of
    logits, flattened row-major into its block.

    Used directly as a game, the independent field is computed against a
    freshly evaluated critic, so it coincides with the team field; wrap
    with ``with_snapshot`` to get the lagged-critic game.

    Internally every evaluation is batched over a leading axis of parameter
    vectors so finite-difference probes can be evaluated in one pass.
    """

    needs_critic = True

    def __init__(self, P, R, gamma, mu, action_counts, name="markov"):
        P = np.asarray(P, dtype=float)
        R = np.asarray(R, dtype=float)
        mu = np.asarray(mu, dtype=float)
        self.action_counts = tuple(int(a) for a in action_counts)
        S = P.shape[0]
        A = int(np.prod(self.action_counts))
        if P.shape != (S, A, S):
            raise ValueError(f"P must have shape ({S}, {A}, {S}), got {P.shape}")
        if R.shape != (S, A):
            raise ValueError(f"R must have shape ({S}, {A}), got {R.shape}")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=2) - 1.0)) > 1e-12:
            raise ValueError("transition rows must be distributions")
        if mu.shape != (S,) or np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-12:
            raise ValueError("mu must be a distribution over states")
        if not 0.0 <= gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if len(self.action_counts) > 3 or S > 16 or max(self.action_counts) > 4:
            raise ValueError("fixtures are limited to N <= 3, |S| <= 16, |A_i| <= 4")
        super().__init__(AgentLayout(tuple(S * a for a in self.action_counts)))
        self.P, self.R, self.gamma, self.mu = P, R, float(gamma), mu
        self.n_states = S
        self.n_joint = A
        self.name = name

    # -- batched policy helpers (leading axis B) ----------------------------

    def policies(self, thetas) -> list[np.ndarray]:
        """Per-agent (B, S, A_i) action probabilities."""
        out = []
        for i, a in enumerate(self.action_counts):
            z = thetas[:, self.layout.block(i)].reshape(-1, self.n_states, a)
            z = z - z.max(axis=2, keepdims=True)
            p = np.exp(z)
            out.append(p / p.sum(axis=2, keepdims=True))
        return out

    def joint_policy(self, pis) -> np.ndarray:
        """(B, S, A) joint action probabilities."""
        joint = pis[0]
        for p in pis[1:]:
            joint = (joint[:, :, :, None] * p[:, :, None, :]).reshape(joint.shape[0], self.n_states, -1)
        return joint

    def marginal_values(self, Q_tables, pis, i) -> np.ndarray:
        """(B, S, A_i) table of E_{a_-i ~ pi_-i}[Q(s, a_i, a_-i)]."""
        B = pis[0].shape[0]
        X = np.broadcast_to(Q_tables, (B, self.n_states, self.n_joint)).reshape((B, self.n_states) + self.action_counts)
        for j in reversed(range(len(self.action_counts))):
            if j == i:
                continue
            shape = [1] * X.ndim
            shape[0], shape[1], shape[j + 2] = B, self.n_states, self.action_counts[j]
            X = (X * pis[j].reshape(shape)).sum(axis=j + 2)
        return X

    # -- DifferentiableGame ------------------------------------------------

    def team_payoff(self, theta):
        v, _ = policy_eval(self, theta)
        return float(self.mu @ v)

    def team_field(self, theta):
        return exact_policy_gradient(self, theta)

    def independent_field(self, theta):
        return self.team_field(theta)

    def payoff(self, i, theta):
        return self.team_payoff(theta)

    def with_snapshot(self, snapshot: CriticSnapshot) -> "LaggedCriticGame":
        return LaggedCriticGame(self, snapshot)

    def to_dict(self) -> dict:
        return {
            "kind": "markov",
            "name": self.name,
            "states": self.n_states,
            "actions": list(self.action_counts),
            "P": self.P.tolist(),
            "R": self.R.tolist(),
            "gamma": self.gamma,
            "mu": self.mu.tolist(),
        }


class LaggedCriticGame(DifferentiableGame):
    """A Markov game whose independent field reads a frozen critic."""

    def __init__(self, mg: TabularMarkovGame, snapshot: CriticSnapshot):
        super().__init__(mg.layout)
        _check_snapshot(mg, snapshot)
        self.mg = mg
        self.snapshot = snapshot

    def team_payoff(self, theta):
        return self.mg.team_payoff(theta)

    def team_field(self, theta):
        return exact_policy_gradient(self.mg, theta)

    def independent_field(self, theta):
        return stale_critic_field(self.mg, theta, self.snapshot)

    def gap_many(self, thetas):
        X = np.asarray(thetas, dtype=float)
        pis, occ, Q = _evaluate(self.mg, X)
        e = _field(self.mg, pis, occ, self.snapshot.Q_hat[None]) - _field(self.mg, pis, occ, Q)
        return 0.5 * np.einsum("bd,bd->b", e, e)

    def payoff(self, i, theta):
        return self.local_payoff(i, theta)(theta)

    def local_payoff(self, i, anchor):
        # partners, occupancy and critic frozen at the anchor
        mg = self.mg
        A = np.asarray(anchor, dtype=float)[None]
        pis = mg.policies(A)
        occ = discounted_occupancy(mg, A[0])
        q_i = mg.marginal_values(self.snapshot.Q_hat[None], pis, i)[0]

        def f(theta):
            pi_i = mg.policies(np.asarray(theta, dtype=float)[None])[i][0]
            return float(occ @ (pi_i * q_i).sum(axis=1))

        return f


def _check_snapshot(mg, snapshot):
    if snapshot.Q_hat.shape != (mg.n_states, mg.n_joint):
        raise ValueError(f"snapshot table has shape {snapshot.Q_hat.shape}, expected {(mg.n_states, mg.n_joint)}")


def _solve(A, rhs, what):
    try:
        x = np.linalg.solve(A, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        conds = np.linalg.cond(A)
        raise EvaluationError(f"singular {what} system (cond={np.max(conds):.3e})") from exc
    if not np.all(np.isfinite(x)):
        raise EvaluationError(f"non-finite {what} solution")
    return x


def _evaluate(mg: TabularMarkovGame, X):
    """Policies, unnormalised occupancies and action values for a batch."""
    pis = mg.policies(X)
    joint = mg.joint_policy(pis)
    P_pi = np.einsum("bsa,sat->bst", joint, mg.P)
    r_pi = np.einsum("bsa,sa->bs", joint, mg.R)
    A = np.eye(mg.n_states)[None] - mg.gamma * P_pi
    v = _solve(A, r_pi, "policy evaluation")
    Q = mg.R[None] + mg.gamma * np.einsum("sat,bt->bsa", mg.P, v)
    occ = _solve(np.swapaxes(A, 1, 2), np.broadcast_to(mg.mu, r_pi.shape), "occupancy")
    return pis, occ, Q


def _field(mg: TabularMarkovGame, pis, occ, Q_tables) -> np.ndarray:
    blocks = []
    for i, pi_i in enumerate(pis):
        q_i = mg.marginal_values(Q_tables, pis, i)
        baseline = (pi_i * q_i).sum(axis=2, keepdims=True)
        blocks.append((occ[:, :, None] * pi_i * (q_i - baseline)).reshape(pi_i.shape[0], -1))
    return np.concatenate(blocks, axis=1)


def policy_eval(mg: TabularMarkovGame, theta) -> tuple[np.ndarray, np.ndarray]:
    """Exact state values and joint action values of the current policy."""
    X = np.asarray(theta, dtype=float)[None]
    joint = mg.joint_policy(mg.policies(X))
    P_pi = np.einsum("bsa,sat->bst", joint, mg.P)
    r_pi = np.einsum("bsa,sa->bs", joint, mg.R)
    v = _solve(np.eye(mg.n_states)[None] - mg.gamma * P_pi, r_pi, "policy evaluation")[0]
    Q = mg.R + mg.gamma * (mg.P @ v)
    return v, Q


def discounted_occupancy(mg: TabularMarkovGame, theta) -> np.ndarray:
    """Unnormalised discounted state occupancy sum_t gamma^t Pr(s_t = s).

    Multiply by (1 - gamma) for the normalised distribution. Both fields use
    the same convention, so it does not affect their difference.
    """
    X = np.asarray(theta, dtype=float)[None]
    joint = mg.joint_policy(mg.policies(X))
    P_pi = np.einsum("bsa,sat->bst", joint, mg.P)
    A = np.eye(mg.n_states)[None] - mg.gamma * P_pi
    return _solve(np.swapaxes(A, 1, 2), mg.mu[None], "occupancy")[0]


def exact_policy_gradient(mg: TabularMarkovGame, theta) -> np.ndarray:
    """Gradient of J = mu' v via the policy gradient theorem."""
    X = np.asarray(theta, dtype=float)[None]
    pis, occ, Q = _evaluate(mg, X)
    return _field(mg, pis, occ, Q)[0]


def stale_critic_field(mg: TabularMarkovGame, theta, snapshot: CriticSnapshot) -> np.ndarray:
    """Per-agent policy gradients evaluated against a frozen critic."""
    _check_snapshot(mg, snapshot)
    X = np.asarray(theta, dtype=float)[None]
    pis, occ, _ = _evaluate(mg, X)
    return _field(mg, pis, occ, snapshot.Q_hat[None])[0]


def refresh_snapshot(mg: TabularMarkovGame, theta, step: int, refresh_period: int = 1) -> CriticSnapshot:
    _, _, Q = _evaluate(mg, np.asarray(theta, dtype=float)[None])
    Q = Q[0]
    Q.setflags(write=False)
    return CriticSnapshot(Q_hat=Q, snapshot_step=int(step), refresh_period=int(refresh_period))


def value_iteration_oracle(mg: TabularMarkovGame, theta, tol: float = 1e-14, max_iter: int = 100_000) -> np.ndarray:
    """Fixed-policy Bellman iteration; independent check on ``policy_eval``."""
    joint = mg.joint_policy(mg.policies(np.asarray(theta, dtype=float)[None]))[0]
    v = np.zeros(mg.n_states)
    for _ in range(max_iter):
        q = mg.R + mg.gamma * np.einsum("sat,t->sa", mg.P, v)
        v_new = (joint * q).sum(axis=1)
        if np.max(np.abs(v_new - v)) < tol:
            return v_new
        v = v_new
    return v


# ---------------------------------------------------------------------------
# serialisation and bundled fixtures


def markov_game_from_dict(d: dict) -> TabularMarkovGame:
    states = d["states"]
    n_states = len(states) if isinstance(states, list) else int(states)
    P = np.asarray(d["P"], dtype=float)
    if P.shape[0] != n_states:
        raise ValueError(f"P has {P.shape[0]} states, header says {n_states}")
    return TabularMarkovGame(P, d["R"], d["gamma"], d["mu"], d["actions"], name=d.get("name", "markov"))


def game_from_dict(d: dict) -> DifferentiableGame:
    kind = d.get("kind")
    if kind == "bilinear":
        return make_bilinear_rotation_game()
    if kind == "quadratic":
        return make_quadratic_game(d["Q_i"], d["b_i"], d["Q"], d["b"], block_dims=d.get("block_dims"), name=d.get("name", "quadratic"))
    if kind == "markov":
        if "fixture" in d:
            return load_fixture(d["fixture"])
        return markov_game_from_dict(d)
    raise ValueError(f"unknown game kind {kind!r}")


def save_game(game, path) -> None:
    Path(path).write_text(json.dumps(game.to_dict(), indent=2, sort_keys=True) + "\n")


def load_game(path) -> DifferentiableGame:
    return game_from_dict(json.loads(Path(path).read_text()))


FIXTURES = ("two_state", "bandit", "three_agent")


def load_fixture(name: str) -> TabularMarkovGame:
    """Load a bundled Markov game by name."""
    if name not in FIXTURES:
        raise ValueError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}")
    text = resources.files("halypo.data").joinpath(f"markov_{name}.json").read_text()
    d = json.loads(text)
    d["kind"] = "markov"
    return markov_game_from_dict(d)


def bundled_games() -> dict[str, DifferentiableGame]:
    """Every game instance shipped with the package, keyed by name."""
    games = {"bilinear": make_bilinear_rotation_game(), "q_example": q_example()}
    rng = np.random.default_rng(2024)
    games["random_quadratic"] = random_quadratic_game(rng, (2, 3, 1))
    for name in FIXTURES:
        games[f"markov_{name}"] = load_fixture(name)
    return games
