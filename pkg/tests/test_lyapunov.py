import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from halypo.core import random_theta
from halypo.errors import UnsupportedOperationError
from halypo.games import (
    bundled_games,
    load_fixture,
    make_bilinear_rotation_game,
    make_quadratic_game,
    q_example,
    random_quadratic_game,
    refresh_snapshot,
)
from halypo.lyapunov import (
    L_FLOOR,
    gap_at,
    rationality_gap,
    smoothness_estimate,
    stability_normal,
    stability_normal_analytic,
    stability_normal_fd,
)

vectors = arrays(np.float64, 5, elements=st.floats(-1e3, 1e3))


def test_gap_of_equal_fields_is_zero():
    u = np.array([1.0, -2.0, 3.0])
    assert rationality_gap(u, u) == 0.0


def test_gap_three_four_five():
    assert rationality_gap([3.0, 4.0], [0.0, 0.0]) == 12.5


def test_gap_bilinear():
    assert gap_at(make_bilinear_rotation_game(), [1.0, 0.0]) == 1.0


def test_gap_length_mismatch():
    with pytest.raises(ValueError):
        rationality_gap([1.0, 2.0], [1.0])


@given(vectors, vectors)
def test_gap_nonnegative_and_zero_only_at_equality(u, w):
    V = rationality_gap(u, w)
    assert V >= 0
    assert (V == 0) == bool(np.array_equal(u, w)) or np.max(np.abs(u - w)) < 1e-150


@given(vectors, vectors, st.floats(-100, 100))
def test_gap_is_homogeneous_of_degree_two(u, w, a):
    lhs = rationality_gap(a * u, a * w)
    rhs = a * a * rationality_gap(u, w)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


def test_analytic_normal_examples():
    assert np.array_equal(stability_normal_analytic(make_bilinear_rotation_game(), [1.0, 0.0]), [2.0, 0.0])
    assert np.array_equal(stability_normal_analytic(q_example(), [1.0, 0.0]), [4.0, 0.0])


def test_normal_vanishes_where_fields_agree():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 4))
    Q = -(A @ A.T)
    g = make_quadratic_game([Q, Q], [np.zeros(4)] * 2, Q, np.zeros(4))
    assert np.array_equal(stability_normal_analytic(g, rng.standard_normal(4)), np.zeros(4))


def test_analytic_normal_requires_jacobians():
    mg = load_fixture("two_state")
    with pytest.raises(UnsupportedOperationError):
        stability_normal_analytic(mg, np.zeros(mg.dim))


def test_fd_normal_examples():
    assert np.allclose(stability_normal_fd(make_bilinear_rotation_game(), [1.0, 0.0], 1e-5), [2.0, 0.0], atol=1e-6, rtol=0)
    assert np.allclose(stability_normal_fd(q_example(), [1.0, 0.0]), [4.0, 0.0], atol=1e-6, rtol=0)


@pytest.mark.parametrize("name", ["two_state", "three_agent"])
def test_fd_normal_zero_at_fresh_snapshot(name):
    mg = load_fixture(name)
    th = random_theta(mg.layout, np.random.default_rng(1))
    view = mg.with_snapshot(refresh_snapshot(mg, th, 0))
    assert np.max(np.abs(stability_normal_fd(view, th))) <= 1e-6


def test_unknown_normal_mode():
    with pytest.raises(ValueError):
        stability_normal(q_example(), [1.0, 0.0], "autodiff")


@pytest.mark.parametrize("name", [n for n, g in bundled_games().items() if g.has_analytic_jacobians])
def test_analytic_and_fd_normals_agree(name):
    game = bundled_games()[name]
    rng = np.random.default_rng(2)
    for _ in range(100):
        th = random_theta(game.layout, rng)
        h = stability_normal_analytic(game, th)
        assert np.linalg.norm(h - stability_normal_fd(game, th)) <= 1e-5 * (1 + np.linalg.norm(h))


def test_quadratic_gap_interpolates_exactly():
    g = random_quadratic_game(np.random.default_rng(3), (2, 2, 1))
    rng = np.random.default_rng(4)
    for _ in range(20):
        a, d = rng.standard_normal(g.dim), rng.standard_normal(g.dim)
        f0, f1, f2 = (gap_at(g, a + t * d) for t in (0.0, 1.0, 2.0))
        # second difference of a quadratic along a line is constant: f(3) predicted from three points
        f3 = gap_at(g, a + 3.0 * d)
        assert f3 == pytest.approx(f0 - 3 * f1 + 3 * f2, rel=1e-10, abs=1e-10)


def test_exact_smoothness_constants():
    est = smoothness_estimate(make_bilinear_rotation_game())
    assert est.L == pytest.approx(2.0, rel=1e-15) and est.method == "exact-quadratic"
    assert smoothness_estimate(q_example()).L == pytest.approx(4.0, rel=1e-15)


def test_exact_constant_is_a_tight_lipschitz_bound():
    g = random_quadratic_game(np.random.default_rng(5), (3, 2))
    L = smoothness_estimate(g).L
    rng = np.random.default_rng(6)
    for _ in range(100):
        a, b = rng.standard_normal(g.dim), rng.standard_normal(g.dim)
        assert np.linalg.norm(g.gap_gradient(a) - g.gap_gradient(b)) <= L * np.linalg.norm(a - b) * (1 + 1e-12)
    A = g.gap_matrix
    top = np.linalg.eigh(A.T @ A)[1][:, -1]
    a = rng.standard_normal(g.dim)
    ratio = np.linalg.norm(g.gap_gradient(a + top) - g.gap_gradient(a)) / L
    assert ratio == pytest.approx(1.0, rel=1e-12)


def test_empirical_estimate_inflates_sup():
    g = q_example()
    pts = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([2.0, -1.0])]
    est = smoothness_estimate(g, pts)
    assert est.method == "empirical-sup" and est.sample_count == 3
    assert est.L == pytest.approx(1.5 * 4.0, rel=1e-12)


def test_empirical_estimate_degenerate_game():
    rng = np.random.default_rng(7)
    Q = -np.eye(2)
    g = make_quadratic_game([Q, Q], [np.zeros(2)] * 2, Q, np.zeros(2))
    est = smoothness_estimate(g, [rng.standard_normal(2) for _ in range(4)])
    assert est.L == L_FLOOR and est.degenerate


def test_empirical_estimate_needs_samples():
    mg = load_fixture("two_state")
    with pytest.raises(ValueError):
        smoothness_estimate(mg)
    with pytest.raises(ValueError):
        smoothness_estimate(q_example(), [np.zeros(2)])
