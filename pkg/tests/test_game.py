import numpy as np
import pytest

from coevo.exceptions import DimensionMismatch, NotStronglyMonotone
from coevo.game import (
    ControllerGain,
    PolyhedralSet,
    QuadraticGame,
    build_pseudogradient,
    feasible_set,
    monotonicity_constants,
    theta_hat_over_eta,
)
from coevo.scenario import scalar_instance

from instances import random_game, random_network


def scalar_pg(omega=1.0):
    game, net = scalar_instance()
    return build_pseudogradient(game, ControllerGain.light_touch(omega), net.A, net.B)


def test_scalar_block_formulas():
    pg = scalar_pg()
    assert pg.M[0, 0] == pytest.approx(2.0)
    assert pg.N_x[0, 0] == pytest.approx(0.5)
    assert pg.c[0] == pytest.approx(-1.0)
    assert (pg.eta, pg.ell, pg.theta_exact) == pytest.approx((2.0, 2.0, 0.5))


def test_zero_gain_decouples():
    rng = np.random.default_rng(0)
    game, net = random_game(rng), random_network(rng)
    pg = build_pseudogradient(game, ControllerGain.light_touch(0.0), net.A, net.B)
    R = np.zeros((game.p, game.p))
    for i, Ri in enumerate(game.R):
        R[i * game.m:(i + 1) * game.m, i * game.m:(i + 1) * game.m] = Ri
    assert np.allclose(pg.M, R)
    assert not pg.N_x.any() and not pg.c.any()


def test_block_formulas_against_cost_differences():
    # partial gradients of J_i by central differences
    rng = np.random.default_rng(3)
    game, net = random_game(rng, n=3, m=2, N=3), random_network(rng, 3, 2)
    K = rng.uniform(0, 1, size=(2, 6))
    gain = ControllerGain.matrix(K)
    pg = build_pseudogradient(game, gain, net.A, net.B)
    x, y = rng.normal(size=3), rng.normal(size=6)

    def cost(i, yy):
        e = net.A @ x + net.B @ K @ yy - game.xbar[i]
        yi = yy[i * 2:(i + 1) * 2]
        return 0.5 * e @ game.Q[i] @ e + 0.5 * yi @ game.R[i] @ yi

    h = 1e-6
    grad = np.zeros(6)
    for i in range(3):
        for j in range(2):
            k = 2 * i + j
            d = np.zeros(6)
            d[k] = h
            grad[k] = (cost(i, y + d) - cost(i, y - d)) / (2 * h)
    assert np.allclose(pg(y, x), grad, atol=1e-6)


def test_theta_exact_below_bound():
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 50:
        n, m, N = rng.integers(1, 5), rng.integers(1, 4), rng.integers(1, 4)
        game, net = random_game(rng, n, m, N), random_network(rng, n, m)
        gain = ControllerGain.matrix(rng.uniform(0, 1, size=(m, m * N)))
        try:
            pg = build_pseudogradient(game, gain, net.A, net.B)
        except NotStronglyMonotone:
            continue
        assert pg.theta_exact <= pg.theta_bound * (1 + 1e-12)
        checked += 1


def test_theta_linear_in_omega():
    rng = np.random.default_rng(6)
    game, net = random_game(rng), random_network(rng)
    t1 = build_pseudogradient(game, ControllerGain.light_touch(1.0), net.A, net.B).theta_exact
    for w in (0.2, 0.5, 0.9):
        tw = build_pseudogradient(game, ControllerGain.light_touch(w), net.A, net.B).theta_exact
        assert abs(tw - w * t1) <= 1e-12 * max(1.0, t1)


def test_theta_hat_bounds_every_omega():
    rng = np.random.default_rng(7)
    game, net = random_game(rng), random_network(rng)
    ratio = theta_hat_over_eta(game, net.A, net.B)
    for w in np.linspace(0.05, 1, 8):
        pg = build_pseudogradient(game, ControllerGain.light_touch(w), net.A, net.B)
        assert pg.theta_exact / pg.eta <= ratio * w * (1 + 1e-9)


def test_monotonicity_examples():
    assert monotonicity_constants([[2.0, 1.0], [1.0, 2.0]]) == pytest.approx((1.0, 3.0))
    assert monotonicity_constants(np.eye(4)) == pytest.approx((1.0, 1.0))
    with pytest.raises(NotStronglyMonotone):
        monotonicity_constants([[1.0, 0.0], [0.0, -1.0]])


def test_sampled_monotonicity_and_lipschitz():
    rng = np.random.default_rng(8)
    p = 5
    G = rng.normal(size=(p, p))
    M = np.diag(rng.uniform(1, 2, size=p)) + G.T @ G
    eta, ell = monotonicity_constants(M)
    for _ in range(100):
        y, z = rng.normal(size=p), rng.normal(size=p)
        d = y - z
        assert (M @ d) @ d >= eta * d @ d - 1e-9
        assert np.linalg.norm(M @ d) <= ell * np.linalg.norm(d) + 1e-9


def test_sampled_state_sensitivity():
    rng = np.random.default_rng(9)
    game, net = random_game(rng), random_network(rng)
    pg = build_pseudogradient(game, ControllerGain.light_touch(0.7), net.A, net.B)
    y = rng.normal(size=game.p)
    for _ in range(100):
        x, x2 = rng.normal(size=game.n), rng.normal(size=game.n)
        assert np.linalg.norm(pg(y, x) - pg(y, x2)) <= pg.theta_exact * np.linalg.norm(x - x2) + 1e-9


def test_feasible_set_scalar_substitution():
    game = QuadraticGame([[[1.0]]], [[1.0]], [[[1.0]]], [-10.0], [10.0], state_lo=[0.0], state_hi=[2.0])
    S = feasible_set(game, ControllerGain.light_touch(1.0), [1.0], [[0.5]], [[1.0]])
    lo = max(S.lo[0], *(S.offsets[k] / S.normals[k, 0] for k in range(2) if S.normals[k, 0] < 0))
    hi = min(S.hi[0], *(S.offsets[k] / S.normals[k, 0] for k in range(2) if S.normals[k, 0] > 0))
    assert (lo, hi) == pytest.approx((-0.5, 1.5))


def test_feasible_set_without_coupling_is_the_box():
    rng = np.random.default_rng(10)
    game = random_game(rng, box=(-1.0, 1.0), state_box=(-5.0, 5.0))
    net = random_network(rng)
    S = feasible_set(game, ControllerGain.light_touch(0.0), np.zeros(3), net.A, net.B)
    assert S.normals.shape[0] == 0
    assert np.array_equal(S.lo, game.y_lo) and np.array_equal(S.hi, game.y_hi)


def test_polyhedral_set_violation():
    S = PolyhedralSet([-1, -1], [1, 1], [[1.0, 1.0]], [1.0])
    assert S.violation(np.array([0.5, 0.5])) == 0.0
    assert S.violation(np.array([1.0, 1.0])) == pytest.approx(1.0)


def test_game_dimension_checks():
    with pytest.raises(DimensionMismatch):
        QuadraticGame([np.eye(2), np.eye(3)], [np.zeros(2)] * 2, [np.eye(1)] * 2, 0.0, 1.0)
    with pytest.raises(DimensionMismatch):
        QuadraticGame([np.eye(2)], [np.zeros(3)], [np.eye(1)], 0.0, 1.0)


def test_game_dict_roundtrip():
    rng = np.random.default_rng(11)
    game = random_game(rng, box=(0.0, 2.0), state_box=(-1.0, 1.0))
    back = QuadraticGame.from_dict(game.to_dict())
    assert all(np.array_equal(a, b) for a, b in zip(back.Q, game.Q))
    assert np.array_equal(back.state_hi, game.state_hi)
