import numpy as np
import pytest

from coevo.exceptions import DimensionMismatch, NoFeasiblePoint, NonSymmetric, OutOfBounds
from coevo.lmi import (
    LmiSystem,
    assemble_symmetric,
    bisect_scalar,
    check_feasible_point,
    expand_matrix_variable,
    max_eigenvalue,
    solve_feasibility,
    sym_images,
    symmetric_coordinates,
)

from oracles import grid_min_lambda_max, random_symmetric


def interval_system(margin=0.1):
    # F(x) = diag(x - 1, -x)
    return LmiSystem(np.diag([-1.0, 0.0]), np.array([np.diag([1.0, -1.0])]), margin=margin,
                     lower=[-5.0], upper=[5.0])


def contradictory_system(margin=0.1):
    return LmiSystem(np.zeros((2, 2)), np.array([np.diag([1.0, -1.0])]), margin=margin,
                     lower=[-5.0], upper=[5.0])


def test_max_eigenvalue_examples():
    assert max_eigenvalue(np.diag([1.0, -3.0])) == pytest.approx(1.0)
    assert max_eigenvalue(np.zeros((3, 3))) == 0.0
    assert max_eigenvalue([[1.0, -1.0], [-1.0, 3.0]]) == pytest.approx(2 + np.sqrt(2), rel=1e-12)


def test_max_eigenvalue_rejects_asymmetric():
    with pytest.raises(NonSymmetric):
        max_eigenvalue([[1.0, 1.0], [0.0, 1.0]])


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_basis_count_and_roundtrip(n):
    E = expand_matrix_variable(n)
    assert len(E) == n * (n + 1) // 2
    rng = np.random.default_rng(n)
    X = random_symmetric(rng, n)
    c = symmetric_coordinates(X)
    assert np.max(np.abs(sum(ci * Ei for ci, Ei in zip(c, E)) - X)) <= 1e-14
    assert np.max(np.abs(assemble_symmetric(c, n) - X)) <= 1e-14


def test_sym_images_match_direct_products():
    rng = np.random.default_rng(1)
    U, V = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    X = random_symmetric(rng, 3)
    c = symmetric_coordinates(X)
    cong = np.einsum("k,kij->ij", c, sym_images(U))
    cross = np.einsum("k,kij->ij", c, sym_images(U, V))
    assert np.allclose(cong, U.T @ X @ U, atol=1e-12)
    assert np.allclose(cross, U.T @ X @ V + V.T @ X @ U, atol=1e-12)


def test_check_feasible_point_examples():
    ok, slack = check_feasible_point(interval_system(), [0.5])
    assert ok and slack == pytest.approx(-0.5)
    ok, slack = check_feasible_point(contradictory_system(), [0.0])
    assert not ok and slack == pytest.approx(0.0)


def test_check_feasible_point_errors():
    with pytest.raises(DimensionMismatch):
        check_feasible_point(interval_system(), [0.5, 0.1])
    with pytest.raises(OutOfBounds):
        check_feasible_point(interval_system(), [6.0])


def test_solver_interval_example():
    res = solve_feasibility(interval_system())
    assert res.feasible
    assert 0.1 <= res.point[0] <= 0.9
    ok, slack = check_feasible_point(interval_system(), res.point)
    assert ok and slack == pytest.approx(res.slack)


def test_solver_reports_not_found_with_nonnegative_slack():
    res = solve_feasibility(contradictory_system())
    assert not res.feasible
    assert res.slack >= 0


def test_system_rejects_asymmetric_basis():
    with pytest.raises(NonSymmetric):
        LmiSystem(np.zeros((2, 2)), np.array([[[0.0, 1.0], [0.0, 0.0]]]))


def test_system_dict_roundtrip():
    sys = interval_system()
    back = LmiSystem.from_dict(sys.to_dict())
    assert np.array_equal(back.constant, sys.constant)
    assert np.array_equal(back.basis, sys.basis)
    assert back.margin == sys.margin


def _random_system(rng, margin=0.01):
    s, v = int(rng.integers(2, 7)), int(rng.integers(1, 3))
    F0 = random_symmetric(rng, s)
    basis = np.array([random_symmetric(rng, s) for _ in range(v)])
    lo, hi = -np.ones(v), np.ones(v)
    best, _ = grid_min_lambda_max(F0, basis, lo, hi, 0.02)
    shift = rng.choice([-1.0, 1.0]) * rng.uniform(0.05, 0.3)
    F0 = F0 - (best + margin + shift) * np.eye(s)
    # grid minimum is now -margin - shift
    return LmiSystem(F0, basis, margin=margin, lower=lo, upper=hi), shift > 0


@pytest.mark.parametrize("seed", range(8))
def test_solver_agrees_with_coarse_grid(seed):
    sys, expect = _random_system(np.random.default_rng(100 + seed))
    res = solve_feasibility(sys)
    assert res.feasible == expect
    if res.feasible:
        assert check_feasible_point(sys, res.point)[0]


@pytest.mark.parametrize("factor", [10.0, 0.1])
def test_status_invariant_under_rescaling(factor):
    for seed in range(4):
        sys, _ = _random_system(np.random.default_rng(200 + seed))
        assert solve_feasibility(sys).feasible == solve_feasibility(sys.scaled(factor)).feasible


def test_bisect_examples():
    assert bisect_scalar(lambda v: v <= 0.7, 0.0, 1.0, 1e-4) == pytest.approx(0.7, abs=1e-4)
    assert bisect_scalar(lambda v: True, 0.0, 1.0, 1e-4) == 1.0
    with pytest.raises(NoFeasiblePoint):
        bisect_scalar(lambda v: False, 0.0, 1.0, 1e-4)
