import math

import numpy as np
import pytest
from helpers import grid_qp, random_qp
from hypothesis import given, settings
from hypothesis import strategies as st

from dualcbf.qp import QpProblem, QpStatus, ball_rows, inscribed_radius, kkt_residual, solve


def test_no_rows():
    sol = solve(QpProblem.from_rows(2, []))
    assert sol.ok and np.allclose(sol.u, 0.0)


def test_one_row_projection():
    sol = solve(QpProblem.from_rows(2, [(np.array([1.0, 0.0]), 1.0)]))
    assert sol.u == pytest.approx([1.0, 0.0])
    assert sol.active_set == (0,)


def test_two_rows_against_grid():
    rows = [(np.array([1.0, 0.0]), 1.0), (np.array([0.0, 1.0]), 1.0)]
    sol = solve(QpProblem.from_rows(2, rows))
    assert sol.u == pytest.approx([1.0, 1.0])
    A, b = np.array([r[0] for r in rows]), np.array([r[1] for r in rows])
    assert grid_qp(np.eye(2), np.zeros(2), A, b, np.array([2.0, 2.0])) == pytest.approx([1.0, 1.0], abs=1e-3)


def test_infeasible_rows():
    sol = solve(QpProblem.from_rows(1, [(np.array([1.0]), 1.0), (np.array([-1.0]), 0.0)]))
    assert sol.status is QpStatus.INFEASIBLE and not sol.ok


def test_redundant_rows():
    rows = [(np.array([1.0, 0.0]), 1.0)] * 3 + [(np.array([2.0, 0.0]), 2.0)]
    sol = solve(QpProblem.from_rows(2, rows))
    assert sol.ok and sol.u == pytest.approx([1.0, 0.0])
    assert sol.kkt_residual <= 1e-8


def test_ball_rows_one_dimension():
    rows = ball_rows(2.0, 1)
    assert [(float(a[0]), b) for a, b in rows] == [(1.0, -2.0), (-1.0, -2.0)]


def test_square_inscribed_in_unit_disc():
    rows = ball_rows(1.0, 2, facets=4)
    for v in ((1, 0), (0, 1), (-1, 0), (0, -1)):
        assert all(a @ np.array(v, float) >= b - 1e-12 for a, b in rows)


def test_radial_shortfall_for_32_facets():
    assert 1.0 - inscribed_radius(1.0, 2, 32) == pytest.approx(1.0 - math.cos(math.pi / 32))
    assert 1.0 - math.cos(math.pi / 32) == pytest.approx(0.0048, abs=1e-4)


def test_ball_rows_keep_input_inside_ball():
    rng = np.random.default_rng(0)
    rows = ball_rows(1.5, 2)
    for _ in range(200):
        target = rng.normal(size=2) * 5
        sol = solve(QpProblem.from_rows(2, rows + [(target / np.linalg.norm(target), 10.0)]))
        if sol.ok:
            pytest.fail("a row beyond the ball must be infeasible")
        sol = solve(QpProblem.from_rows(2, rows, linear=-target))
        assert np.linalg.norm(sol.u) <= 1.5 + 1e-12


def test_warm_start_gives_the_same_answer():
    rng = np.random.default_rng(1)
    for _ in range(50):
        H, c, A, b, _ = random_qp(rng)
        cold = solve(QpProblem(H, c, A, b))
        warm = solve(QpProblem(H, c, A, b), warm_start=tuple(range(len(b))))
        assert warm.u == pytest.approx(cold.u, abs=1e-9)


def test_deterministic():
    rng = np.random.default_rng(2)
    H, c, A, b, _ = random_qp(rng)
    assert np.array_equal(solve(QpProblem(H, c, A, b)).u, solve(QpProblem(H, c, A, b)).u)


def test_problem_validation():
    with pytest.raises(ValueError):
        QpProblem(np.array([[1.0, 2.0], [0.0, 1.0]]), None, np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        QpProblem(np.eye(2), None, np.zeros((2, 2)), np.zeros(3))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_kkt_on_random_problems(seed):
    H, c, A, b, _ = random_qp(np.random.default_rng(seed))
    sol = solve(QpProblem(H, c, A, b))
    assert sol.ok
    assert sol.kkt_residual <= 1e-8
    assert kkt_residual(QpProblem(H, c, A, b), sol.u, sol.active_set, sol.multipliers) <= 1e-8
    assert np.all(sol.multipliers >= -1e-12)


def test_matches_grid_oracle():
    rng = np.random.default_rng(3)
    for _ in range(40):
        H, c, A, b, u0 = random_qp(rng)
        assert solve(QpProblem(H, c, A, b)).u == pytest.approx(grid_qp(H, c, A, b, u0), abs=1e-3)
