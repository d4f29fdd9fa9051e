import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst
from qp_oracle import enumerate_optimum, random_problem

from squatjump.qpsolver import (
    INF,
    INFEASIBLE,
    SOLVED,
    ActiveSetSolver,
    QpProblem,
    check_kkt,
    dump_problem,
    load_problem,
    solve,
)


def rel_err(a, b):
    return abs(a - b) / max(1.0, abs(b))


@pytest.mark.parametrize("seed", range(40))
def test_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 6))
    c = int(rng.integers(0, 9))
    n_eq = int(rng.integers(0, min(m, c) + 1)) if c else 0
    H, g, A, lb, ub = random_problem(rng, m, c, n_eq)
    sol = solve(QpProblem(H, g, A, lb, ub))
    _, f_ref = enumerate_optimum(H, g, A, lb, ub)
    assert sol.status == SOLVED
    assert rel_err(sol.objective, f_ref) < 1e-8
    assert sol.kkt.worst() < 1e-8


@settings(max_examples=60, deadline=None)
@given(seed=hst.integers(0, 2 ** 32 - 1), m=hst.integers(1, 6), c=hst.integers(0, 8))
def test_property_kkt_and_feasibility(seed, m, c):
    rng = np.random.default_rng(seed)
    p = QpProblem(*random_problem(rng, m, c))
    sol = solve(p)
    assert sol.solved
    rep = check_kkt(p, sol.x, sol.duals)
    assert rep.worst() < 1e-8
    Ax = p.A @ sol.x
    assert np.all(Ax >= p.lb - 1e-9) and np.all(Ax <= p.ub + 1e-9)


def test_unconstrained_is_newton_step():
    H = np.array([[4.0, 1.0], [1.0, 3.0]])
    g = np.array([1.0, -2.0])
    sol = solve(QpProblem(H, g))
    assert np.allclose(sol.x, -np.linalg.solve(H, g))
    assert sol.iterations >= 0 and sol.active_set == []


def test_box_constraint_active_with_dual_sign():
    # min 1/2 (x - 2)^2 s.t. x <= 1 -> x = 1, upper bound active, negative dual
    sol = solve(QpProblem([[1.0]], [-2.0], [[1.0]], [-INF], [1.0]))
    assert sol.x[0] == pytest.approx(1.0)
    assert sol.duals[0] == pytest.approx(-1.0)
    sol = solve(QpProblem([[1.0]], [2.0], [[1.0]], [-1.0], [INF]))
    assert sol.x[0] == pytest.approx(-1.0)
    assert sol.duals[0] == pytest.approx(1.0)


def test_rank_deficient_consistent_equalities():
    A = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 0.0, 1.0]])
    b = np.array([1.0, 2.0, 0.5])
    sol = solve(QpProblem(np.eye(3), np.zeros(3), A, b, b))
    assert sol.solved
    assert np.allclose(sol.x, [0.5, 0.5, 0.5])


def test_inconsistent_equalities_infeasible():
    A = np.array([[1.0, 1.0], [2.0, 2.0]])
    b = np.array([1.0, 3.0])
    sol = solve(QpProblem(np.eye(2), np.zeros(2), A, b, b))
    assert sol.status == INFEASIBLE


def test_infeasible_inequalities_reported():
    A = np.array([[1.0, 0.0], [1.0, 0.0]])
    sol = solve(QpProblem(np.eye(2), np.zeros(2), A, [1.0, -INF], [INF, 0.0]))
    assert sol.status == INFEASIBLE
    assert not sol.solved


def test_warm_start_gives_same_answer(rng):
    p = QpProblem(*random_problem(rng, 5, 8))
    cold = solve(p)
    warm = solve(p, x0=cold.x, active_set=cold.active_set)
    assert np.allclose(cold.x, warm.x, atol=1e-10)
    assert warm.iterations <= cold.iterations


def test_trace_callback_called(rng):
    calls = []
    p = QpProblem(*random_problem(rng, 4, 8))
    ActiveSetSolver(trace=lambda *a: calls.append(a)).solve(p)
    assert all(len(c) == 4 for c in calls)


@pytest.mark.parametrize("bad", [
    dict(H=[[1.0, 2.0], [0.0, 1.0]], g=[0.0, 0.0]),
    dict(H=[[1.0]], g=[np.nan]),
    dict(H=[[1.0]], g=[0.0], A=[[1.0]], lb=[1.0], ub=[0.0]),
    dict(H=[[1.0]], g=[0.0, 1.0]),
])
def test_malformed_problems_rejected(bad):
    with pytest.raises(ValueError):
        QpProblem(**bad)


def test_dump_round_trip(tmp_path, rng):
    p = QpProblem(*random_problem(rng, 4, 6, 1))
    path = tmp_path / "qp.txt"
    dump_problem(p, path)
    assert path.read_text().startswith("qp 4 6\n")
    q = load_problem(path)
    for name in ("H", "g", "A", "lb", "ub"):
        assert np.array_equal(getattr(p, name), getattr(q, name))
    assert np.allclose(solve(p).x, solve(q).x)


def test_dump_without_constraints(tmp_path):
    p = QpProblem(np.eye(2), [1.0, 0.0])
    dump_problem(p, tmp_path / "q.txt")
    q = load_problem(tmp_path / "q.txt")
    assert q.n_rows == 0 and np.array_equal(q.H, p.H)
