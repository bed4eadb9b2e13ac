import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from firefly.solver import Ball, ConvexProgram, Status, dump_program, load_program, solve
from oracles import brute_force_qp, random_qp


def test_scalar_kkt_example():
    res = solve(ConvexProgram(P=[[2.0]], q=[0.0], Ain=[[-1.0]], bin=[-1.0]))
    assert res.status is Status.OPTIMAL
    assert res.x == pytest.approx([1.0], abs=1e-6)


def test_ball_projection_example():
    c = np.array([2.0, 0, 0])
    prog = ConvexProgram(P=2 * np.eye(3), q=-2 * c, balls=[Ball(np.eye(3), np.zeros(3), 1.0)])
    res = solve(prog)
    assert res.ok
    assert np.allclose(res.x, [1, 0, 0], atol=1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_box_qp_matches_active_set_enumeration(seed):
    rng = np.random.default_rng(seed)
    prog = random_qp(rng, n=8, n_rows=0, n_boxed=8)
    res = solve(ConvexProgram(**prog))
    x_ref, obj_ref = brute_force_qp(prog["P"], prog["q"], lo=prog["lo"], hi=prog["hi"])
    assert res.ok
    assert res.objective == pytest.approx(obj_ref, abs=1e-6)
    assert np.allclose(res.x, x_ref, atol=1e-5)


@pytest.mark.parametrize("seed", range(8))
def test_general_qp_with_equalities(seed):
    rng = np.random.default_rng(100 + seed)
    prog = random_qp(rng, n=5, n_rows=3, n_boxed=2, n_eq=1)
    res = solve(ConvexProgram(**prog))
    x_ref, obj_ref = brute_force_qp(prog["P"], prog["q"], prog["Ain"], prog["bin"],
                                    prog["Aeq"], prog["beq"], prog["lo"], prog["hi"])
    assert res.ok
    assert res.objective == pytest.approx(obj_ref, abs=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_ball_program_matches_slsqp(seed):
    rng = np.random.default_rng(200 + seed)
    n = 4
    A = rng.normal(size=(n, n))
    P = A @ A.T + np.eye(n)
    q = rng.normal(scale=4, size=n)
    F = rng.normal(size=(3, n))
    g = rng.normal(size=3)
    r = 1.0 + np.linalg.norm(g)   # x = 0 is inside
    res = solve(ConvexProgram(P=P, q=q, balls=[Ball(F, g, r)]))
    cons = {"type": "ineq", "fun": lambda x: r**2 - np.sum((F @ x + g) ** 2)}
    ref = minimize(lambda x: 0.5 * x @ P @ x + q @ x, np.zeros(n), jac=lambda x: P @ x + q,
                   constraints=[cons], method="SLSQP", options={"ftol": 1e-12, "maxiter": 500})
    assert ref.success
    assert res.ok
    assert res.objective == pytest.approx(ref.fun, abs=1e-6)


def test_infeasible_is_a_status():
    prog = ConvexProgram(P=np.eye(2), q=np.zeros(2), Ain=[[1.0, 0], [-1.0, 0]], bin=[-1.0, -1.0])
    res = solve(prog)
    assert res.status is Status.INFEASIBLE and not res.ok
    ball = ConvexProgram(P=np.eye(2), q=np.zeros(2), lo=[5, 5],
                         balls=[Ball(np.eye(2), np.zeros(2), 1.0)])
    assert solve(ball).status is Status.INFEASIBLE


def test_max_iter_returns_best_iterate():
    rng = np.random.default_rng(1)
    prog = ConvexProgram(**random_qp(rng, n=6, n_rows=4, n_boxed=6))
    res = solve(prog, max_iter=1)
    assert res.status is Status.MAX_ITER
    assert res.x.shape == (6,) and np.all(np.isfinite(res.x))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 8), rows=st.integers(0, 5),
       boxed=st.integers(0, 8))
def test_optimal_results_satisfy_raw_constraints_and_are_deterministic(seed, n, rows, boxed):
    rng = np.random.default_rng(seed)
    prog = ConvexProgram(**random_qp(rng, n=n, n_rows=rows, n_boxed=min(boxed, n)))
    a, b = solve(prog), solve(prog)
    assert a.status is b.status
    assert np.array_equal(a.x, b.x)
    assert a.ok
    assert a.primal_residual <= 1e-6
    assert prog.residual(a.x) <= 1e-6


def test_empty_program():
    res = solve(ConvexProgram(P=np.zeros((0, 0)), q=np.zeros(0)))
    assert res.ok and res.x.size == 0


@pytest.mark.parametrize("kwargs", [
    dict(P=np.eye(2), q=np.zeros(3)),
    dict(P=[[1.0, 2.0], [0.0, 1.0]], q=np.zeros(2)),
    dict(P=np.eye(2), q=np.zeros(2), Ain=np.ones((1, 2))),
    dict(P=np.eye(2), q=np.zeros(2), Aeq=np.ones((2, 2)), beq=np.ones(1)),
    dict(P=np.eye(2), q=np.zeros(2), balls=[Ball(np.ones((2, 3)), np.zeros(2), 1.0)]),
])
def test_malformed_programs(kwargs):
    with pytest.raises(ValueError):
        ConvexProgram(**kwargs)


def test_dump_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    prog = ConvexProgram(**random_qp(rng, n=3, n_rows=2, n_boxed=3),
                         balls=[Ball(np.eye(3), np.zeros(3), 10.0)])
    path = tmp_path / "prog.json"
    dump_program(prog, path)
    back = load_program(path)
    assert np.array_equal(back.P, prog.P) and np.array_equal(back.bin, prog.bin)
    assert np.array_equal(solve(back).x, solve(prog).x)
