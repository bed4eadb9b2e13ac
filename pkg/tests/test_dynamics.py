import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from firefly.dynamics import (DynamicsModel, RobotInput, RobotState, rollout, rollout_team,
                              step)

DT = 0.2
finite = st.floats(-50, 50, allow_nan=False)


def _state(*xs):
    return RobotState(xs[:3], xs[3:])


def test_matrices_block_form():
    m = DynamicsModel(DT)
    eye = np.eye(3)
    assert np.array_equal(m.A[:3, :3], eye)
    assert np.array_equal(m.A[:3, 3:], DT * eye)
    assert np.array_equal(m.A[3:, :3], np.zeros((3, 3)))
    assert np.array_equal(m.A[3:, 3:], eye)
    assert np.allclose(m.B[:3], DT**2 / 2 * eye)
    assert np.allclose(m.B[3:], DT * eye)


@pytest.mark.parametrize("s, u, expected", [
    ((0, 0, 0, 1, 0, 0), (0, 0, 0), (0.2, 0, 0, 1, 0, 0)),
    ((0, 0, 0, 1, 0, 0), (1, 0, 0), (0.22, 0, 0, 1.2, 0, 0)),
    ((0, 0, 0, 0, 0, 0), (0, 0, 0), (0, 0, 0, 0, 0, 0)),
])
def test_step_examples(s, u, expected):
    out = step(DynamicsModel(DT), _state(*s), RobotInput(u))
    assert np.allclose(out.as_vector(), expected, atol=1e-12)


def test_rollout_empty_and_drift():
    m = DynamicsModel(DT)
    s0 = _state(0, 0, 0, 1, 0, 0)
    tr = rollout(m, s0, [])
    assert tr.states.shape == (1, 6) and tr.horizon == 0
    tr = rollout(m, s0, np.zeros((2, 3)))
    assert np.allclose(tr.positions, [[0, 0, 0], [0.2, 0, 0], [0.4, 0, 0]])


def test_rollout_is_fold_of_step():
    rng = np.random.default_rng(3)
    m = DynamicsModel(DT)
    u = rng.uniform(-5, 5, size=(25, 3))
    s = _state(*rng.normal(size=6))
    tr = rollout(m, s, [RobotInput(x) for x in u])
    for t in range(25):
        s = step(m, s, u[t])
        assert np.allclose(tr.states[t + 1], s.as_vector(), atol=1e-8)


@settings(max_examples=50, deadline=None)
@given(s0=arrays(float, 6, elements=finite), u=arrays(float, (12, 3), elements=finite),
       v=arrays(float, (12, 3), elements=finite))
def test_superposition(s0, u, v):
    m = DynamicsModel(DT)
    lhs = rollout(m, s0, u + v).states - rollout(m, s0, u).states
    rhs = rollout(m, np.zeros(6), v).states
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))


@settings(max_examples=50, deadline=None)
@given(s0=arrays(float, 6, elements=finite), u=arrays(float, (7, 3), elements=finite))
def test_terminal_position_matches_rollout(s0, u):
    m = DynamicsModel(DT)
    p = m.terminal_position(s0, u)
    assert np.allclose(p, rollout(m, s0, u).positions[-1], atol=1e-9 * (1 + np.abs(p).max()))


def test_terminal_weights_closed_form():
    m = DynamicsModel(DT)
    w = m.terminal_weights(4)
    assert np.allclose(w, DT**2 * np.array([3.5, 2.5, 1.5, 0.5]))


def test_rollout_team_shapes():
    m = DynamicsModel(DT)
    s0 = np.zeros((2, 6))
    out = rollout_team(m, s0, [np.zeros((3, 3)), np.ones((5, 3))])
    assert [x.shape for x in out] == [(4, 6), (6, 6)]


def test_invalid_values():
    with pytest.raises(ValueError):
        DynamicsModel(0.0)
    with pytest.raises(ValueError):
        RobotState([np.nan, 0, 0], [0, 0, 0])
    with pytest.raises(ValueError):
        RobotInput([np.inf, 0, 0])
    assert RobotInput([1, -1, 0]).within(-1, 1)
    assert not RobotInput([2, 0, 0]).within(-1, 1)
