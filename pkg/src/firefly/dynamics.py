"""Discrete-time 3D double integrator.

State is ``(px, py, pz, vx, vy, vz)`` and the input is an acceleration
``(ax, ay, az)``.  Everything here works on plain numpy arrays; the small
dataclasses exist so that single-robot values can be passed around with
names attached.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

STATE_DIM = 6
INPUT_DIM = 3


@dataclass(frozen=True)
class RobotState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        v = np.asarray(self.velocity, dtype=float).reshape(3)
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(v))):
            raise ValueError("state must be finite")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "velocity", v)

    @classmethod
    def from_vector(cls, s) -> "RobotState":
        s = np.asarray(s, dtype=float)
        return cls(s[:3], s[3:6])

    @classmethod
    def at_rest(cls, position) -> "RobotState":
        return cls(position, np.zeros(3))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])


@dataclass(frozen=True)
class RobotInput:
    acceleration: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.acceleration, dtype=float).reshape(3)
        if not np.all(np.isfinite(a)):
            raise ValueError("input must be finite")
        object.__setattr__(self, "acceleration", a)

    def within(self, lo: float, hi: float) -> bool:
        return bool(np.all(self.acceleration >= lo) and np.all(self.acceleration <= hi))


@dataclass(frozen=True)
class DynamicsModel:
    """Double integrator sampled with period ``dt``."""

    dt: float
    A: np.ndarray = field(init=False, repr=False)
    B: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        dt = float(self.dt)
        eye = np.eye(3)
        A = np.block([[eye, dt * eye], [np.zeros((3, 3)), eye]])
        B = np.vstack([0.5 * dt * dt * eye, dt * eye])
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    def terminal_weights(self, n_steps: int) -> np.ndarray:
        """Weight of input ``u[t]`` in the position after ``n_steps`` steps.

        ``p[n] = p[0] + n*dt*v[0] + sum_t w[t] * u[t]`` with
        ``w[t] = dt**2 * (n - t - 1/2)``.
        """
        t = np.arange(n_steps)
        return self.dt**2 * (n_steps - t - 0.5)

    def terminal_position(self, s0, inputs) -> np.ndarray:
        """Position after applying ``inputs`` (shape ``(n, 3)``) from ``s0``."""
        s0 = _vec(s0)
        inputs = np.asarray(inputs, dtype=float).reshape(-1, 3)
        n = inputs.shape[0]
        return s0[:3] + n * self.dt * s0[3:] + self.terminal_weights(n) @ inputs


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray  # (H+1, 6)
    inputs: np.ndarray  # (H, 3)

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, :3]

    @property
    def horizon(self) -> int:
        return self.inputs.shape[0]

    def state(self, t: int) -> RobotState:
        return RobotState.from_vector(self.states[t])


def _vec(s) -> np.ndarray:
    if isinstance(s, RobotState):
        return s.as_vector()
    return np.asarray(s, dtype=float).reshape(STATE_DIM)


def _acc(u) -> np.ndarray:
    if isinstance(u, RobotInput):
        return u.acceleration
    return np.asarray(u, dtype=float).reshape(INPUT_DIM)


def step(model: DynamicsModel, s, u) -> RobotState:
    """One step of ``s' = A s + B u``."""
    return RobotState.from_vector(model.A @ _vec(s) + model.B @ _acc(u))


def rollout(model: DynamicsModel, s0, inputs: Sequence) -> Trajectory:
    """Roll the dynamics forward from ``s0`` under ``inputs``.

    ``inputs`` may be a sequence of :class:`RobotInput` or an ``(H, 3)``
    array.  The returned trajectory has ``H + 1`` states.
    """
    if isinstance(inputs, np.ndarray):
        u = np.asarray(inputs, dtype=float).reshape(-1, INPUT_DIM)
    else:
        u = np.array([_acc(x) for x in inputs], dtype=float).reshape(-1, INPUT_DIM)
    states = np.empty((u.shape[0] + 1, STATE_DIM))
    states[0] = _vec(s0)
    for t in range(u.shape[0]):
        states[t + 1] = model.A @ states[t] + model.B @ u[t]
    return Trajectory(states, u)


def rollout_team(model: DynamicsModel, s0: np.ndarray, inputs: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Per-robot state arrays for a team; ``inputs[k]`` has shape ``(H_k, 3)``."""
    return [rollout(model, s0[k], inputs[k]).states for k in range(len(inputs))]
