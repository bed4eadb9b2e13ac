"""Distributed fair motion planning by parallel per-robot descent steps.

Every iteration each robot solves a small convex program for a bounded
descent step ``eps_k`` on its own not-yet-executed inputs, holding the rest
of the team at the previous iterate.  The team then moves by
``gamma(r) * eps`` and the loop stops once the update is shorter than
``eta``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .dynamics import DynamicsModel, rollout
from .fairness import (FairnessNotion, InvalidBaselineError, Kind, SoloBaseline, TeamPlan,
                       evaluate, team_gradient)
from .mission import MissionSpec, Sphere
from .solver import Ball, ConvexProgram, solve

log = logging.getLogger(__name__)

ETA_ENERGY = 0.5   # f1, f2
ETA_SURGE = 0.1    # f3, f4


class MissionInfeasibleError(RuntimeError):
    def __init__(self, robot: int, message: str = "goal unreachable within horizon under u_box"):
        super().__init__(f"robot {robot}: {message}")
        self.robot = robot


class LocalSolveError(RuntimeError):
    def __init__(self, robot: int, iteration: int, status):
        super().__init__(f"local problem of robot {robot} failed at iteration {iteration}: {status}")
        self.robot = robot
        self.iteration = iteration
        self.status = status


@dataclass(frozen=True)
class PlannerConfig:
    max_iters: int = 1000
    eta: float = ETA_ENERGY
    gamma_start: float = 1.0
    gamma_end: float = 0.1
    eps_min: float = -10.0
    eps_max: float = 10.0
    kappa: float = 1.0
    backtracking: bool = True
    goal_margin: float = 0.02       # plan into the goal shrunk by this fraction of its radius
    avoid_obstacles: bool = True    # linearised keep-out half-spaces in every plan program
    obstacle_margin: float = 0.2    # clearance demanded by the half-spaces
    obstacle_influence: float = 1.0  # only planned points this close to the surface get a row
    deadline_margin: int = 0        # plans must also be in the goal this many steps early
    scp_iters: int = 6              # re-linearisations of the keep-outs per repair

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not (0 < self.gamma_end <= self.gamma_start <= 1):
            raise ValueError("step sizes must satisfy 0 < gamma_end <= gamma_start <= 1")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.eps_min <= 0 <= self.eps_max:
            raise ValueError("descent box must contain zero")
        if not 0 <= self.goal_margin < 1:
            raise ValueError("goal_margin must lie in [0, 1)")
        if self.obstacle_margin < 0 or self.obstacle_influence < 0:
            raise ValueError("obstacle margins must be nonnegative")
        if self.deadline_margin < 0:
            raise ValueError("deadline_margin must be nonnegative")
        if self.scp_iters < 1:
            raise ValueError("scp_iters must be >= 1")

    def arrival(self, n_free: int) -> int | None:
        """Relative step of the early goal constraint, or None once it has passed."""
        j = n_free - self.deadline_margin
        return j if 0 < j < n_free else None

    @classmethod
    def for_notion(cls, notion: FairnessNotion | None, **overrides) -> "PlannerConfig":
        eta = ETA_SURGE if notion is not None and notion.kind in (Kind.F3, Kind.F4) else ETA_ENERGY
        overrides.setdefault("eta", eta)
        return cls(**overrides)

    def step_size(self, r: int) -> float:
        """Linear decrease from ``gamma_start`` at r=1 to ``gamma_end`` at r=R, then flat."""
        if r < 1:
            raise ValueError("iterations are numbered from 1")
        if r == 1:
            return self.gamma_start
        if r >= self.max_iters:
            return self.gamma_end
        frac = (r - 1) / (self.max_iters - 1)
        return self.gamma_start + frac * (self.gamma_end - self.gamma_start)


# --- reach programs -------------------------------------------------------------

def _terminal_map(model: DynamicsModel, n_steps: int) -> np.ndarray:
    return np.kron(model.terminal_weights(n_steps), np.eye(3))


def position_map(model: DynamicsModel, n_steps: int) -> np.ndarray:
    """``W`` with ``p[i+1] = p0 + (i+1) dt v0 + (W[i] kron I3) u`` for ``i < n_steps``."""
    i = np.arange(1, n_steps + 1)[:, None]
    j = np.arange(n_steps)[None, :]
    return np.where(j < i, model.dt**2 * (i - j - 0.5), 0.0)


def keepout_rows(model: DynamicsModel, s0: np.ndarray, reference: np.ndarray, goal: Sphere,
                 obstacles, margin: float, influence: float) -> tuple[np.ndarray, np.ndarray]:
    """Half-spaces ``A u <= b`` keeping planned positions outside the obstacles.

    Each planned point of ``reference`` within ``influence`` of an obstacle
    surface gets the row ``n . (p - c) >= r + margin``, with ``n`` pointing
    from the centre to the point.  A point inside the inflated ball is pushed
    sideways off the line towards the goal instead, so straight-through
    plans get a definite side.  The clearance never exceeds what the robot
    has now, which keeps the rows satisfiable from the current state.
    """
    ref = np.asarray(reference, dtype=float).reshape(-1, 3)
    n = ref.shape[0]
    if n == 0 or not obstacles:
        return np.zeros((0, 3 * n)), np.zeros(0)
    W = position_map(model, n)
    p0, v0 = s0[:3], s0[3:]
    drift = p0 + np.arange(1, n + 1)[:, None] * model.dt * v0
    pts = drift + W @ ref
    heading = goal.center - p0
    if np.linalg.norm(heading) > 1e-12:
        heading = heading / np.linalg.norm(heading)
    A, b = [], []
    for obs in obstacles:
        clearance = min(margin, max(0.0, float(np.linalg.norm(p0 - obs.center)) - obs.radius))
        reach = obs.radius + clearance
        for i in range(n):
            off = pts[i] - obs.center
            dist = float(np.linalg.norm(off))
            if dist > obs.radius + influence:
                continue
            if dist > reach:
                nrm = off / dist
            else:
                nrm = off - (off @ heading) * heading
                if np.linalg.norm(nrm) < 1e-6:
                    nrm = p0 - obs.center
                    nrm = nrm - (nrm @ heading) * heading
                if np.linalg.norm(nrm) < 1e-6:
                    nrm = np.cross(heading, [0.0, 0.0, 1.0])
                    if np.linalg.norm(nrm) < 1e-6:
                        nrm = np.cross(heading, [1.0, 0.0, 0.0])
                nrm = nrm / np.linalg.norm(nrm)
            row = np.zeros(3 * n)
            row[:3 * (i + 1)] = -np.kron(W[i, :i + 1], nrm)
            A.append(row)
            b.append(float(nrm @ (drift[i] - obs.center)) - reach)
    if not A:
        return np.zeros((0, 3 * n)), np.zeros(0)
    return np.array(A), np.array(b)


def position_row(model: DynamicsModel, n_steps: int, j: int) -> np.ndarray:
    """``F`` with ``p[j] = p0 + j dt v0 + F u`` over ``n_steps`` inputs (``1 <= j <= n_steps``)."""
    return np.kron(position_map(model, n_steps)[j - 1], np.eye(3))


def goal_steps(n_steps: int, arrival: int | None) -> list[int]:
    return [n_steps] if arrival is None or not 0 < arrival < n_steps else [arrival, n_steps]


def reach_program(model: DynamicsModel, s0: np.ndarray, n_steps: int, goal: Sphere,
                  u_box: tuple[float, float], reference: np.ndarray | None = None,
                  rows: tuple[np.ndarray, np.ndarray] | None = None,
                  arrival: int | None = None) -> ConvexProgram:
    """min ||u - reference||^2 over ``n_steps`` inputs that end inside ``goal``.

    ``rows`` adds linear constraints ``A u <= b`` (e.g. obstacle keep-outs);
    ``arrival`` additionally requires the goal at that earlier step.
    """
    n = 3 * n_steps
    ref = np.zeros(n) if reference is None else np.asarray(reference, dtype=float).reshape(n)
    balls = [Ball(position_row(model, n_steps, j), s0[:3] + j * model.dt * s0[3:] - goal.center,
                  goal.radius) for j in goal_steps(n_steps, arrival)]
    Ain, bin_ = rows if rows is not None and rows[0].shape[0] else (None, None)
    return ConvexProgram(
        P=2.0 * np.eye(n), q=-2.0 * ref, Ain=Ain, bin=bin_,
        lo=np.full(n, u_box[0]), hi=np.full(n, u_box[1]), balls=balls,
    )


def reach_inputs(model: DynamicsModel, s0: np.ndarray, n_steps: int, goal: Sphere,
                 u_box: tuple[float, float], reference: np.ndarray | None = None,
                 robot: int = 0, rows: tuple[np.ndarray, np.ndarray] | None = None,
                 arrival: int | None = None) -> np.ndarray:
    if n_steps == 0:
        if not goal.contains(s0[:3], 1e-6):
            raise MissionInfeasibleError(robot, "no steps left and not inside goal")
        return np.zeros((0, 3))
    res = solve(reach_program(model, s0, n_steps, goal, u_box, reference, rows, arrival))
    if not res.ok:
        raise MissionInfeasibleError(robot)
    return res.x.reshape(n_steps, 3)


def planning_goal(spec: MissionSpec, k: int, cfg: PlannerConfig | None) -> Sphere:
    """Goal ball the planner aims for: the real one shrunk by ``goal_margin``."""
    g = spec.goals[k]
    if cfg is None or cfg.goal_margin == 0:
        return g
    return Sphere(g.center, g.radius * (1.0 - cfg.goal_margin))


def plan_rows(spec: MissionSpec, k: int, s0: np.ndarray, reference: np.ndarray,
              cfg: PlannerConfig | None):
    if cfg is None or not cfg.avoid_obstacles or not spec.obstacles:
        return None
    return keepout_rows(DynamicsModel(spec.dt), s0, reference, spec.goals[k], spec.obstacles,
                        cfg.obstacle_margin, cfg.obstacle_influence)


def _start_state(spec: MissionSpec, k: int) -> np.ndarray:
    return np.concatenate([spec.starts[k], np.zeros(3)])


def initial_plan(spec: MissionSpec, cfg: PlannerConfig | None = None) -> TeamPlan:
    """Minimum-energy inputs per robot from rest to its goal, ignoring everyone else.

    With ``cfg`` the goal is shrunk by ``cfg.goal_margin``; obstacles are
    always ignored here.
    """
    model = DynamicsModel(spec.dt)
    inputs = [reach_inputs(model, _start_state(spec, k), spec.horizons[k],
                           planning_goal(spec, k, cfg), spec.u_box, robot=k,
                           arrival=cfg.arrival(spec.horizons[k]) if cfg else None)
              for k in range(spec.n_robots)]
    return TeamPlan(tuple(inputs), 0)


def solo_baseline(spec: MissionSpec, plan: TeamPlan | None = None) -> SoloBaseline:
    """Minimum energy of each robot flying alone to its real goal, obstacles ignored.

    ``plan`` may pass a precomputed :func:`initial_plan` without goal margin.
    """
    if plan is None:
        plan = initial_plan(spec)
    energies = np.array([np.sum(u * u) for u in plan.inputs])
    if np.any(energies <= 1e-12):
        k = int(np.argmin(energies))
        raise InvalidBaselineError(f"solo energy of robot {k} is zero (starts inside or at its goal)")
    return SoloBaseline(energies)


def _avoiding_inputs(spec: MissionSpec, k: int, s0: np.ndarray, reference: np.ndarray,
                     cfg: PlannerConfig | None) -> np.ndarray:
    """Inputs closest to ``reference`` that reach the planning goal around the obstacles.

    The keep-outs are linearised about the latest solution and the program
    is solved again, a few times (sequential convex programming): the
    first pass only picks a side, later passes straighten the detour.
    """
    model = DynamicsModel(spec.dt)
    n_free = reference.shape[0]
    goal = planning_goal(spec, k, cfg)
    arrival = cfg.arrival(n_free) if cfg else None
    about, new = reference, None
    iters = cfg.scp_iters if cfg is not None and cfg.avoid_obstacles and spec.obstacles else 1
    for _ in range(iters):
        rows = plan_rows(spec, k, s0, about, cfg)
        try:
            new = reach_inputs(model, s0, n_free, goal, spec.u_box, reference, k, rows, arrival)
        except MissionInfeasibleError:
            if new is None:
                raise
            break   # keep the last feasible pass
        if rows is None or np.max(np.abs(new - about)) <= 1e-6:
            break
        about = new
    return new


def repair_plan(spec: MissionSpec, plan: TeamPlan, states: np.ndarray, t: int,
                cfg: PlannerConfig | None = None) -> tuple[TeamPlan, list[int]]:
    """Project each robot's remaining inputs onto its reach set from ``states``.

    With ``cfg`` the reach set uses the planning goal and, if enabled, the
    obstacle keep-outs (see :func:`_avoiding_inputs`); when those make it
    empty the plain goal constraint is tried.  Returns the repaired plan
    and the robots for which no reaching input sequence exists any more;
    those keep their previous suffix.
    """
    model = DynamicsModel(spec.dt)
    inputs = list(plan.inputs)
    stuck = []
    for k in range(plan.n_robots):
        n_free = spec.horizons[k] - t
        if n_free <= 0:
            continue
        suffix = inputs[k][t:]
        new = None
        try:
            new = _avoiding_inputs(spec, k, states[k], suffix, cfg)
        except MissionInfeasibleError:
            try:
                new = reach_inputs(model, states[k], n_free, spec.goals[k], spec.u_box, suffix, k)
            except MissionInfeasibleError:
                pass
        if new is None:
            stuck.append(k)
            continue
        u = inputs[k].copy()
        u[t:] = new
        inputs[k] = u
    return TeamPlan(tuple(inputs), t), stuck


# --- local problem and the iteration ---------------------------------------------

def local_problem(k: int, plan: TeamPlan, direction: np.ndarray, cfg: PlannerConfig,
                  spec: MissionSpec, executed_prefix: int,
                  rows: tuple[np.ndarray, np.ndarray] | None = None) -> ConvexProgram:
    """Descent program of robot ``k`` over ``eps`` on its free steps.

    Minimises ``-eps' direction + kappa ||eps||^2`` subject to the input box
    on ``u + eps``, the descent box, and reaching the goal at the horizon.
    Executed steps are not variables, which pins the prefix.  Pass
    ``direction = -grad`` for a descent step.  ``rows`` are extra
    half-spaces ``A u <= b`` on the free inputs (obstacle keep-outs).
    """
    model = DynamicsModel(spec.dt)
    t = executed_prefix
    u = plan.inputs[k]
    n_free = u.shape[0] - t
    d = np.asarray(direction, dtype=float).reshape(-1)
    if d.size != 3 * n_free:
        raise ValueError(f"direction has {d.size} entries, expected {3 * n_free}")
    free = u[t:].reshape(-1)
    lo = np.maximum(cfg.eps_min, spec.u_box[0] - free)
    hi = np.minimum(cfg.eps_max, spec.u_box[1] - free)
    s_t = rollout(model, _start_state(spec, k), u[:t]).states[-1]
    balls = []
    for j in goal_steps(n_free, cfg.arrival(n_free)):
        F = position_row(model, n_free, j)
        p_j = s_t[:3] + j * model.dt * s_t[3:] + F @ free
        goal = planning_goal(spec, k, cfg)
        if np.linalg.norm(p_j - goal.center) > goal.radius + 1e-6:
            if j < n_free:
                continue        # early arrival already lost; keep only the deadline
            goal = spec.goals[k]   # plan only reaches the real goal; keep it there
        balls.append(Ball(F, p_j - goal.center, goal.radius))
    Ain = bin_ = None
    if rows is not None and rows[0].shape[0]:
        # u + eps must stay in the half-spaces; rows the current plan already
        # violates are dropped so that eps = 0 stays feasible
        A, b = rows
        slack = b - A @ free
        keep = slack >= -1e-9
        if keep.any():
            Ain, bin_ = A[keep], np.maximum(slack[keep], 0.0)
    return ConvexProgram(
        P=2.0 * cfg.kappa * np.eye(3 * n_free), q=-d, Ain=Ain, bin=bin_,
        lo=lo, hi=hi, balls=balls,
    )


@dataclass
class IterationTrace:
    iteration: int
    objective: float
    step_norm: float
    statuses: tuple[str, ...]


def team_objective(notion: FairnessNotion, plan: TeamPlan, baseline: SoloBaseline | None) -> float:
    """Notion value; a lone robot only has the energy term (its variance is zero)."""
    if plan.n_robots >= 2:
        return evaluate(notion, plan, baseline)
    if notion.uses_energy_term:
        u = plan.flat()
        return notion.beta * float(u @ (u if notion.Q is None else notion.Q @ u))
    return 0.0


def plan_fair(spec: MissionSpec, notion: FairnessNotion | None, baseline: SoloBaseline | None,
              initial: TeamPlan, executed_prefix: int | None = None,
              cfg: PlannerConfig | None = None, frozen: Iterable[int] = (),
              trace: list | None = None) -> TeamPlan:
    """Run the distributed descent from ``initial`` and return the fair plan.

    With ``cfg.backtracking`` the scheduled step ``gamma(r)`` is halved
    until the team objective does not increase; the local programs are not
    re-solved, and since both endpoints are feasible so is every shrunken
    step.  Robots listed in ``frozen`` keep their inputs (used when their
    reach set is empty).  Per-iteration records go to ``trace`` if given.
    """
    if cfg is None:
        cfg = PlannerConfig.for_notion(notion)
    t = initial.prefix_len if executed_prefix is None else executed_prefix
    plan = TeamPlan(initial.inputs, t)
    if notion is None or cfg.max_iters == 0:
        return plan
    frozen = set(frozen)
    n = plan.n_robots
    model = DynamicsModel(spec.dt)
    rows = []
    for k in range(n):
        if k in frozen or plan.inputs[k].shape[0] <= t:
            rows.append(None)
            continue
        s_t = rollout(model, _start_state(spec, k), plan.inputs[k][:t]).states[-1]
        rows.append(plan_rows(spec, k, s_t, plan.inputs[k][t:], cfg))
    f_cur = team_objective(notion, plan, baseline)
    for r in range(1, cfg.max_iters + 1):
        grads = team_gradient(notion, plan, baseline)
        eps = [None] * n
        statuses = []
        for k in range(n):
            if k in frozen or plan.inputs[k].shape[0] <= t:
                statuses.append("skip")
                continue
            prog = local_problem(k, plan, -grads[k][t:].reshape(-1), cfg, spec, t, rows[k])
            res = solve(prog)
            if not res.ok:
                raise LocalSolveError(k, r, res.status)
            statuses.append(res.status.value)
            # eps = 0 is feasible with value 0; anything no better is solver noise
            x = res.x if prog.objective(res.x) < 0.0 else np.zeros_like(res.x)
            eps[k] = x.reshape(-1, 3)
        gamma = cfg.step_size(r)
        while True:
            cand = []
            for k in range(n):
                u = plan.inputs[k].copy()
                if eps[k] is not None:
                    u[t:] += gamma * eps[k]
                cand.append(u)
            cand_plan = TeamPlan(tuple(cand), t)
            f_new = team_objective(notion, cand_plan, baseline)
            if not cfg.backtracking or f_new <= f_cur or gamma < 1e-12:
                break
            gamma *= 0.5
        if cfg.backtracking and f_new > f_cur:
            # no decrease along the joint step: stationary up to round-off
            if trace is not None:
                trace.append(IterationTrace(r, f_cur, 0.0, tuple(statuses)))
            break
        step_norm = gamma * float(np.sqrt(sum(np.sum(e * e) for e in eps if e is not None)))
        plan, f_cur = cand_plan, f_new
        if trace is not None:
            trace.append(IterationTrace(r, f_cur, step_norm, tuple(statuses)))
        if step_norm <= cfg.eta:
            break
    return plan


def write_trace_csv(trace: list[IterationTrace], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "objective", "step_norm", "statuses"])
        for row in trace:
            w.writerow([row.iteration, repr(float(row.objective)), repr(float(row.step_norm)),
                        "|".join(row.statuses)])
