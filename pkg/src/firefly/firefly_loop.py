"""Receding-horizon driver: plan fair, filter safe, execute one step, repeat."""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import DynamicsModel
from .fair_planner import (LocalSolveError, MissionInfeasibleError, PlannerConfig, plan_fair,
                           planning_goal, reach_inputs, repair_plan, solo_baseline)
from .fairness import (FairnessNotion, InvalidBaselineError, SoloBaseline, TeamPlan, evaluate,
                       normalized_energy, notion_for)
from .mission import MissionSpec
from .safe_control import BarrierReport, SafetyConfig, SafetyInfeasibleError, barriers, safe_step

log = logging.getLogger(__name__)

REACH_TOL = 1e-6


class Outcome(enum.Enum):
    REACHED = "reached"
    NOT_REACHED = "not-reached"
    FAILED_SAFE = "failed-safe"
    MISSION_INFEASIBLE = "mission-infeasible"


@dataclass(frozen=True)
class RobotStatus:
    outcome: Outcome
    step: int | None = None

    def __str__(self):
        return f"reached@{self.step}" if self.outcome is Outcome.REACHED else self.outcome.value

    def reached_by(self, horizon: int) -> bool:
        return self.outcome is Outcome.REACHED and self.step <= horizon


@dataclass(frozen=True)
class RunConfig:
    notion: FairnessNotion | None = None
    planner: PlannerConfig | None = None
    safety: SafetyConfig = field(default_factory=SafetyConfig.central)
    replan_every: int = 1
    record_traces: bool = False
    seed: int = 0
    baseline: bool = False   # track the initial min-energy plan, never optimise fairness

    def __post_init__(self):
        object.__setattr__(self, "notion", notion_for(self.notion))
        if self.replan_every < 1:
            raise ValueError("replan_every must be >= 1")

    def planner_config(self) -> PlannerConfig:
        return self.planner or PlannerConfig.for_notion(self.notion)

    @property
    def label(self) -> str:
        if self.baseline:
            return "baseline"
        return f"{self.notion.name if self.notion else 'none'}-{self.safety.mode.value}"


@dataclass
class RunRecord:
    spec_id: str
    label: str
    states: np.ndarray          # (N, T+1, 6)
    inputs: np.ndarray          # (N, T, 3) executed (safe) inputs
    fair_inputs: np.ndarray     # (N, T, 3) fair inputs the filter started from
    reports: list[BarrierReport]  # one per state 0..T
    deltas: np.ndarray          # (T,) largest CLF slack per step
    replanned: np.ndarray       # (T,) bool
    planner_iterations: list[int]
    statuses: list[RobotStatus]
    fair_time: np.ndarray       # (T,) seconds
    safe_time: np.ndarray       # (T,) seconds
    step_time: np.ndarray       # (T,) seconds
    prefix_hashes: list[str]
    horizons: tuple[int, ...]
    fairness_active: bool = True
    failed_safe_steps: list[int] = field(default_factory=list)
    traces: list = field(default_factory=list)

    @property
    def n_robots(self) -> int:
        return self.states.shape[0]

    @property
    def n_steps(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_fair_plans(self) -> int:
        return len(self.planner_iterations)

    def executed_plan(self) -> TeamPlan:
        return TeamPlan(tuple(self.inputs[k] for k in range(self.n_robots)), self.n_steps)

    def h_series(self) -> np.ndarray:
        return np.array([r.h for r in self.reports])

    def min_h(self) -> float:
        return float(self.h_series().min())

    def reached_count(self) -> int:
        return sum(s.reached_by(h) for s, h in zip(self.statuses, self.horizons))

    def outcome_key(self):
        """Everything except wall-clock fields, for determinism checks."""
        return (self.spec_id, self.label, self.states.tobytes(), self.inputs.tobytes(),
                self.fair_inputs.tobytes(), self.deltas.tobytes(), self.replanned.tobytes(),
                tuple(self.planner_iterations), tuple(map(str, self.statuses)),
                tuple(self.prefix_hashes))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "robot", "px", "py", "pz", "vx", "vy", "vz", "ax", "ay", "az",
                        "h", "V", "delta", "replanned"])
            for t in range(self.n_steps):
                rep = self.reports[t]
                for k in range(self.n_robots):
                    nums = [*self.states[k, t], *self.inputs[k, t], rep.h, rep.V, self.deltas[t]]
                    w.writerow([t, k, *(repr(float(x)) for x in nums), int(self.replanned[t])])

    def summary(self, notion: FairnessNotion | None = None,
                baseline: SoloBaseline | None = None) -> dict:
        doc = {
            "spec": self.spec_id,
            "label": self.label,
            "steps": self.n_steps,
            "statuses": [str(s) for s in self.statuses],
            "reached": self.reached_count(),
            "min_h": self.min_h(),
            "fair_plans": self.n_fair_plans,
            "planner_iterations": self.planner_iterations,
            "failed_safe_steps": self.failed_safe_steps,
            "timing": {
                "fair_mean": float(self.fair_time.mean()) if self.n_steps else 0.0,
                "fair_max": float(self.fair_time.max(initial=0.0)),
                "safe_mean": float(self.safe_time.mean()) if self.n_steps else 0.0,
                "safe_max": float(self.safe_time.max(initial=0.0)),
            },
        }
        if baseline is not None:
            plan = self.executed_plan()
            doc["energies"] = normalized_energy(plan, baseline).tolist()
            if notion is not None and self.n_robots >= 2:
                doc["fairness"] = {"notion": notion.name, "executed": evaluate(notion, plan, baseline)}
        return doc


def _prefix_hash(inputs: np.ndarray, t: int) -> str:
    return hashlib.sha256(np.ascontiguousarray(inputs[:, :t]).tobytes()).hexdigest()[:16]


def run(spec: MissionSpec, cfg: RunConfig, baseline: SoloBaseline | None = None) -> RunRecord:
    """Fly the mission once and record everything.

    Fair re-planning happens at steps where ``t % replan_every == 0``; in
    between, the last fair plan is tracked.  Errors from planning or the
    safety filter end up in the record instead of propagating.
    """
    model = DynamicsModel(spec.dt)
    n, T = spec.n_robots, spec.max_horizon
    states = np.zeros((n, T + 1, 6))
    states[:, 0, :3] = spec.starts
    inputs = np.zeros((n, T, 3))
    fair_inputs = np.zeros((n, T, 3))
    deltas = np.zeros(T)
    replanned = np.zeros(T, dtype=bool)
    fair_time, safe_time, step_time = np.zeros(T), np.zeros(T), np.zeros(T)
    reports = [barriers(spec, states[:, 0])]
    iterations: list[int] = []
    prefix_hashes: list[str] = []
    traces: list = []
    failed_steps: list[int] = []
    flagged = np.zeros(n, dtype=bool)
    infeasible = np.zeros(n, dtype=bool)

    pcfg = cfg.planner_config()
    plan_inputs = []
    for k in range(n):
        try:
            plan_inputs.append(reach_inputs(model, states[k, 0], spec.horizons[k],
                                            planning_goal(spec, k, pcfg), spec.u_box, robot=k))
        except MissionInfeasibleError:
            try:
                plan_inputs.append(reach_inputs(model, states[k, 0], spec.horizons[k],
                                                spec.goals[k], spec.u_box, robot=k))
            except MissionInfeasibleError:
                infeasible[k] = True
                plan_inputs.append(np.zeros((spec.horizons[k], 3)))
    plan = TeamPlan(tuple(plan_inputs), 0)

    fairness_active = cfg.notion is not None and not cfg.baseline and not infeasible.any()
    if fairness_active and baseline is None:
        try:
            baseline = solo_baseline(spec)
        except InvalidBaselineError as exc:
            log.info("fairness disabled: %s", exc)
            fairness_active = False

    reached = [0 if spec.goals[k].contains(spec.starts[k], REACH_TOL) else None for k in range(n)]
    t_exec = 0
    for t in range(T):
        if all(r is not None for r in reached):
            break
        t0 = time.perf_counter()
        # robots that reached keep the fair plan they reached with
        frozen = [k for k in range(n) if infeasible[k] or reached[k] is not None]
        if fairness_active and t % cfg.replan_every == 0:
            replanned[t] = True
            active = [k for k in range(n) if k not in frozen]
            repaired, stuck = repair_plan(spec, plan, states[:, t], t, pcfg)
            plan = TeamPlan(tuple(repaired.inputs[k] if k in active else plan.inputs[k]
                                  for k in range(n)), plan.prefix_len)
            frozen = sorted(set(frozen) | set(stuck))
            trace: list = []
            try:
                plan = plan_fair(spec, cfg.notion, baseline, plan, t, pcfg, frozen, trace)
            except LocalSolveError as exc:
                log.warning("fair planning failed at t=%d: %s", t, exc)
            iterations.append(len(trace))
            if cfg.record_traces:
                traces.append((t, trace))
        t1 = time.perf_counter()
        uf = np.array([plan.inputs[k][t] if t < plan.inputs[k].shape[0] else np.zeros(3)
                       for k in range(n)])
        try:
            step = safe_step(spec, states[:, t], uf, cfg.safety)
            u = step.u_safe
            deltas[t] = step.max_delta
        except SafetyInfeasibleError as exc:
            # zero acceleration always lies in the box
            u = np.zeros((n, 3))
            failed_steps.append(t)
            if exc.robot is None:
                flagged |= np.array([r is None for r in reached])
            else:
                flagged[exc.robot] = True
        t2 = time.perf_counter()
        fair_inputs[:, t] = uf
        inputs[:, t] = u
        for k in range(n):
            states[k, t + 1] = model.A @ states[k, t] + model.B @ u[k]
            if t < plan.inputs[k].shape[0]:
                plan.inputs[k][t] = u[k]
        plan = TeamPlan(plan.inputs, min(t + 1, min(x.shape[0] for x in plan.inputs)))
        prefix_hashes.append(_prefix_hash(inputs, t + 1))
        reports.append(barriers(spec, states[:, t + 1]))
        for k in range(n):
            if reached[k] is None and spec.goals[k].contains(states[k, t + 1, :3], REACH_TOL):
                reached[k] = t + 1
        t3 = time.perf_counter()
        fair_time[t], safe_time[t], step_time[t] = t1 - t0, t2 - t1, t3 - t0
        t_exec = t + 1

    statuses = []
    for k in range(n):
        if reached[k] is not None:
            statuses.append(RobotStatus(Outcome.REACHED, reached[k]))
        elif infeasible[k]:
            statuses.append(RobotStatus(Outcome.MISSION_INFEASIBLE))
        elif flagged[k]:
            statuses.append(RobotStatus(Outcome.FAILED_SAFE))
        else:
            statuses.append(RobotStatus(Outcome.NOT_REACHED))

    return RunRecord(
        spec_id=spec.fingerprint(), label=cfg.label,
        states=states[:, :t_exec + 1].copy(), inputs=inputs[:, :t_exec].copy(),
        fair_inputs=fair_inputs[:, :t_exec].copy(), reports=reports,
        deltas=deltas[:t_exec].copy(), replanned=replanned[:t_exec].copy(),
        planner_iterations=iterations, statuses=statuses,
        fair_time=fair_time[:t_exec].copy(), safe_time=safe_time[:t_exec].copy(),
        step_time=step_time[:t_exec].copy(), prefix_hashes=prefix_hashes,
        horizons=spec.horizons, fairness_active=fairness_active,
        failed_safe_steps=failed_steps, traces=traces,
    )


def run_baseline(spec: MissionSpec, cfg: RunConfig | None = None) -> RunRecord:
    """Track the initial min-energy plan through the safety filter; no fairness."""
    cfg = cfg or RunConfig()
    return run(spec, RunConfig(None, cfg.planner, cfg.safety, cfg.replan_every,
                               cfg.record_traces, cfg.seed, baseline=True))


def write_summary(record: RunRecord, path, notion=None, baseline=None) -> None:
    Path(path).write_text(json.dumps(record.summary(notion, baseline), indent=2))
