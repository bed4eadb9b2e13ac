"""Experiment sweeps: scenario seeding, paired FiReFly/baseline trials, aggregation."""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .fair_planner import PlannerConfig, solo_baseline
from .fairness import InvalidBaselineError, SoloBaseline, normalized_energy, notion_for
from .firefly_loop import RunConfig, RunRecord, run, run_baseline
from .metrics import Comparison, compare, improvement_rate, mission_success, runtime_table
from .mission import ExperimentKind, MissionSpec, ScenarioSeed, generate
from .safe_control import Mode, SafetyConfig

log = logging.getLogger(__name__)

NOTIONS = ("f1", "f2", "f3", "f4")
MODES = ("central", "distributed")
THREADS_ENV = "FIREFLY_THREADS"


def trial_seed(base_seed: int, trial: int) -> int:
    """Scenario seed of one trial; all randomness of a sweep derives from ``base_seed``."""
    return int(np.random.SeedSequence([base_seed, trial]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class Trial:
    """One scenario of a sweep and everything that is run on it."""

    kind: ExperimentKind
    index: int
    base_seed: int
    n_robots: int
    n_obstacles: int
    notions: tuple[str, ...] = NOTIONS
    modes: tuple[str, ...] = MODES
    replan_every: int = 1
    eta: float | None = None

    @property
    def seed(self) -> ScenarioSeed:
        return ScenarioSeed(trial_seed(self.base_seed, self.index), self.n_robots,
                            self.n_obstacles, self.kind)

    @property
    def name(self) -> str:
        tag = "exp1" if self.kind is ExperimentKind.OBSTACLE_SWEEP else "exp2"
        return f"{tag}_n{self.n_robots}_o{self.n_obstacles}_t{self.index:03d}"

    def spec(self) -> MissionSpec:
        return generate(self.seed)

    def run_config(self, notion: str | None, mode: str) -> RunConfig:
        n = notion_for(notion)
        pcfg = PlannerConfig.for_notion(n, **({} if self.eta is None else {"eta": self.eta}))
        return RunConfig(n, pcfg, SafetyConfig.for_mode(mode), self.replan_every)


@dataclass
class TrialResult:
    trial: Trial
    spec: MissionSpec
    baseline: RunRecord
    runs: dict[tuple[str, str], RunRecord] = field(default_factory=dict)
    comparisons: dict[tuple[str, str], Comparison] = field(default_factory=dict)
    solo: SoloBaseline | None = None

    def records(self) -> list[RunRecord]:
        return [self.baseline, *self.runs.values()]


def run_trial(trial: Trial) -> TrialResult:
    """Baseline plus every requested notion x safe mode on the trial's scenario."""
    spec = trial.spec()
    base = run_baseline(spec, RunConfig(safety=SafetyConfig.central(),
                                        replan_every=trial.replan_every))
    try:
        solo = solo_baseline(spec)
    except InvalidBaselineError as exc:
        log.warning("%s: no fairness comparison possible: %s", trial.name, exc)
        solo = None
    out = TrialResult(trial, spec, base, solo=solo)
    for notion in trial.notions:
        for mode in trial.modes:
            rec = run(spec, trial.run_config(notion, mode), solo)
            out.runs[(notion, mode)] = rec
            if solo is not None and spec.n_robots >= 2:
                out.comparisons[(notion, mode)] = compare(rec, base, notion_for(notion), solo)
    return out


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring %s=%r", THREADS_ENV, raw)
        return 1


def run_trials(trials: Sequence[Trial], workers: int | None = None,
               on_done: Callable[[TrialResult], None] | None = None) -> list[TrialResult]:
    """Run trials, in worker processes when ``workers > 1``; results keep input order."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(trials) <= 1:
        results = []
        for t in trials:
            results.append(run_trial(t))
            if on_done:
                on_done(results[-1])
        return results
    with ProcessPoolExecutor(max_workers=min(workers, len(trials))) as pool:
        results = list(pool.map(run_trial, trials))
    if on_done:
        for r in results:
            on_done(r)
    return results


def experiment1_trials(trials: int, obstacles: Iterable[int], base_seed: int = 0,
                       modes: Sequence[str] = MODES, notions: Sequence[str] = NOTIONS,
                       replan_every: int = 1, eta: float | None = None) -> list[Trial]:
    out = []
    for n_obs in obstacles:
        for i in range(trials):
            # the scenario rng also mixes in the obstacle count, so counts get distinct draws
            out.append(Trial(ExperimentKind.OBSTACLE_SWEEP, i, base_seed, 5, n_obs,
                             tuple(notions), tuple(modes), replan_every, eta))
    return out


def experiment2_trials(trials: int, sizes: Iterable[int], base_seed: int = 0,
                       modes: Sequence[str] = ("distributed",), notions: Sequence[str] = NOTIONS,
                       replan_every: int = 1, eta: float | None = None) -> list[Trial]:
    return [Trial(ExperimentKind.TEAM_SWEEP, i, base_seed, n, 1, tuple(notions), tuple(modes),
                  replan_every, eta)
            for n in sizes for i in range(trials)]


# --- aggregation -------------------------------------------------------------

@dataclass(frozen=True)
class GroupStats:
    """Success and improvement of one (notion, mode) arm over a set of trials."""

    label: str
    success_rate: float
    improvement_rate: float | None
    n_trials: int


def arm_stats(results: Sequence[TrialResult], notion: str, mode: str) -> GroupStats:
    recs = [r.runs[(notion, mode)] for r in results if (notion, mode) in r.runs]
    comps = [r.comparisons[(notion, mode)] for r in results if (notion, mode) in r.comparisons]
    return GroupStats(f"{notion}-{mode}", mission_success(recs),
                      improvement_rate(comps) if comps else None, len(recs))


def baseline_stats(results: Sequence[TrialResult]) -> GroupStats:
    return GroupStats("baseline", mission_success([r.baseline for r in results]), None,
                      len(results))


SUMMARY_COLUMNS = ["trial", "scenario", "n_robots", "n_obstacles", "label", "notion", "mode",
                   "reached", "success", "min_h", "f_firefly", "f_baseline", "improved",
                   "replan_every", "tracking_only", "fair_plans", "max_planner_iterations",
                   "fair_time_mean", "safe_time_mean"]


def summary_rows(result: TrialResult) -> list[dict]:
    t = result.trial
    tracking_only = t.replan_every > result.spec.max_horizon

    def row(rec: RunRecord, notion: str, mode: str, comp: Comparison | None) -> dict:
        return {
            "trial": t.index, "scenario": t.name, "n_robots": t.n_robots,
            "n_obstacles": len(result.spec.obstacles), "label": rec.label,
            "notion": notion, "mode": mode, "reached": rec.reached_count(),
            "success": rec.reached_count() / rec.n_robots, "min_h": rec.min_h(),
            "f_firefly": "" if comp is None else comp.f_firefly,
            "f_baseline": "" if comp is None else comp.f_baseline,
            "improved": "" if comp is None else str(comp.improved).lower(),
            "replan_every": t.replan_every, "tracking_only": str(tracking_only).lower(),
            "fair_plans": rec.n_fair_plans,
            "max_planner_iterations": max(rec.planner_iterations, default=0),
            "fair_time_mean": float(rec.fair_time.mean()) if rec.n_steps else 0.0,
            "safe_time_mean": float(rec.safe_time.mean()) if rec.n_steps else 0.0,
        }

    rows = [row(result.baseline, "none", Mode.CENTRAL.value, None)]
    for (notion, mode), rec in result.runs.items():
        rows.append(row(rec, notion, mode, result.comparisons.get((notion, mode))))
    return rows


def write_summary_csv(results: Sequence[TrialResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        w.writeheader()
        for r in results:
            w.writerows(summary_rows(r))


def experiment_report(results: Sequence[TrialResult]) -> str:
    """Human-readable success and improvement table per arm."""
    if not results:
        return "no trials"
    arms = sorted({key for r in results for key in r.runs})
    lines = [f"{'arm':<18} {'success':>8} {'improved':>9} {'trials':>7}"]
    b = baseline_stats(results)
    lines.append(f"{b.label:<18} {b.success_rate:8.3f} {'-':>9} {b.n_trials:7d}")
    for notion, mode in arms:
        s = arm_stats(results, notion, mode)
        imp = "-" if s.improvement_rate is None else f"{s.improvement_rate:.3f}"
        lines.append(f"{s.label:<18} {s.success_rate:8.3f} {imp:>9} {s.n_trials:7d}")
    return "\n".join(lines)


def team_runtime_rows(results: Sequence[TrialResult]):
    """Runtime table over all FiReFly runs (baseline excluded), grouped by team size."""
    return runtime_table(rec for r in results for rec in r.runs.values())


def executed_energies(result: TrialResult) -> dict[str, np.ndarray]:
    if result.solo is None:
        return {}
    out = {"baseline": normalized_energy(result.baseline.executed_plan(), result.solo)}
    for (notion, mode), rec in result.runs.items():
        out[f"{notion}-{mode}"] = normalized_energy(rec.executed_plan(), result.solo)
    return out
