"""Experiment statistics: mission success, fairness improvement, runtimes."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .fairness import FairnessNotion, SoloBaseline, evaluate, normalized_energy
from .firefly_loop import RunRecord


class MetricError(ValueError):
    """A statistic is undefined for the given records."""


class ComparisonError(MetricError):
    """Two records that should describe the same mission do not."""


def mission_success(records: Sequence[RunRecord]) -> float:
    """Fraction of robots, over all records, that reached their goal by their own deadline."""
    if not records:
        raise MetricError("mission success of an empty record set is undefined")
    reached = sum(r.reached_count() for r in records)
    total = sum(r.n_robots for r in records)
    if total == 0:
        raise MetricError("records contain no robots")
    return reached / total


@dataclass(frozen=True)
class Comparison:
    """FiReFly vs baseline on one scenario, on the executed inputs."""

    spec_id: str
    f_firefly: float
    f_baseline: float
    e_firefly: np.ndarray
    e_baseline: np.ndarray

    @property
    def improved(self) -> bool:
        return self.f_firefly < self.f_baseline


def compare(firefly: RunRecord, baseline: RunRecord, notion: FairnessNotion,
            solo: SoloBaseline) -> Comparison:
    """Evaluate ``notion`` on both executed input sequences with the same solo energies."""
    if firefly.spec_id != baseline.spec_id:
        raise ComparisonError("records come from different mission specs")
    pf, pb = firefly.executed_plan(), baseline.executed_plan()
    return Comparison(firefly.spec_id, evaluate(notion, pf, solo), evaluate(notion, pb, solo),
                      normalized_energy(pf, solo), normalized_energy(pb, solo))


def fairness_improvement(firefly: RunRecord, baseline: RunRecord, notion: FairnessNotion,
                         solo: SoloBaseline) -> bool:
    """True iff the notion is strictly lower on FiReFly's executed inputs."""
    return compare(firefly, baseline, notion, solo).improved


def improvement_rate(comparisons: Sequence[Comparison]) -> float:
    if not comparisons:
        raise MetricError("improvement rate of no trials is undefined")
    return sum(c.improved for c in comparisons) / len(comparisons)


@dataclass(frozen=True)
class RuntimeStats:
    mean: float
    std: float
    max: float

    @classmethod
    def of(cls, samples: Iterable[float]) -> "RuntimeStats":
        x = np.asarray(list(samples), dtype=float)
        if x.size == 0:
            return cls(0.0, 0.0, 0.0)
        return cls(float(x.mean()), float(x.std()), float(x.max()))


@dataclass(frozen=True)
class RuntimeRow:
    n_robots: int
    fair: RuntimeStats
    safe: RuntimeStats


def runtime_table(records: Iterable[RunRecord]) -> list[RuntimeRow]:
    """Per-step planner and safety-filter times grouped by team size, ascending.

    Only steps at which the planner actually ran count towards its
    statistics; the filter runs every step.
    """
    fair: dict[int, list[float]] = {}
    safe: dict[int, list[float]] = {}
    for r in records:
        fair.setdefault(r.n_robots, []).extend(r.fair_time[r.replanned].tolist()
                                               if r.replanned.any() else [])
        safe.setdefault(r.n_robots, []).extend(r.safe_time.tolist())
    return [RuntimeRow(n, RuntimeStats.of(fair[n]), RuntimeStats.of(safe[n])) for n in sorted(fair)]


@dataclass
class ExperimentSummary:
    label: str
    success_rate: float
    fairness_improvement_rate: float | None
    trials: list[Comparison] = field(default_factory=list)
    runtimes: list[RuntimeRow] = field(default_factory=list)

    def __post_init__(self):
        for rate in (self.success_rate, self.fairness_improvement_rate):
            if rate is not None and not 0.0 <= rate <= 1.0:
                raise MetricError("rates must lie in [0, 1]")


def summarize(label: str, records: Sequence[RunRecord],
              comparisons: Sequence[Comparison] = ()) -> ExperimentSummary:
    return ExperimentSummary(
        label=label,
        success_rate=mission_success(records),
        fairness_improvement_rate=improvement_rate(comparisons) if comparisons else None,
        trials=list(comparisons),
        runtimes=runtime_table(records),
    )


def write_runtime_csv(rows: Sequence[RuntimeRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n_robots", "fair_mean", "fair_std", "fair_max", "safe_mean", "safe_std", "safe_max"])
        for r in rows:
            w.writerow([r.n_robots, r.fair.mean, r.fair.std, r.fair.max,
                        r.safe.mean, r.safe.std, r.safe.max])


def format_runtime_table(rows: Sequence[RuntimeRow]) -> str:
    """Plain-text table: team size, then mean/std/max for planner and filter."""
    head = (f"{'':>8} | {'Fair Planner Runtime':^26} | {'Safe Control Runtime':^26}\n"
            f"{'# UAVs':>8} | {'mean':>8} {'std':>8} {'max':>8} | {'mean':>8} {'std':>8} {'max':>8}")
    lines = [head, "-" * len(head.splitlines()[1])]
    for r in rows:
        lines.append(f"{r.n_robots:>8} | {r.fair.mean:8.3f} {r.fair.std:8.3f} {r.fair.max:8.3f} | "
                     f"{r.safe.mean:8.3f} {r.safe.std:8.3f} {r.safe.max:8.3f}")
    return "\n".join(lines)
