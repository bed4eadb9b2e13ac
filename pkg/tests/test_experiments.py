import csv

import numpy as np
import pytest

from firefly import experiments
from firefly.experiments import (SUMMARY_COLUMNS, Trial, experiment1_trials, experiment2_trials,
                                 experiment_report, run_trial, run_trials, summary_rows,
                                 trial_seed, worker_count, write_summary_csv)
from firefly.mission import ExperimentKind


@pytest.fixture(scope="module")
def small_result():
    trial = Trial(ExperimentKind.OBSTACLE_SWEEP, 0, 7, 5, 2, notions=("f1", "f3"), modes=("central",))
    return run_trial(trial)


def test_trial_seeds_are_deterministic_and_distinct():
    seeds = [trial_seed(0, i) for i in range(50)]
    assert seeds == [trial_seed(0, i) for i in range(50)]
    assert len(set(seeds)) == 50
    assert trial_seed(1, 0) != trial_seed(0, 0)


def test_experiment1_grid():
    trials = experiment1_trials(3, range(1, 6))
    assert len(trials) == 15
    assert {(t.n_obstacles, t.index) for t in trials} == {(o, i) for o in range(1, 6) for i in range(3)}
    assert all(t.n_robots == 5 and t.modes == ("central", "distributed") for t in trials)
    assert trials[0].name == "exp1_n5_o1_t000"


def test_experiment2_grid_defaults_to_distributed():
    trials = experiment2_trials(2, [7, 10])
    assert [t.n_robots for t in trials] == [7, 7, 10, 10]
    assert all(t.modes == ("distributed",) and t.n_obstacles == 1 for t in trials)
    spec = trials[0].spec()
    assert spec.n_robots == 7 and len(spec.obstacles) == 1


def test_eta_override_reaches_the_planner():
    t = Trial(ExperimentKind.OBSTACLE_SWEEP, 0, 0, 5, 1, eta=0.01)
    assert t.run_config("f3", "central").planner_config().eta == 0.01
    assert Trial(ExperimentKind.OBSTACLE_SWEEP, 0, 0, 5, 1).run_config("f3", "central") \
        .planner_config().eta == 0.1


def test_run_trial_pairs_every_arm_with_the_baseline(small_result):
    r = small_result
    assert set(r.runs) == {("f1", "central"), ("f3", "central")}
    assert set(r.comparisons) == set(r.runs)
    assert r.baseline.label == "baseline"
    for key, comp in r.comparisons.items():
        assert comp.spec_id == r.baseline.spec_id == r.runs[key].spec_id
    assert len(r.records()) == 3


def test_summary_rows_and_csv(tmp_path, small_result):
    rows = summary_rows(small_result)
    assert len(rows) == 3 and all(set(row) == set(SUMMARY_COLUMNS) for row in rows)
    assert rows[0]["label"] == "baseline" and rows[0]["improved"] == ""
    assert rows[1]["improved"] in ("true", "false")
    write_summary_csv([small_result], tmp_path / "s.csv")
    back = list(csv.DictReader(open(tmp_path / "s.csv")))
    assert [r["label"] for r in back] == [r["label"] for r in rows]


def test_report_lists_every_arm(small_result):
    text = experiment_report([small_result])
    assert "baseline" in text and "f1-central" in text and "f3-central" in text
    assert experiment_report([]) == "no trials"


def test_parallel_matches_sequential():
    trials = experiment1_trials(2, [1], base_seed=3, modes=("central",), notions=("f2",))
    seq = run_trials(trials, workers=1)
    par = run_trials(trials, workers=2)
    for a, b in zip(seq, par):
        assert a.baseline.outcome_key() == b.baseline.outcome_key()
        assert a.runs[("f2", "central")].outcome_key() == b.runs[("f2", "central")].outcome_key()


def test_worker_count_env(monkeypatch):
    monkeypatch.delenv(experiments.THREADS_ENV, raising=False)
    assert worker_count() == 1
    monkeypatch.setenv(experiments.THREADS_ENV, "4")
    assert worker_count() == 4
    monkeypatch.setenv(experiments.THREADS_ENV, "lots")
    assert worker_count() == 1


def test_energies_of_every_arm(small_result):
    e = experiments.executed_energies(small_result)
    assert set(e) == {"baseline", "f1-central", "f3-central"}
    assert all(v.shape == (5,) and np.all(v >= 0) for v in e.values())
