import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from firefly import mission
from firefly.mission import (ExperimentKind, MissionSpec, ScenarioError, ScenarioGenerationError,
                             ScenarioSeed, Sphere, generate, generate_experiment1,
                             generate_experiment2)


def _pair():
    return MissionSpec(np.array([[0.0, 0, 0], [1.0, 0, 0]]),
                       (Sphere([5, 0, 0], 0.5), Sphere([5, 1, 0], 0.5)))


def test_defaults_follow_experiment_setup():
    spec = _pair()
    assert spec.d_s == 0.01 and spec.dt == 0.2
    assert spec.u_box == (-100.0, 100.0)
    assert spec.horizons == (25, 25)


def test_seed_42_one_obstacle_validates():
    spec = generate_experiment1(ScenarioSeed(42, 5, 1))
    assert spec.validate() is spec
    assert spec.n_robots == 5 and len(spec.obstacles) == 1
    # one shared goal
    assert all(g == spec.goals[0] for g in spec.goals)


def test_experiment1_zero_obstacles():
    spec = generate_experiment1(ScenarioSeed(1, 5, 0))
    assert spec.obstacles == ()
    spec.validate()


def test_experiment1_fixed_starts_across_seeds():
    a = generate_experiment1(ScenarioSeed(1, 5, 3))
    b = generate_experiment1(ScenarioSeed(2, 5, 3))
    assert np.array_equal(a.starts, b.starts)
    assert a.obstacles != b.obstacles


@pytest.mark.parametrize("n_obs", [1, 3, 5])
def test_experiment1_obstacles_on_start_goal_segments(n_obs):
    spec = generate_experiment1(ScenarioSeed(9, 5, n_obs))
    c_goal = spec.goals[0].center
    for obs in spec.obstacles:
        # distance from the centre to the nearest start-goal segment is zero
        dists = []
        for p in spec.starts:
            d = c_goal - p
            s = np.clip((obs.center - p) @ d / (d @ d), 0, 1)
            dists.append(np.linalg.norm(p + s * d - obs.center))
        assert min(dists) < 1e-9
        assert not spec.goals[0].contains(obs.center, tol=obs.radius)
        assert np.all(np.linalg.norm(spec.starts - obs.center, axis=1) > obs.radius)


def test_experiment1_rejects_bad_counts():
    with pytest.raises(ValueError):
        generate_experiment1(ScenarioSeed(0, 5, 6))


def test_experiment1_generation_error(monkeypatch):
    # an obstacle that cannot fit anywhere exhausts the draws
    monkeypatch.setattr(mission, "OBSTACLE_RADII", (50.0, 51.0))
    with pytest.raises(ScenarioGenerationError):
        generate_experiment1(ScenarioSeed(0, 5, 1))


def test_experiment2_seed_7():
    spec = generate_experiment2(ScenarioSeed(7, 7, 1, ExperimentKind.TEAM_SWEEP))
    spec.validate()
    assert spec.n_robots == 7 and len(spec.obstacles) == 1
    c = spec.obstacles[0].center
    assert np.allclose(np.linalg.norm(spec.starts - c, axis=1), mission.SHELL_RADIUS)
    for g in spec.goals:
        assert np.isclose(np.linalg.norm(g.center - c), mission.SHELL_RADIUS)


def test_experiment2_minimum_team():
    generate_experiment2(ScenarioSeed(3, 2, 1, ExperimentKind.TEAM_SWEEP)).validate()


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), n_obs=st.integers(0, 5),
       kind=st.sampled_from(list(ExperimentKind)))
def test_generation_is_pure_and_valid(seed, n_obs, kind):
    n = 5 if kind is ExperimentKind.OBSTACLE_SWEEP else 7
    sd = ScenarioSeed(seed, n, n_obs if kind is ExperimentKind.OBSTACLE_SWEEP else 1, kind)
    a, b = generate(sd), generate(sd)
    assert a == b
    assert mission.dumps(a) == mission.dumps(b)
    a.validate()


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32), n_obs=st.integers(0, 5))
def test_file_round_trip(tmp_path_factory, seed, n_obs):
    spec = generate(ScenarioSeed(seed, 5, n_obs))
    path = tmp_path_factory.mktemp("scen") / "s.json"
    mission.save(spec, path)
    back = mission.load(path)
    assert back == spec
    assert back.fingerprint() == spec.fingerprint()


def test_file_format_fields():
    doc = json.loads(mission.dumps(generate(ScenarioSeed(0, 5, 2))))
    assert doc["version"] == "firefly-scenario-v1"
    assert set(doc) == {"version", "dt", "d_s", "u_box", "robots", "obstacles"}
    assert set(doc["robots"][0]) == {"start", "goal", "horizon"}


def test_negative_radius_names_field():
    doc = mission.to_document(_pair())
    doc["robots"][1]["goal"]["radius"] = -1
    with pytest.raises(ScenarioError, match="radius must be positive") as exc:
        mission.from_document(doc)
    assert "robots[1].goal.radius" in str(exc.value)


def test_missing_d_s():
    doc = mission.to_document(_pair())
    del doc["d_s"]
    with pytest.raises(ScenarioError, match="d_s"):
        mission.from_document(doc)


@pytest.mark.parametrize("mutate, match", [
    (lambda d: d.update(version="v0"), "version"),
    (lambda d: d["robots"][0].update(horizon=0), "horizon"),
    (lambda d: d["robots"][0].update(start=[0, 0]), "start"),
    (lambda d: d["u_box"].update(min="a"), "u_box.min"),
])
def test_malformed_documents(mutate, match):
    doc = mission.to_document(_pair())
    mutate(doc)
    with pytest.raises(ScenarioError, match=match):
        mission.from_document(doc)


def test_loads_rejects_non_json():
    with pytest.raises(ScenarioError):
        mission.loads("not json")


@pytest.mark.parametrize("kwargs, match", [
    (dict(starts=np.zeros((1, 3))), "at least 2"),
    (dict(starts=np.array([[0, 0, 0], [0.001, 0, 0]])), "d_s"),
    (dict(obstacles=(Sphere([0, 0, 0], 0.2),)), "inside obstacle"),
    (dict(u_box=(-1.0, 2.0)), "symmetric"),
    (dict(horizons=(25, 0)), "horizon"),
])
def test_validator(kwargs, match):
    base = dict(starts=np.array([[0.0, 0, 0], [1.0, 0, 0]]),
                goals=(Sphere([5, 0, 0], 0.5), Sphere([5, 1, 0], 0.5)))
    base.update(kwargs)
    if len(base["starts"]) == 1:
        base["goals"] = base["goals"][:1]
    with pytest.raises(ScenarioError, match=match):
        MissionSpec(**base).validate()


def test_sphere_invariants():
    with pytest.raises(ScenarioError):
        Sphere([0, 0, 0], 0.0)
    with pytest.raises(ScenarioError):
        Sphere([np.nan, 0, 0], 1.0)
    s = Sphere([0, 0, 0], 1.0)
    assert s.contains([1, 0, 0]) and not s.contains([1.01, 0, 0])


def test_robot_submission_drops_obstacles():
    spec = generate(ScenarioSeed(0, 5, 2))
    solo = spec.robot(3)
    assert solo.n_robots == 1 and solo.obstacles == ()
    assert solo.goals[0] == spec.goals[3]
    solo.validate(allow_single=True)
