"""Reach-avoid missions: geometry, validation, random scenarios and files."""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCENARIO_VERSION = "firefly-scenario-v1"

# Experiment defaults shared by both generators.
DT = 0.2
D_S = 0.01
HORIZON = 25
U_MAX = 100.0
WORKSPACE = (0.0, 10.0)
GOAL_RADIUS = 3.5           # shared goal of the obstacle sweep
EXP2_GOAL_RADIUS = 0.5      # per-robot goals of the team-size sweep
OBSTACLE_RADII = (0.3, 0.8)
START_CIRCLE_RADIUS = 5.0
START_HEIGHT_OFFSET = -2.0  # start circle height relative to the goal centre
SHELL_RADIUS = 4.0
MAX_DRAWS = 1000
OBSTACLE_CLEARANCE = 0.25   # free gap kept around starts and the goal when placing obstacles


class ScenarioError(ValueError):
    """A mission violates its invariants or a file could not be parsed."""


class ScenarioGenerationError(RuntimeError):
    """Rejection sampling ran out of draws."""


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(3)
        if not np.all(np.isfinite(c)):
            raise ScenarioError("center must be finite")
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ScenarioError("radius must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, p, tol: float = 0.0) -> bool:
        return bool(np.linalg.norm(np.asarray(p) - self.center) <= self.radius + tol)

    def __eq__(self, other):
        return (isinstance(other, Sphere) and self.radius == other.radius
                and np.array_equal(self.center, other.center))

    def __hash__(self):
        return hash((tuple(self.center), self.radius))


@dataclass(frozen=True)
class MissionSpec:
    starts: np.ndarray                 # (N, 3)
    goals: tuple[Sphere, ...]
    obstacles: tuple[Sphere, ...] = ()
    horizons: tuple[int, ...] = ()
    d_s: float = D_S
    u_box: tuple[float, float] = (-U_MAX, U_MAX)
    dt: float = DT

    def __post_init__(self):
        starts = np.asarray(self.starts, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "goals", tuple(self.goals))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        horizons = tuple(int(h) for h in self.horizons) or (HORIZON,) * len(starts)
        object.__setattr__(self, "horizons", horizons)
        object.__setattr__(self, "u_box", (float(self.u_box[0]), float(self.u_box[1])))
        object.__setattr__(self, "d_s", float(self.d_s))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_robots(self) -> int:
        return self.starts.shape[0]

    @property
    def max_horizon(self) -> int:
        return max(self.horizons)

    def validate(self, allow_single: bool = False) -> "MissionSpec":
        """Raise :class:`ScenarioError` unless every mission invariant holds."""
        n = self.n_robots
        if n < (1 if allow_single else 2):
            raise ScenarioError(f"need at least 2 robots, got {n}")
        if len(self.goals) != n or len(self.horizons) != n:
            raise ScenarioError("starts, goals and horizons must have equal length")
        if not np.all(np.isfinite(self.starts)):
            raise ScenarioError("starts must be finite")
        if any(h <= 0 for h in self.horizons):
            raise ScenarioError("horizon must be a positive integer")
        if not self.d_s > 0:
            raise ScenarioError("d_s must be positive")
        if not self.dt > 0:
            raise ScenarioError("dt must be positive")
        lo, hi = self.u_box
        if not (hi > 0 and lo == -hi):
            raise ScenarioError("u_box must be a symmetric interval [-a, a] with a > 0")
        diff = self.starts[:, None, :] - self.starts[None, :, :]
        dist = np.linalg.norm(diff, axis=-1) + np.diag(np.full(n, np.inf))
        if n > 1 and dist.min() <= self.d_s:
            raise ScenarioError("starts must be pairwise farther apart than d_s")
        for o, obs in enumerate(self.obstacles):
            d = np.linalg.norm(self.starts - obs.center, axis=1)
            if np.any(d <= obs.radius):
                raise ScenarioError(f"start of robot {int(np.argmin(d))} lies inside obstacle {o}")
        return self

    def robot(self, k: int) -> "MissionSpec":
        """The mission of robot ``k`` alone, without obstacles."""
        return MissionSpec(self.starts[k:k + 1], (self.goals[k],), (), (self.horizons[k],),
                           self.d_s, self.u_box, self.dt)

    def fingerprint(self) -> str:
        return hashlib.sha256(dumps(self).encode()).hexdigest()[:16]

    def __eq__(self, other):
        return (isinstance(other, MissionSpec)
                and np.array_equal(self.starts, other.starts)
                and self.goals == other.goals and self.obstacles == other.obstacles
                and self.horizons == other.horizons and self.d_s == other.d_s
                and self.u_box == other.u_box and self.dt == other.dt)

    __hash__ = None


class ExperimentKind(enum.Enum):
    OBSTACLE_SWEEP = "obstacle-sweep"
    TEAM_SWEEP = "team-sweep"


@dataclass(frozen=True)
class ScenarioSeed:
    rng_seed: int
    n_robots: int = 5
    n_obstacles: int = 1
    experiment_kind: ExperimentKind = ExperimentKind.OBSTACLE_SWEEP

    def rng(self) -> np.random.Generator:
        tag = {ExperimentKind.OBSTACLE_SWEEP: 1, ExperimentKind.TEAM_SWEEP: 2}[self.experiment_kind]
        return np.random.default_rng([self.rng_seed & (2**64 - 1), tag, self.n_robots, self.n_obstacles])


# --- generators -------------------------------------------------------------

def experiment1_layout(n_robots: int = 5):
    """Fixed starts on a circle around the vertical axis of the shared goal."""
    lo, hi = WORKSPACE
    mid = 0.5 * (lo + hi)
    goal = Sphere(np.array([mid, mid, mid]), GOAL_RADIUS)
    ang = 2 * np.pi * np.arange(n_robots) / n_robots
    starts = np.column_stack([
        mid + START_CIRCLE_RADIUS * np.cos(ang),
        mid + START_CIRCLE_RADIUS * np.sin(ang),
        np.full(n_robots, mid + START_HEIGHT_OFFSET),
    ])
    return starts, goal


def generate_experiment1(seed: ScenarioSeed) -> MissionSpec:
    """N robots with fixed starts fly to one shared goal; obstacles sit on their paths."""
    if not 0 <= seed.n_obstacles <= 5:
        raise ValueError("n_obstacles must be in 0..5")
    rng = seed.rng()
    starts, goal = experiment1_layout(seed.n_robots)
    obstacles: list[Sphere] = []
    draws = 0
    while len(obstacles) < seed.n_obstacles:
        if draws >= MAX_DRAWS:
            raise ScenarioGenerationError(f"no admissible obstacle after {MAX_DRAWS} draws")
        draws += 1
        k = int(rng.integers(seed.n_robots))
        s = float(rng.uniform(0.0, 1.0))
        r = float(rng.uniform(*OBSTACLE_RADII))
        c = starts[k] + s * (goal.center - starts[k])
        # keep starts strictly outside and the goal uncovered
        if np.min(np.linalg.norm(starts - c, axis=1)) <= r + OBSTACLE_CLEARANCE:
            continue
        if np.linalg.norm(c - goal.center) <= r + goal.radius + OBSTACLE_CLEARANCE:
            continue
        obstacles.append(Sphere(c, r))
    spec = MissionSpec(starts, (goal,) * seed.n_robots, tuple(obstacles),
                       (HORIZON,) * seed.n_robots)
    return spec.validate()


def _shell_points(rng, center, radius, n):
    v = rng.normal(size=(n, 3))
    return center + radius * v / np.linalg.norm(v, axis=1, keepdims=True)


def generate_experiment2(seed: ScenarioSeed) -> MissionSpec:
    """One central obstacle; starts and goals drawn on a sphere shell around it."""
    rng = seed.rng()
    n = seed.n_robots
    lo, hi = WORKSPACE
    center = np.full(3, 0.5 * (lo + hi))
    obstacle = Sphere(center, float(rng.uniform(*OBSTACLE_RADII)))
    starts = np.empty((n, 3))
    goals = []
    min_gap = max(10 * D_S, 0.3)
    for k in range(n):
        for _ in range(MAX_DRAWS):
            p = _shell_points(rng, center, SHELL_RADIUS, 1)[0]
            if k == 0 or np.min(np.linalg.norm(starts[:k] - p, axis=1)) > min_gap:
                starts[k] = p
                break
        else:
            raise ScenarioGenerationError(f"could not place start {k} after {MAX_DRAWS} draws")
        for _ in range(MAX_DRAWS):
            g = _shell_points(rng, center, SHELL_RADIUS, 1)[0]
            if np.linalg.norm(g - starts[k]) > 2 * EXP2_GOAL_RADIUS + 1.0:
                goals.append(Sphere(g, EXP2_GOAL_RADIUS))
                break
        else:
            raise ScenarioGenerationError(f"could not place goal {k} after {MAX_DRAWS} draws")
    spec = MissionSpec(starts, tuple(goals), (obstacle,), (HORIZON,) * n)
    return spec.validate()


def generate(seed: ScenarioSeed) -> MissionSpec:
    if seed.experiment_kind is ExperimentKind.OBSTACLE_SWEEP:
        return generate_experiment1(seed)
    return generate_experiment2(seed)


# --- scenario files ----------------------------------------------------------

def to_document(spec: MissionSpec) -> dict:
    return {
        "version": SCENARIO_VERSION,
        "dt": spec.dt,
        "d_s": spec.d_s,
        "u_box": {"min": spec.u_box[0], "max": spec.u_box[1]},
        "robots": [
            {"start": [float(x) for x in spec.starts[k]],
             "goal": {"center": [float(x) for x in g.center], "radius": g.radius},
             "horizon": h}
            for k, (g, h) in enumerate(zip(spec.goals, spec.horizons))
        ],
        "obstacles": [{"center": [float(x) for x in o.center], "radius": o.radius}
                      for o in spec.obstacles],
    }


def dumps(spec: MissionSpec) -> str:
    # json writes floats with repr(), which round-trips doubles exactly
    return json.dumps(to_document(spec), indent=2)


def _need(doc: dict, key: str, where: str):
    if not isinstance(doc, dict) or key not in doc:
        raise ScenarioError(f"missing field '{where}{key}'")
    return doc[key]


def _number(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ScenarioError(f"field '{where}' must be a number")
    return float(x)


def _vector(x, where: str) -> np.ndarray:
    if not isinstance(x, list) or len(x) != 3:
        raise ScenarioError(f"field '{where}' must be a list of 3 numbers")
    return np.array([_number(v, where) for v in x])


def _sphere(doc, where: str) -> Sphere:
    c = _vector(_need(doc, "center", where + "."), where + ".center")
    r = _number(_need(doc, "radius", where + "."), where + ".radius")
    if not r > 0:
        raise ScenarioError(f"field '{where}.radius': radius must be positive")
    return Sphere(c, r)


def from_document(doc: dict, validate: bool = True) -> MissionSpec:
    version = _need(doc, "version", "")
    if version != SCENARIO_VERSION:
        raise ScenarioError(f"field 'version': unsupported version {version!r}")
    dt = _number(_need(doc, "dt", ""), "dt")
    d_s = _number(_need(doc, "d_s", ""), "d_s")
    box = _need(doc, "u_box", "")
    u_box = (_number(_need(box, "min", "u_box."), "u_box.min"),
             _number(_need(box, "max", "u_box."), "u_box.max"))
    robots = _need(doc, "robots", "")
    if not isinstance(robots, list):
        raise ScenarioError("field 'robots' must be a list")
    starts, goals, horizons = [], [], []
    for k, rob in enumerate(robots):
        where = f"robots[{k}]"
        starts.append(_vector(_need(rob, "start", where + "."), where + ".start"))
        goals.append(_sphere(_need(rob, "goal", where + "."), where + ".goal"))
        h = _need(rob, "horizon", where + ".")
        if isinstance(h, bool) or not isinstance(h, int) or h <= 0:
            raise ScenarioError(f"field '{where}.horizon' must be a positive integer")
        horizons.append(h)
    obstacles = [_sphere(o, f"obstacles[{i}]")
                 for i, o in enumerate(_need(doc, "obstacles", ""))]
    spec = MissionSpec(np.array(starts).reshape(-1, 3), tuple(goals), tuple(obstacles),
                       tuple(horizons), d_s, u_box, dt)
    if validate:
        spec.validate(allow_single=True)
    return spec


def loads(text: str, validate: bool = True) -> MissionSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"not a scenario document: {exc}") from exc
    return from_document(doc, validate)


def save(spec: MissionSpec, path) -> None:
    Path(path).write_text(dumps(spec))


def load(path, validate: bool = True) -> MissionSpec:
    return loads(Path(path).read_text(), validate)
