"""Fair receding-horizon motion planning for UAV teams with CLF-CBF safety filters.

The pieces, bottom up:

- :mod:`.dynamics`: 3D double integrator and rollouts.
- :mod:`.mission`: mission specs, scenario generators, scenario files.
- :mod:`.fairness`: energy-fairness notions f1-f4 and their gradients.
- :mod:`.solver`: convex QP / ball-constrained program interface.
- :mod:`.fair_planner`: distributed fair planner and the solo baseline.
- :mod:`.safe_control`: barrier functions and the central/distributed filters.
- :mod:`.firefly_loop`: the receding-horizon loop and run records.
- :mod:`.metrics` and :mod:`.experiments`: success, fairness improvement, runtimes.
"""

from .dynamics import DynamicsModel, rollout, rollout_team
from .fair_planner import PlannerConfig, initial_plan, plan_fair, solo_baseline
from .fairness import FairnessNotion, SoloBaseline, TeamPlan, evaluate, normalized_energy, notion_for
from .firefly_loop import RunConfig, RunRecord, run, run_baseline
from .metrics import compare, fairness_improvement, improvement_rate, mission_success
from .mission import MissionSpec, ScenarioSeed, Sphere, generate, load, save
from .safe_control import Mode, SafetyConfig, barriers, safe_step
from .solver import ConvexProgram, solve

__version__ = "0.1.0"

__all__ = [
    "ConvexProgram", "DynamicsModel", "FairnessNotion", "MissionSpec", "Mode", "PlannerConfig",
    "RunConfig", "RunRecord", "SafetyConfig", "ScenarioSeed", "SoloBaseline", "Sphere", "TeamPlan",
    "barriers", "compare", "evaluate", "fairness_improvement", "generate", "improvement_rate",
    "initial_plan", "load", "mission_success", "normalized_energy", "notion_for", "plan_fair",
    "rollout", "rollout_team", "run", "run_baseline", "safe_step", "save", "solo_baseline",
    "solve",
]
