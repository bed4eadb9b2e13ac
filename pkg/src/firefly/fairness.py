"""Energy-fairness objectives over a team input plan and their gradients.

A team plan holds one ``(H_k, 3)`` input array per robot.  Energies are
normalised by each robot's solo energy, so a value of 1 means "what the
robot would have spent alone".
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

BETA = 1e-6
SURGE_THRESHOLD = 10.0


class FairnessError(ValueError):
    """Fairness is undefined for the given team or baseline."""


class InvalidBaselineError(FairnessError):
    pass


@dataclass(frozen=True)
class TeamPlan:
    inputs: tuple[np.ndarray, ...]
    prefix_len: int = 0

    def __post_init__(self):
        inputs = tuple(np.array(u, dtype=float).reshape(-1, 3) for u in self.inputs)
        object.__setattr__(self, "inputs", inputs)
        if inputs and not 0 <= self.prefix_len <= min(u.shape[0] for u in inputs):
            raise ValueError("prefix_len out of range")

    @property
    def n_robots(self) -> int:
        return len(self.inputs)

    def flat(self) -> np.ndarray:
        return np.concatenate([u.reshape(-1) for u in self.inputs]) if self.inputs else np.zeros(0)

    def within(self, lo: float, hi: float, tol: float = 0.0) -> bool:
        return all(np.all(u >= lo - tol) and np.all(u <= hi + tol) for u in self.inputs)

    def replace(self, k: int, u_k: np.ndarray) -> "TeamPlan":
        inputs = list(self.inputs)
        inputs[k] = u_k
        return TeamPlan(tuple(inputs), self.prefix_len)

    def with_prefix(self, prefix_len: int) -> "TeamPlan":
        return TeamPlan(self.inputs, prefix_len)


@dataclass(frozen=True)
class SoloBaseline:
    energies: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float).reshape(-1)
        if np.any(~np.isfinite(e)) or np.any(e <= 0):
            bad = int(np.flatnonzero(~(e > 0))[0]) if np.any(~(e > 0)) else -1
            raise InvalidBaselineError(f"solo energy of robot {bad} must be positive")
        object.__setattr__(self, "energies", e)


class Kind(enum.Enum):
    F1 = "f1"
    F2 = "f2"
    F3 = "f3"
    F4 = "f4"


@dataclass(frozen=True)
class FairnessNotion:
    """Which objective to use and its parameters.

    ``Q`` is ``None`` for the identity (so the energy term is the plain sum
    of squared inputs) or a symmetric positive-definite matrix acting on the
    flattened team input vector.
    """

    kind: Kind
    beta: float = BETA
    Q: np.ndarray | None = field(default=None, compare=False)
    M: float = SURGE_THRESHOLD
    surge_hinge: bool = False

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", Kind(self.kind.lower()))
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.M < 0:
            raise ValueError("M must be nonnegative")
        if self.Q is not None:
            Q = np.asarray(self.Q, dtype=float)
            if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T):
                raise ValueError("Q must be a symmetric matrix")
            if np.linalg.eigvalsh(Q).min() <= 0:
                raise ValueError("Q must be positive definite")
            object.__setattr__(self, "Q", Q)

    @classmethod
    def parse(cls, name: str) -> "FairnessNotion":
        return cls(Kind(name.lower()))

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def uses_surge(self) -> bool:
        return self.kind in (Kind.F3, Kind.F4)

    @property
    def uses_energy_term(self) -> bool:
        return self.kind in (Kind.F2, Kind.F4)

    def value(self, plan: TeamPlan, baseline: SoloBaseline) -> float:
        return evaluate(self, plan, baseline)


# --- primitives ------------------------------------------------------------------

def _check(plan: TeamPlan, baseline: SoloBaseline) -> None:
    if baseline.energies.size != plan.n_robots:
        raise FairnessError("baseline size does not match the team")


def normalized_energy(plan: TeamPlan, baseline: SoloBaseline) -> np.ndarray:
    """``e_k = sum_t ||u_k[t]||^2 / ebar_k``."""
    _check(plan, baseline)
    return np.array([np.sum(u * u) for u in plan.inputs]) / baseline.energies


def step_energies(plan: TeamPlan, baseline: SoloBaseline) -> list[np.ndarray]:
    """Per-step normalised energy ``||u_k[t]||^2 / ebar_k`` for each robot."""
    _check(plan, baseline)
    return [np.sum(u * u, axis=1) / eb for u, eb in zip(plan.inputs, baseline.energies)]


def _surge_terms(e_t: np.ndarray):
    """Signed differences against the previous step, with ``e[-1] = 0``."""
    prev = np.concatenate([[0.0], e_t[:-1]])
    return e_t - prev


def surge_totals(plan: TeamPlan, baseline: SoloBaseline, M: float = SURGE_THRESHOLD,
                 surge_hinge: bool = False) -> np.ndarray:
    """``z_k = sum_t (|e_k[t] - e_k[t-1]| - M)``; hinged at zero per term if asked."""
    z = []
    for e_t in step_energies(plan, baseline):
        terms = np.abs(_surge_terms(e_t)) - M
        if surge_hinge:
            terms = np.maximum(terms, 0.0)
        z.append(float(np.sum(terms)))
    return np.array(z)


def variance(x: np.ndarray) -> float:
    return float(np.mean((x - np.mean(x)) ** 2))


def energy_term(plan: TeamPlan, Q: np.ndarray | None = None) -> float:
    u = plan.flat()
    if Q is None:
        return float(u @ u)
    return float(u @ Q @ u)


def _team_size_ok(plan: TeamPlan) -> None:
    if plan.n_robots < 2:
        raise FairnessError("fairness needs at least two robots")


def f1(plan: TeamPlan, baseline: SoloBaseline) -> float:
    """Variance of the normalised energies."""
    _team_size_ok(plan)
    return variance(normalized_energy(plan, baseline))


def f2(plan: TeamPlan, baseline: SoloBaseline, beta: float = BETA, Q=None) -> float:
    return f1(plan, baseline) + beta * energy_term(plan, Q)


def f3(plan: TeamPlan, baseline: SoloBaseline, M: float = SURGE_THRESHOLD,
       surge_hinge: bool = False) -> float:
    """Variance of the total energy surges."""
    _team_size_ok(plan)
    return variance(surge_totals(plan, baseline, M, surge_hinge))


def f4(plan: TeamPlan, baseline: SoloBaseline, M: float = SURGE_THRESHOLD,
       beta: float = BETA, Q=None, surge_hinge: bool = False) -> float:
    return f3(plan, baseline, M, surge_hinge) + beta * energy_term(plan, Q)


def evaluate(notion: FairnessNotion, plan: TeamPlan, baseline: SoloBaseline) -> float:
    if notion.kind is Kind.F1:
        return f1(plan, baseline)
    if notion.kind is Kind.F2:
        return f2(plan, baseline, notion.beta, notion.Q)
    if notion.kind is Kind.F3:
        return f3(plan, baseline, notion.M, notion.surge_hinge)
    return f4(plan, baseline, notion.M, notion.beta, notion.Q, notion.surge_hinge)


# --- gradients ---------------------------------------------------------------------

def _surge_dz(u: np.ndarray, eb: float, M: float, hinge: bool) -> np.ndarray:
    """d z_k / d u_k[t] as an ``(H, 3)`` array.

    Zero differences take sign 0, which is a valid subgradient at the kink.
    """
    e_t = np.sum(u * u, axis=1) / eb
    d = _surge_terms(e_t)
    s = np.sign(d)
    if hinge:
        s = np.where(np.abs(d) > M, s, 0.0)
    # e[t] enters difference t with +1 and difference t+1 with -1
    coef = s - np.concatenate([s[1:], [0.0]])
    return (2.0 / eb) * coef[:, None] * u


def gradient(notion: FairnessNotion, plan: TeamPlan, baseline: SoloBaseline,
             k: int) -> np.ndarray:
    """Gradient of the notion with respect to robot ``k``'s full input sequence.

    Returns an array shaped like ``plan.inputs[k]``.  For a single robot the
    variance is identically zero, so only the energy term contributes.
    """
    _check(plan, baseline)
    n = plan.n_robots
    u = plan.inputs[k]
    eb = baseline.energies[k]
    grad = np.zeros_like(u)
    if n >= 2:
        if notion.uses_surge:
            z = surge_totals(plan, baseline, notion.M, notion.surge_hinge)
            grad += (2.0 / n) * (z[k] - z.mean()) * _surge_dz(u, eb, notion.M, notion.surge_hinge)
        else:
            e = normalized_energy(plan, baseline)
            grad += (2.0 / n) * (e[k] - e.mean()) * (2.0 / eb) * u
    if notion.uses_energy_term and notion.beta:
        if notion.Q is None:
            grad += 2.0 * notion.beta * u
        else:
            offsets = np.cumsum([0] + [x.size for x in plan.inputs])
            Qu = notion.Q @ plan.flat()
            grad += 2.0 * notion.beta * Qu[offsets[k]:offsets[k + 1]].reshape(u.shape)
    return grad


def team_gradient(notion: FairnessNotion, plan: TeamPlan, baseline: SoloBaseline) -> list[np.ndarray]:
    return [gradient(notion, plan, baseline, k) for k in range(plan.n_robots)]


def kink_distance(plan: TeamPlan, baseline: SoloBaseline, M: float, hinge: bool) -> float:
    """Smallest distance of any surge difference from a point where it is nondifferentiable."""
    best = np.inf
    for e_t in step_energies(plan, baseline):
        d = np.abs(_surge_terms(e_t))
        best = min(best, float(d.min(initial=np.inf)))
        if hinge:
            best = min(best, float(np.abs(d - M).min(initial=np.inf)))
    return best


NOTIONS: dict[str, FairnessNotion] = {k.value: FairnessNotion(k) for k in Kind}


def notion_for(name: str | FairnessNotion | None) -> FairnessNotion | None:
    if name is None or isinstance(name, FairnessNotion):
        return name
    if name.lower() == "none":
        return None
    try:
        return NOTIONS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown fairness notion {name!r}") from None


def plan_from_arrays(arrays: Sequence[np.ndarray], prefix_len: int = 0) -> TeamPlan:
    return TeamPlan(tuple(arrays), prefix_len)
