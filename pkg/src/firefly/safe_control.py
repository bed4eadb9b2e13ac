"""Barrier and Lyapunov functions and the one-step safety filters.

Both filters work on the state increment ``s[t+1] - s[t] = (A - I) s + B u``.
For a convex barrier ``h`` (squared distances minus squared radii are
convex in position) the row ``grad h . (s[t+1] - s[t]) + alpha h >= 0``
implies ``h(s[t+1]) >= (1 - alpha) h(s[t])``, so any ``alpha`` in (0, 1]
keeps the safe set forward invariant.

The nonsmooth ``min`` in the combined barrier is handled by enforcing the
row of every robot-obstacle pair and every robot pair, which is a superset
of whatever the minimum selects.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .mission import MissionSpec
from .solver import ConvexProgram, solve

CENTRAL_ALPHA, CENTRAL_LAMBDA = 0.15, 0.025
DISTRIBUTED_ALPHA, DISTRIBUTED_LAMBDA = 0.1, 0.1


class Mode(enum.Enum):
    CENTRAL = "central"
    DISTRIBUTED = "distributed"


class SafetyInfeasibleError(RuntimeError):
    def __init__(self, report: "BarrierReport", robot: int | None = None):
        who = "team" if robot is None else f"robot {robot}"
        super().__init__(f"safety program infeasible for {who} (h={report.h:.3g}, V={report.V:.3g})")
        self.report = report
        self.robot = robot


class DegenerateConfigWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SafetyConfig:
    """CBF rate ``alpha`` and CLF rate ``lam`` plus distributed-mode knobs.

    ``lam`` is the CLF decay coefficient; the experiments section calls the
    same knob gamma.
    """

    alpha: float = CENTRAL_ALPHA
    lam: float = CENTRAL_LAMBDA
    mode: Mode = Mode.CENTRAL
    dist_rounds: int = 20
    dist_tol: float = 1e-6
    responsibility: float = 0.5
    deadlock_escape: bool = True

    def __post_init__(self):
        if isinstance(self.mode, str):
            object.__setattr__(self, "mode", Mode(self.mode))
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not 0 < self.responsibility < 1:
            raise ValueError("responsibility must be in (0, 1)")
        if self.dist_rounds < 0:
            raise ValueError("dist_rounds must be nonnegative")

    @classmethod
    def central(cls, **kw) -> "SafetyConfig":
        return cls(alpha=kw.pop("alpha", CENTRAL_ALPHA), lam=kw.pop("lam", CENTRAL_LAMBDA),
                   mode=Mode.CENTRAL, **kw)

    @classmethod
    def distributed(cls, **kw) -> "SafetyConfig":
        return cls(alpha=kw.pop("alpha", DISTRIBUTED_ALPHA), lam=kw.pop("lam", DISTRIBUTED_LAMBDA),
                   mode=Mode.DISTRIBUTED, **kw)

    @classmethod
    def for_mode(cls, mode: str | Mode, **kw) -> "SafetyConfig":
        mode = Mode(mode)
        return cls.central(**kw) if mode is Mode.CENTRAL else cls.distributed(**kw)


@dataclass(frozen=True)
class BarrierReport:
    h_obstacle: float
    h_separation: float
    h: float
    V: float
    V_robots: tuple[float, ...]
    active_obstacle: tuple[int, int] | None   # (robot, obstacle)
    active_pair: tuple[int, int] | None       # (j, k), j < k


def _positions(states) -> np.ndarray:
    return np.asarray(states, dtype=float).reshape(-1, 6)


def barriers(spec: MissionSpec, states) -> BarrierReport:
    """Obstacle, separation and combined barrier values plus the goal CLF."""
    s = _positions(states)
    p = s[:, :3]
    n = p.shape[0]
    h_o, act_o = np.inf, None
    if spec.obstacles:
        c = np.array([o.center for o in spec.obstacles])
        r = np.array([o.radius for o in spec.obstacles])
        vals = np.sum((p[:, None, :] - c[None]) ** 2, axis=-1) - r[None] ** 2
        k, o = np.unravel_index(np.argmin(vals), vals.shape)
        h_o, act_o = float(vals[k, o]), (int(k), int(o))
    h_c, act_c = np.inf, None
    if n > 1:
        d2 = np.sum((p[:, None, :] - p[None]) ** 2, axis=-1) - spec.d_s**2
        d2[np.tril_indices(n)] = np.inf
        j, k = np.unravel_index(np.argmin(d2), d2.shape)
        h_c, act_c = float(d2[j, k]), (int(j), int(k))
    centers = np.array([g.center for g in spec.goals])
    radii = np.array([g.radius for g in spec.goals])
    V_k = np.sum((p - centers) ** 2, axis=1) - radii**2
    return BarrierReport(h_o, h_c, min(h_o, h_c), float(V_k.max()), tuple(float(v) for v in V_k),
                         act_o, act_c)


@dataclass(frozen=True)
class SafeStep:
    u_safe: np.ndarray           # (N, 3)
    delta: np.ndarray            # (1,) central or (N,) distributed
    report: BarrierReport
    rounds: int = 1
    degenerate: bool = False

    @property
    def max_delta(self) -> float:
        return float(np.max(self.delta)) if self.delta.size else 0.0


def _increment_terms(spec: MissionSpec, s: np.ndarray):
    """``dp = drift + gain * u`` for each robot."""
    dt = spec.dt
    return dt * s[:, 3:], 0.5 * dt * dt


def escape_reference(spec: MissionSpec, states, u_fair, alpha: float) -> np.ndarray:
    """Redirect fair inputs that push a robot into an obstacle along its surface.

    A fair input aimed straight at an obstacle centre gives the QP no
    sideways component, and the robot stalls in front of it.  For every
    obstacle row the fair input violates, the inward part of the input is
    turned tangential, towards the goal side of the obstacle (a fixed side
    when the goal lies exactly behind the centre).  Only the QP reference
    changes; the constraints are untouched.
    """
    s = _positions(states)
    p = s[:, :3]
    drift, gain = _increment_terms(spec, s)
    ref = np.array(u_fair, dtype=float).reshape(-1, 3)
    for k in range(p.shape[0]):
        for obs in spec.obstacles:
            off = p[k] - obs.center
            g = 2.0 * off
            h = float(off @ off - obs.radius**2)
            if -gain * g @ ref[k] <= g @ drift[k] + alpha * h:
                continue
            nrm = off / np.linalg.norm(off)
            inward = -float(nrm @ ref[k])
            if inward <= 0:
                continue
            ahead = spec.goals[k].center - p[k]
            tau = ahead - (ahead @ nrm) * nrm
            if np.linalg.norm(tau) < 1e-9 * max(1.0, np.linalg.norm(ahead)):
                tau = np.cross(nrm, [0.0, 0.0, 1.0])
                if np.linalg.norm(tau) < 1e-9:
                    tau = np.cross(nrm, [1.0, 0.0, 0.0])
            tau /= np.linalg.norm(tau)
            ref[k] += inward * (nrm + tau)
    return ref


def cbf_rows(spec: MissionSpec, states, alpha: float):
    """All obstacle and pair rows as ``(robot_coeffs, rhs)`` with ``sum coeff_k . u_k <= rhs``.

    Each entry is ``(dict robot -> 3-vector, rhs)``.
    """
    s = _positions(states)
    p = s[:, :3]
    drift, gain = _increment_terms(spec, s)
    rows = []
    for k in range(p.shape[0]):
        for obs in spec.obstacles:
            g = 2.0 * (p[k] - obs.center)
            h = float(np.sum((p[k] - obs.center) ** 2) - obs.radius**2)
            rows.append(({k: -gain * g}, g @ drift[k] + alpha * h))
    for j in range(p.shape[0]):
        for k in range(j + 1, p.shape[0]):
            g = 2.0 * (p[j] - p[k])
            h = float(np.sum((p[j] - p[k]) ** 2) - spec.d_s**2)
            rows.append(({j: -gain * g, k: gain * g}, g @ (drift[j] - drift[k]) + alpha * h))
    return rows


def cbf_margin(spec: MissionSpec, states, u, alpha: float) -> np.ndarray:
    """Slack ``rhs - lhs`` of every CBF row at inputs ``u``; nonnegative means satisfied."""
    u = np.asarray(u, dtype=float).reshape(-1, 3)
    return np.array([rhs - sum(c @ u[k] for k, c in coeffs.items())
                     for coeffs, rhs in cbf_rows(spec, states, alpha)])


def clf_rows(spec: MissionSpec, states, lam: float):
    """Per-robot rows ``coeff_k . u_k - delta <= rhs``.

    ``lam`` is a continuous-time decay rate, so one step may shrink ``V``
    by ``dt * lam * V``.
    """
    s = _positions(states)
    p = s[:, :3]
    drift, gain = _increment_terms(spec, s)
    out = []
    for k, goal in enumerate(spec.goals):
        g = 2.0 * (p[k] - goal.center)
        V_k = float(np.sum((p[k] - goal.center) ** 2) - goal.radius**2)
        out.append((gain * g, -(g @ drift[k]) - spec.dt * lam * V_k))
    return out


def central_safe_step(spec: MissionSpec, states, u_fair, cfg: SafetyConfig | None = None) -> SafeStep:
    """Minimally perturb the team's fair inputs to satisfy every CBF row.

    Solves ``min ||u - u_fair||^2 + delta^2`` with one shared CLF slack.
    """
    cfg = cfg or SafetyConfig.central()
    s = _positions(states)
    n = s.shape[0]
    uf = np.asarray(u_fair, dtype=float).reshape(n, 3)
    report = barriers(spec, s)
    if cfg.deadlock_escape:
        uf = escape_reference(spec, s, uf, cfg.alpha)
    nv = 3 * n + 1
    A, b = [], []
    for coeffs, rhs in cbf_rows(spec, s, cfg.alpha):
        row = np.zeros(nv)
        for k, c in coeffs.items():
            row[3 * k:3 * k + 3] = c
        A.append(row)
        b.append(rhs)
    for k, (c, rhs) in enumerate(clf_rows(spec, s, cfg.lam)):
        row = np.zeros(nv)
        row[3 * k:3 * k + 3] = c
        row[-1] = -1.0
        A.append(row)
        b.append(rhs)
    lo = np.concatenate([np.full(3 * n, spec.u_box[0]), [-np.inf]])
    hi = np.concatenate([np.full(3 * n, spec.u_box[1]), [np.inf]])
    prog = ConvexProgram(P=2.0 * np.eye(nv), q=np.concatenate([-2.0 * uf.reshape(-1), [0.0]]),
                         Ain=np.array(A), bin=np.array(b), lo=lo, hi=hi)
    res = solve(prog)
    if not res.ok:
        raise SafetyInfeasibleError(report)
    return SafeStep(res.x[:-1].reshape(n, 3), res.x[-1:].copy(), report)


def pair_budgets(spec: MissionSpec, s: np.ndarray, cfg: SafetyConfig) -> dict:
    """Initial split of every pair row between its two robots.

    Returns ``{(k, j): (coeff, budget)}`` meaning robot ``k`` must keep
    ``coeff . u_k <= budget``; the two budgets of a pair add up to the rhs
    of the central row.  The lower index carries ``responsibility`` of the
    barrier rate ``alpha * h``, the other robot the rest, and each robot
    answers for its own drift.
    """
    p = s[:, :3]
    drift, gain = _increment_terms(spec, s)
    out = {}
    for k in range(p.shape[0]):
        for j in range(p.shape[0]):
            if j == k:
                continue
            share = cfg.responsibility if k < j else 1.0 - cfg.responsibility
            g = 2.0 * (p[k] - p[j])
            h = float(np.sum((p[k] - p[j]) ** 2) - spec.d_s**2)
            out[(k, j)] = (-gain * g, float(g @ drift[k] + share * cfg.alpha * h))
    return out


def rebalance(budgets: dict, u: np.ndarray, tol: float = 1e-6) -> dict:
    """Hand each pair's unused rate budget to the robot whose row binds.

    Every robot keeps at least what it used, so the last round's inputs
    stay feasible; if both or neither bind the slack is split evenly.
    """
    out = dict(budgets)
    for (k, j), (ck, bk) in budgets.items():
        if k > j:
            continue
        cj, bj = budgets[(j, k)]
        used_k, used_j = float(ck @ u[k]), float(cj @ u[j])
        left = (bk - used_k) + (bj - used_j)
        if left <= 0:
            continue
        bind_k = bk - used_k <= tol * max(1.0, abs(bk))
        bind_j = bj - used_j <= tol * max(1.0, abs(bj))
        wk = 0.5 if bind_k == bind_j else (1.0 if bind_k else 0.0)
        out[(k, j)] = (ck, used_k + wk * left)
        out[(j, k)] = (cj, used_j + (1.0 - wk) * left)
    return out


def _local_safe_program(spec: MissionSpec, s: np.ndarray, uf: np.ndarray, k: int,
                        cfg: SafetyConfig, budgets: dict | None = None) -> ConvexProgram:
    n = s.shape[0]
    p = s[:, :3]
    drift, gain = _increment_terms(spec, s)
    if budgets is None:
        budgets = pair_budgets(spec, s, cfg)
    A, b = [], []
    for obs in spec.obstacles:
        g = 2.0 * (p[k] - obs.center)
        h = float(np.sum((p[k] - obs.center) ** 2) - obs.radius**2)
        A.append(np.concatenate([-gain * g, [0.0]]))
        b.append(g @ drift[k] + cfg.alpha * h)
    for j in range(n):
        if j != k:
            c, bud = budgets[(k, j)]
            A.append(np.concatenate([c, [0.0]]))
            b.append(bud)
    c, rhs = clf_rows(spec, s, cfg.lam)[k]
    A.append(np.concatenate([c, [-1.0]]))
    b.append(rhs)
    # J_k = ||u_k - f_k||^2 + delta_k^2 + sigma(u), others frozen inside sigma
    w = 1.0 + 1.0 / n
    P = np.diag([2.0 * w] * 3 + [2.0])
    q = np.concatenate([-2.0 * w * uf[k], [0.0]])
    lo = np.array([spec.u_box[0]] * 3 + [-np.inf])
    hi = np.array([spec.u_box[1]] * 3 + [np.inf])
    return ConvexProgram(P=P, q=q, Ain=np.array(A), bin=np.array(b), lo=lo, hi=hi)


def team_cost(u: np.ndarray, uf: np.ndarray) -> float:
    """sigma(u): mean squared distance of the team from its fair inputs."""
    return float(np.mean(np.sum((u - uf) ** 2, axis=1)))


def distributed_safe_step(spec: MissionSpec, states, u_fair, cfg: SafetyConfig | None = None) -> SafeStep:
    """Per-robot safety programs iterated in synchronised best-response rounds.

    Each pairwise row is split: robot ``k`` must deliver its share of the
    barrier rate ``alpha * h`` on its own, so the shares of a pair add up to
    the full team row whatever the other robot does.  Between rounds the
    unused part of a pair's budget moves to the robot whose row binds
    (see :func:`rebalance`); every round's joint input is therefore safe.
    """
    cfg = cfg or SafetyConfig.distributed()
    s = _positions(states)
    n = s.shape[0]
    uf = np.asarray(u_fair, dtype=float).reshape(n, 3)
    report = barriers(spec, s)
    if cfg.dist_rounds == 0:
        warnings.warn("dist_rounds=0: fair inputs returned unfiltered", DegenerateConfigWarning)
        return SafeStep(uf.copy(), np.zeros(n), report, rounds=0, degenerate=True)
    if cfg.deadlock_escape:
        uf = escape_reference(spec, s, uf, cfg.alpha)
    u = uf.copy()
    deltas = np.zeros(n)
    rounds = 0
    budgets = pair_budgets(spec, s, cfg)
    for rounds in range(1, cfg.dist_rounds + 1):
        snapshot = u.copy()
        if rounds > 1:
            budgets = rebalance(budgets, u)
        new_u = np.empty_like(u)
        for k in range(n):
            res = solve(_local_safe_program(spec, s, uf, k, cfg, budgets))
            if not res.ok:
                raise SafetyInfeasibleError(report, robot=k)
            new_u[k] = res.x[:3]
            deltas[k] = res.x[3]
        u = new_u
        if np.max(np.linalg.norm(u - snapshot, axis=1)) <= cfg.dist_tol:
            break
    return SafeStep(u, deltas, report, rounds=rounds)


def safe_step(spec: MissionSpec, states, u_fair, cfg: SafetyConfig) -> SafeStep:
    if cfg.mode is Mode.CENTRAL:
        return central_safe_step(spec, states, u_fair, cfg)
    return distributed_safe_step(spec, states, u_fair, cfg)
