"""Small dense convex programs: quadratic objective, affine rows, boxes and balls.

Programs are solved with the Clarabel interior-point solver through its
direct conic interface.  Ball constraints ``||F x + g||^2 <= r^2`` become
second-order cones, so no linearisation happens anywhere.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import clarabel
import numpy as np
import scipy.sparse as sp

FEAS_TOL = 1e-6
OPT_TOL = 1e-6
MAX_ITER = 20000


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITER = "MaxIter"


@dataclass(frozen=True)
class Ball:
    """``||F x + g|| <= radius``."""

    F: np.ndarray
    g: np.ndarray
    radius: float


@dataclass
class ConvexProgram:
    """min 1/2 x'Px + q'x  s.t.  Aeq x = beq, Ain x <= bin, lo <= x <= hi, balls."""

    P: np.ndarray
    q: np.ndarray
    Aeq: np.ndarray | None = None
    beq: np.ndarray | None = None
    Ain: np.ndarray | None = None
    bin: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    balls: list[Ball] = field(default_factory=list)

    def __post_init__(self):
        self.P = np.atleast_2d(np.asarray(self.P, dtype=float))
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        n = self.q.size
        if self.P.shape != (n, n):
            raise ValueError(f"P has shape {self.P.shape}, expected {(n, n)}")
        if not np.allclose(self.P, self.P.T, atol=1e-12):
            raise ValueError("P must be symmetric")
        for a, b, name in ((self.Aeq, self.beq, "eq"), (self.Ain, self.bin, "in")):
            if (a is None) != (b is None):
                raise ValueError(f"A{name} and b{name} must be given together")
        if self.Aeq is not None:
            self.Aeq = np.asarray(self.Aeq, dtype=float).reshape(-1, n)
            self.beq = np.asarray(self.beq, dtype=float).reshape(-1)
            if self.Aeq.shape[0] != self.beq.size:
                raise ValueError("Aeq/beq row mismatch")
        if self.Ain is not None:
            self.Ain = np.asarray(self.Ain, dtype=float).reshape(-1, n)
            self.bin = np.asarray(self.bin, dtype=float).reshape(-1)
            if self.Ain.shape[0] != self.bin.size:
                raise ValueError("Ain/bin row mismatch")
        if self.lo is not None:
            self.lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (n,)).copy()
        if self.hi is not None:
            self.hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (n,)).copy()
        for ball in self.balls:
            if np.asarray(ball.F).shape[1] != n:
                raise ValueError("ball F has wrong column count")

    @property
    def n_vars(self) -> int:
        return self.q.size

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.P @ x + self.q @ x)

    def residual(self, x: np.ndarray) -> float:
        """Largest constraint violation of ``x`` against the raw data."""
        worst = 0.0
        if self.Aeq is not None and self.beq.size:
            worst = max(worst, float(np.max(np.abs(self.Aeq @ x - self.beq))))
        if self.Ain is not None and self.bin.size:
            worst = max(worst, float(np.max(self.Ain @ x - self.bin)))
        if self.lo is not None:
            worst = max(worst, float(np.max(self.lo - x, initial=0.0)))
        if self.hi is not None:
            worst = max(worst, float(np.max(x - self.hi, initial=0.0)))
        for ball in self.balls:
            worst = max(worst, float(np.linalg.norm(ball.F @ x + ball.g) - ball.radius))
        return max(worst, 0.0)


@dataclass(frozen=True)
class SolveResult:
    status: Status
    x: np.ndarray
    objective: float
    primal_residual: float
    iterations: int

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


def _linear_rows(p: ConvexProgram):
    """Inequality rows ``G x <= h`` in the order :func:`_conic_form` stacks them."""
    n = p.n_vars
    G, h = [np.zeros((0, n))], [np.zeros(0)]
    if p.Ain is not None and p.bin.size:
        G.append(p.Ain)
        h.append(p.bin)
    eye = np.eye(n)
    if p.hi is not None:
        idx = np.flatnonzero(np.isfinite(p.hi))
        G.append(eye[idx])
        h.append(p.hi[idx])
    if p.lo is not None:
        idx = np.flatnonzero(np.isfinite(p.lo))
        G.append(-eye[idx])
        h.append(-p.lo[idx])
    return np.vstack(G), np.concatenate(h)


def _conic_form(p: ConvexProgram):
    n = p.n_vars
    blocks, rhs, cones = [], [], []
    if p.Aeq is not None and p.beq.size:
        blocks.append(p.Aeq)
        rhs.append(p.beq)
        cones.append(clarabel.ZeroConeT(p.beq.size))
    G, h = _linear_rows(p)
    if G.shape[0]:
        blocks.append(G)
        rhs.append(h)
        cones.append(clarabel.NonnegativeConeT(G.shape[0]))
    for ball in p.balls:
        F = np.asarray(ball.F, dtype=float)
        # s = b - A x  with  s = (r, F x + g)
        blocks.append(np.vstack([np.zeros((1, n)), -F]))
        rhs.append(np.concatenate([[float(ball.radius)], np.asarray(ball.g, dtype=float)]))
        cones.append(clarabel.SecondOrderConeT(F.shape[0] + 1))
    if blocks:
        A = sp.csc_matrix(np.vstack(blocks))
        b = np.concatenate(rhs)
    else:
        A = sp.csc_matrix((0, n))
        b = np.zeros(0)
    return A, b, cones


_SOLVED = ("Solved", "AlmostSolved")


def _polish(p: ConvexProgram, x: np.ndarray, z: np.ndarray, s: np.ndarray, opt_tol: float):
    """Snap an interior-point answer onto its active set.

    Rows whose dual exceeds their slack are taken as active and the
    equality-constrained QP over them is solved exactly.  The polished
    point is kept only if it satisfies every raw constraint (balls
    included) and is no worse than ``x``; otherwise ``x`` is returned.
    """
    n_eq = 0 if p.Aeq is None else p.beq.size
    G, h = _linear_rows(p)
    zl, sl = z[n_eq:n_eq + G.shape[0]], s[n_eq:n_eq + G.shape[0]]
    active = zl > sl
    E = np.vstack([np.zeros((0, p.n_vars))] + ([p.Aeq] if n_eq else []) + [G[active]])
    f = np.concatenate([np.zeros(0)] + ([p.beq] if n_eq else []) + [h[active]])
    m = E.shape[0]
    K = np.block([[p.P, E.T], [E, np.zeros((m, m))]])
    sol, *_ = np.linalg.lstsq(K, np.concatenate([-p.q, f]), rcond=None)
    xp = sol[:p.n_vars]
    if not np.all(np.isfinite(xp)) or p.residual(xp) > 1e-9 * (1.0 + np.max(np.abs(f), initial=0.0)):
        return x
    if p.objective(xp) > p.objective(x) + opt_tol * (1.0 + abs(p.objective(x))):
        return x
    return xp


def _clarabel(P, q, A, b, cones, feas_tol, opt_tol, max_iter, equilibrate):
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = int(min(max_iter, 2**31 - 1))
    tight = min(1e-8, opt_tol)
    settings.tol_gap_abs = tight
    settings.tol_gap_rel = tight
    settings.tol_feas = min(1e-8, feas_tol)
    settings.equilibrate_enable = equilibrate
    return clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()


def solve(p: ConvexProgram, feas_tol: float = FEAS_TOL, opt_tol: float = OPT_TOL,
          max_iter: int = MAX_ITER, x0: np.ndarray | None = None) -> SolveResult:
    """Solve ``p``; infeasibility is reported through the status, never raised.

    ``x0`` is accepted as an initial-point hint and used only as the
    returned iterate when the solver fails outright.
    """
    n = p.n_vars
    if n == 0:
        return SolveResult(Status.OPTIMAL, np.zeros(0), 0.0, 0.0, 0)
    A, b, cones = _conic_form(p)
    P = sp.csc_matrix(np.triu(p.P))
    sol = _clarabel(P, p.q, A, b, cones, feas_tol, opt_tol, max_iter, equilibrate=True)
    status_name = str(sol.status)
    if status_name not in _SOLVED and "Infeasible" not in status_name:
        # badly scaled cones (huge balls) can stall the equilibrated problem
        retry = _clarabel(P, p.q, A, b, cones, feas_tol, opt_tol, max_iter, equilibrate=False)
        if str(retry.status) in _SOLVED or "Infeasible" in str(retry.status):
            sol, status_name = retry, str(retry.status)
    x = np.asarray(sol.x, dtype=float)
    if x.size != n or not np.all(np.isfinite(x)):
        x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    if status_name in _SOLVED:
        x = _polish(p, x, np.asarray(sol.z, dtype=float), np.asarray(sol.s, dtype=float), opt_tol)
    res = p.residual(x)
    if "Infeasible" in status_name:
        status = Status.INFEASIBLE
    elif status_name in _SOLVED:
        status = Status.OPTIMAL if res <= feas_tol else Status.INFEASIBLE
    else:
        status = Status.MAX_ITER
    return SolveResult(status, x, p.objective(x), res, int(sol.iterations))


def dump_program(p: ConvexProgram, path) -> None:
    """Write ``p`` as JSON for offline inspection."""

    def arr(a):
        return None if a is None else np.asarray(a).tolist()

    doc = {
        "version": "firefly-program-v1",
        "n_vars": p.n_vars,
        "P": arr(p.P), "q": arr(p.q),
        "Aeq": arr(p.Aeq), "beq": arr(p.beq),
        "Ain": arr(p.Ain), "bin": arr(p.bin),
        "lo": arr(p.lo), "hi": arr(p.hi),
        "balls": [{"F": arr(b.F), "g": arr(b.g), "radius": float(b.radius)} for b in p.balls],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_program(path) -> ConvexProgram:
    doc = json.loads(Path(path).read_text())

    def arr(a):
        return None if a is None else np.asarray(a, dtype=float)

    return ConvexProgram(
        P=arr(doc["P"]).reshape(doc["n_vars"], doc["n_vars"]), q=arr(doc["q"]),
        Aeq=arr(doc["Aeq"]), beq=arr(doc["beq"]), Ain=arr(doc["Ain"]), bin=arr(doc["bin"]),
        lo=arr(doc["lo"]), hi=arr(doc["hi"]),
        balls=[Ball(arr(b["F"]), arr(b["g"]), b["radius"]) for b in doc["balls"]],
    )
