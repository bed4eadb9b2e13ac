"""Independent reference implementations used by the tests.

Nothing here imports the code under test except plain data containers.
"""

from __future__ import annotations

import itertools

import numpy as np


def brute_force_qp(P, q, G=None, h=None, E=None, f=None, lo=None, hi=None, tol=1e-9):
    """Exact minimiser of ``1/2 x'Px + q'x`` s.t. ``G x <= h``, ``E x = f``, ``lo <= x <= hi``.

    Enumerates every active set: each variable is free, at its lower or at
    its upper bound, and any subset of the rows of ``G`` holds with
    equality.  Each candidate solves the KKT system of the resulting
    equality-constrained problem; the feasible candidate with the lowest
    objective wins.  ``P`` must be positive definite.  Returns
    ``(x, objective)`` or ``(None, inf)`` when nothing is feasible.
    """
    P = np.asarray(P, float)
    q = np.asarray(q, float)
    n = q.size
    G = np.zeros((0, n)) if G is None else np.asarray(G, float).reshape(-1, n)
    h = np.zeros(0) if h is None else np.asarray(h, float).reshape(-1)
    E = np.zeros((0, n)) if E is None else np.asarray(E, float).reshape(-1, n)
    f = np.zeros(0) if f is None else np.asarray(f, float).reshape(-1)
    lo = np.full(n, -np.inf) if lo is None else np.asarray(lo, float)
    hi = np.full(n, np.inf) if hi is None else np.asarray(hi, float)
    choices = [[0] + ([-1] if np.isfinite(lo[i]) else []) + ([1] if np.isfinite(hi[i]) else [])
               for i in range(n)]
    eye = np.eye(n)
    best_x, best_obj = None, np.inf
    m = G.shape[0]
    for pattern in itertools.product(*choices):
        fixed = [i for i in range(n) if pattern[i]]
        B = eye[fixed]
        bb = np.array([lo[i] if pattern[i] < 0 else hi[i] for i in fixed])
        for size in range(0, m + 1):
            for active in itertools.combinations(range(m), size):
                A = np.vstack([E, B, G[list(active)]])
                k = A.shape[0]
                if k > n:
                    continue
                b = np.concatenate([f, bb, h[list(active)]])
                K = np.block([[P, A.T], [A, np.zeros((k, k))]])
                try:
                    x = np.linalg.solve(K, np.concatenate([-q, b]))[:n]
                except np.linalg.LinAlgError:
                    continue
                if m and np.max(G @ x - h) > tol:
                    continue
                if E.shape[0] and np.max(np.abs(E @ x - f)) > tol:
                    continue
                if np.any(x < lo - tol) or np.any(x > hi + tol):
                    continue
                obj = 0.5 * x @ P @ x + q @ x
                if obj < best_obj:
                    best_x, best_obj = x, obj
    return best_x, best_obj


def random_qp(rng, n, n_rows, n_boxed, n_eq=0):
    """A random strictly convex QP with a known feasible point.

    Returns ``dict(P, q, Ain, bin, lo, hi, Aeq, beq)`` in solver layout; the
    boxes are on the first ``n_boxed`` variables only.
    """
    A = rng.normal(size=(n, n))
    P = A @ A.T + 0.5 * np.eye(n)
    q = rng.normal(scale=3.0, size=n)
    x_feas = rng.normal(scale=0.5, size=n)
    Ain = rng.normal(size=(n_rows, n))
    bin_ = Ain @ x_feas + rng.uniform(0.0, 1.0, n_rows)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    lo[:n_boxed] = x_feas[:n_boxed] - rng.uniform(0.1, 1.0, n_boxed)
    hi[:n_boxed] = x_feas[:n_boxed] + rng.uniform(0.1, 1.0, n_boxed)
    Aeq = rng.normal(size=(n_eq, n)) if n_eq else None
    beq = Aeq @ x_feas if n_eq else None
    return dict(P=P, q=q, Ain=Ain, bin=bin_, lo=lo, hi=hi, Aeq=Aeq, beq=beq)


def min_energy_reach(s0, n_steps, target, dt):
    """Least ``sum ||u[t]||^2`` input that puts the double integrator at ``target``.

    Closed form: the terminal position is affine in the inputs with weights
    ``w[t] = dt^2 (n - t - 1/2)``, so the minimum-norm solution is
    ``u[t] = w[t] d / ||w||^2`` with ``d`` the displacement still needed.
    """
    s0 = np.asarray(s0, float)
    t = np.arange(n_steps)
    w = dt**2 * (n_steps - t - 0.5)
    d = np.asarray(target, float) - s0[:3] - n_steps * dt * s0[3:]
    return np.outer(w, d) / (w @ w)


def simulate(s0, inputs, dt):
    """Double-integrator rollout written out component by component."""
    p = np.array(s0[:3], float)
    v = np.array(s0[3:], float)
    out = [np.concatenate([p, v])]
    for a in inputs:
        p = p + dt * v + 0.5 * dt * dt * np.asarray(a)
        v = v + dt * np.asarray(a)
        out.append(np.concatenate([p, v]))
    return np.array(out)
