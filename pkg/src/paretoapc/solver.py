"""Scalarized subproblem SP(a, r) and single-objective anchors.

SP(a, r) reads

    min_{t, p}  t   s.t.  a + t r - f(p) >= 0,  p >= 0,  sum(p) <= p_max.

For convex objectives the optimal ``p`` also minimizes the weighted sum
``mu1 f1 + mu2 f2`` over the simplex-box, where ``mu`` are the cone
multipliers normalized by ``mu @ r = 1``.  The solver therefore searches the
scalar weight ``w`` in [0, 1] by bracketed root finding on the imbalance of
the two cone constraints, each evaluation being a weighted-sum solve by a
projected Newton method (diagonal curvature, exact weighted projection onto
the simplex-box).  The cone multipliers come out of the weight directly; the
multipliers of ``g`` are recovered by nonnegative least squares on the
stationarity equations restricted to the active constraints.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq, nnls

from .moo import BiObjectiveProblem

log = logging.getLogger(__name__)


def project_simplex_box(z, p_max: float, weights=None) -> np.ndarray:
    """Weighted Euclidean projection onto ``{q >= 0, sum(q) <= p_max}``.

    Minimizes ``sum_n weights_n (q_n - z_n)**2 / 2``; the solution is
    ``q_n = max(0, z_n - nu / weights_n)`` with the budget price ``nu >= 0``
    located exactly among the sorted breakpoints.
    """
    z = np.asarray(z, dtype=float)
    q = np.maximum(z, 0.0)
    if q.sum() <= p_max:
        return q
    h = np.ones_like(z) if weights is None else np.asarray(weights, dtype=float)
    pos = z > 0
    zp, hp = z[pos], h[pos]
    brk = hp * zp  # q_n hits zero at nu = h_n z_n
    order = np.argsort(-brk, kind="stable")
    zs, inv_h, bs = zp[order], 1.0 / hp[order], brk[order]
    cz = np.cumsum(zs)
    ch = np.cumsum(inv_h)
    nus = (cz - p_max) / ch  # budget price if the first k coordinates stay positive
    nxt = np.append(bs[1:], 0.0)
    ok = (nus <= bs) & (nus >= nxt)
    k = int(np.argmax(ok)) if ok.any() else len(bs) - 1
    nu = max(nus[k], 0.0)
    q = np.maximum(z - nu / h, 0.0)
    q[~pos] = 0.0
    return q


class InnerResult(NamedTuple):
    p: np.ndarray
    iterations: int
    converged: bool


def minimize_weighted(problem: BiObjectiveProblem, weights, p0=None,
                      tol: float = 1e-13, max_iter: int = 500) -> InnerResult:
    """Minimize ``weights @ f(p)`` over the simplex-box by projected Newton."""
    w = np.asarray(weights, dtype=float)
    n, p_max = problem.dimension, problem.p_max
    p = np.zeros(n) if p0 is None else project_simplex_box(p0, p_max)
    xscale = max(1.0, p_max)

    def phi(q):
        return float(w @ problem.objectives(q))

    fp = phi(p)
    for it in range(1, max_iter + 1):
        g = w @ problem.gradients(p)
        pg = np.max(np.abs(p - project_simplex_box(p - g, p_max)))
        if pg <= tol * xscale:
            return InnerResult(p, it, True)
        hd = np.einsum("i,ijj->j", w, problem.hessians(p))
        floor = 1e-9 * max(1.0, float(np.max(np.abs(hd))))
        hd = np.maximum(hd, floor)
        q = project_simplex_box(p - g / hd, p_max, weights=hd)
        d = q - p
        slope = float(g @ d)
        if slope >= 0.0 or np.max(np.abs(d)) <= 1e-15 * xscale:
            # the curvature-scaled step is a stationarity measure too, and
            # stays meaningful when gradients are large
            return InnerResult(p, it, pg <= 1e-9 * xscale or np.max(np.abs(d)) <= 1e-8 * xscale)
        step = 1.0
        while True:
            cand = q if step == 1.0 else np.maximum(p + step * d, 0.0)
            fc = phi(cand)
            if fc <= fp + 1e-4 * step * slope or abs(fc - fp) <= 1e-15 * max(1.0, abs(fp)):
                break
            step *= 0.5
            if step < 1e-14:
                return InnerResult(p, it, False)
        p, fp = cand, fc
    return InnerResult(p, max_iter, False)


@dataclass(frozen=True)
class SpParameters:
    """Reference point ``a`` and direction ``r`` of SP(a, r)."""

    a: np.ndarray
    r: np.ndarray = field(default_factory=lambda: np.ones(2))

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(2)
        r = np.asarray(self.r, dtype=float).reshape(2)
        if np.any(r < 0) or not r[0] > 0:
            raise ValueError(f"direction must satisfy r >= 0 and r1 > 0, got {r}")
        if not np.all(np.isfinite(a)):
            raise ValueError("reference point must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "r", r)


class SolveStatus(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SpSolution:
    t: float
    p: np.ndarray
    mu: np.ndarray
    beta: np.ndarray
    kkt_residual: float
    status: SolveStatus = SolveStatus.CONVERGED
    weight: float = float("nan")  # scalarization weight w in [0, 1]

    @property
    def ok(self) -> bool:
        return self.status is SolveStatus.CONVERGED


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-6            # KKT residual target
    max_iter: int = 10_000       # inner Newton steps summed over one SP solve
    inner_tol: float = 1e-13
    active_rel: float = 1e-7     # constraint value <= active_rel * scale counts as active


def _scale(problem: BiObjectiveProblem, a) -> float:
    return max(1.0, float(np.max(np.abs(a))), problem.p_max)


def recover_beta(problem: BiObjectiveProblem, p, mu, threshold: float) -> np.ndarray:
    """Multipliers of ``g`` from the stationarity equations by NNLS."""
    gvals = problem.constraints(p)
    active = np.flatnonzero(gvals <= threshold)
    beta = np.zeros(problem.dimension + 1)
    if active.size == 0:
        return beta
    rhs = np.asarray(mu) @ problem.gradients(p)
    jac = problem.constraint_gradients(p)[active].T
    sol, _ = nnls(jac, rhs)
    beta[active] = sol
    return beta


def kkt_residual(problem: BiObjectiveProblem, params: SpParameters, candidate) -> float:
    """Largest violation among stationarity, feasibility and complementarity."""
    a, r = params.a, params.r
    p = np.asarray(candidate.p, dtype=float)
    mu = np.asarray(candidate.mu, dtype=float)
    beta = np.asarray(candidate.beta, dtype=float)
    f = problem.objectives(p)
    cone = a + candidate.t * r - f
    g = problem.constraints(p)
    stat_t = abs(1.0 - float(mu @ r))
    stat_p = mu @ problem.gradients(p) - beta @ problem.constraint_gradients(p)
    parts = [
        stat_t,
        float(np.max(np.abs(stat_p))),
        float(np.max(np.maximum(-cone, 0.0))),
        float(np.max(np.maximum(-g, 0.0))),
        float(np.max(np.maximum(-mu, 0.0))),
        float(np.max(np.maximum(-beta, 0.0))),
        float(np.max(np.abs(mu * cone))),
        float(np.max(np.abs(beta * g))),
    ]
    return max(parts)


def _weights(w: float, r) -> np.ndarray:
    if r[1] > 0:
        return np.array([w, 1.0 - w]) / (w * r[0] + (1.0 - w) * r[1])
    # epsilon-constraint form: mu1 fixed by mu @ r = 1, mu2 = (1 - w) / (w r1)
    return np.array([1.0, (1.0 - w) / w]) / r[0]


def solve_sp(problem: BiObjectiveProblem, params: SpParameters, warm_start=None,
             options: SolverOptions | None = None) -> SpSolution:
    opts = options or SolverOptions()
    a, r = params.a, params.r
    state = {"p": None if warm_start is None else np.asarray(warm_start, dtype=float),
             "iters": 0, "inner_ok": True, "cache": {}}

    def solve_at(w):
        if w in state["cache"]:
            return state["cache"][w]
        budget = max(opts.max_iter - state["iters"], 1)
        res = minimize_weighted(problem, _weights(w, r), state["p"],
                                tol=opts.inner_tol, max_iter=min(budget, 500))
        state["iters"] += res.iterations
        state["inner_ok"] &= res.converged
        state["p"] = res.p
        state["cache"][w] = res.p
        return res.p

    if r[1] > 0:
        def imbalance(w):
            f = problem.objectives(solve_at(w))
            return (f[0] - a[0]) / r[0] - (f[1] - a[1]) / r[1]
    else:
        def imbalance(w):
            return a[1] - problem.objectives(solve_at(w))[1]

    status = SolveStatus.CONVERGED
    if imbalance(1.0) >= 0.0:
        w = 1.0
    elif r[1] > 0:
        if imbalance(0.0) <= 0.0:
            w = 0.0
        else:
            w = brentq(imbalance, 0.0, 1.0, xtol=1e-16, rtol=1e-15, maxiter=200)
    else:
        lo = 0.5
        while imbalance(lo) < 0.0 and lo > 1e-12:
            lo *= 0.5
        if imbalance(lo) < 0.0:
            w = lo
            status = SolveStatus.INFEASIBLE
        else:
            w = brentq(imbalance, lo, 1.0, xtol=1e-16, rtol=1e-15, maxiter=200)

    p = solve_at(w)
    mu = _weights(w, r)
    f = problem.objectives(p)
    if r[1] > 0:
        t = max((f[0] - a[0]) / r[0], (f[1] - a[1]) / r[1])
    else:
        t = (f[0] - a[0]) / r[0]
    thr = opts.active_rel * _scale(problem, a)
    beta = recover_beta(problem, p, mu, thr)
    sol = SpSolution(float(t), p, mu, beta, 0.0, status, float(w))
    res = kkt_residual(problem, params, sol)
    if status is SolveStatus.CONVERGED and (res > opts.tol or not state["inner_ok"]):
        status = SolveStatus.MAX_ITER
        log.debug("SP(a=%s) residual %.3e after %d inner steps", a, res, state["iters"])
    return SpSolution(float(t), p, mu, beta, float(res), status, float(w))


def solve_min_objective(problem: BiObjectiveProblem, which: str, warm_start=None,
                        options: SolverOptions | None = None) -> np.ndarray:
    """Minimizer of ``f1`` or ``f2`` alone over the simplex-box."""
    opts = options or SolverOptions()
    weights = {"f1": (1.0, 0.0), "f2": (0.0, 1.0)}[which]
    res = minimize_weighted(problem, weights, warm_start, tol=opts.inner_tol,
                            max_iter=opts.max_iter)
    if not res.converged:
        log.warning("min %s stopped after %d iterations", which, res.iterations)
    return res.p
