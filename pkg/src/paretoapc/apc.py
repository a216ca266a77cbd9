"""Adaptive parameter control: trace the efficient front with even spacing.

Reference points ``a`` move along the segment between the projections of the
two single-objective minimizers onto a fixed line ``b @ y = beta``.  Each step
length is chosen from the cone multipliers so that consecutive objective
points land about ``alpha`` apart.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .moo import BiObjectiveProblem, FrontEntry, ObjectivePair, ParetoFront, dominates
from .sensitivity import (
    DegenerateActiveSetError,
    SingularSystemError,
    classify_constraints,
    predict_solution,
    solve_sensitivity_system,
)
from .solver import SolverOptions, SpParameters, SpSolution, solve_min_objective, solve_sp

log = logging.getLogger(__name__)


class ZeroStepError(ArithmeticError):
    """The first-order model predicts no objective movement for this step."""


class CollapsedFrontNotice(UserWarning):
    pass


@dataclass(frozen=True)
class Hyperplane:
    b: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(2))
        if self.beta not in (0, 1):
            raise ValueError("hyperplane offset must be 0 or 1")


@dataclass(frozen=True)
class ApcConfig:
    r: tuple = (1.0, 1.0)
    alpha: float | None = None        # None -> span of the anchors / alpha_divisions
    hyperplane: Hyperplane = field(default_factory=Hyperplane)
    m1: float | None = None           # None -> compute_m1_bound
    solver: SolverOptions = field(default_factory=SolverOptions)
    max_front_points: int = 1000
    alpha_divisions: int = 50
    use_prediction: bool = True

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if r.shape != (2,) or np.any(r < 0) or not r[0] > 0:
            raise ValueError("r must be a nonnegative 2-vector with r1 > 0")
        if abs(float(self.hyperplane.b @ r)) == 0.0:
            raise ValueError("hyperplane normal must not be orthogonal to r")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.max_front_points < 2:
            raise ValueError("max_front_points must be at least 2")


def compute_m1_bound(problem: BiObjectiveProblem, r=(1.0, 1.0)) -> float:
    """A value strictly above ``max f2 - min f1 * r2 / r1``."""
    return problem.f2_upper - problem.f1_lower * r[1] / r[0] + 1.0


def project_to_hyperplane(f_val, hyperplane: Hyperplane, r) -> tuple[float, np.ndarray]:
    f_val, r = np.asarray(f_val, dtype=float), np.asarray(r, dtype=float)
    b = hyperplane.b
    t = (b @ f_val - hyperplane.beta) / (b @ r)
    return float(t), f_val - t * r


@dataclass(frozen=True)
class Anchors:
    a1: np.ndarray
    aE: np.ndarray
    v: np.ndarray
    p1: np.ndarray
    pE: np.ndarray
    sp_start: SpSolution      # solution of SP((0, M1))
    m1: float

    @property
    def collapsed(self) -> bool:
        return bool(np.linalg.norm(self.v) <= 1e-12 * max(1.0, np.linalg.norm(self.a1)))


def anchor_points(problem: BiObjectiveProblem, config: ApcConfig) -> Anchors:
    r = np.asarray(config.r, dtype=float)
    m1 = config.m1 if config.m1 is not None else compute_m1_bound(problem, r)
    start = solve_sp(problem, SpParameters([0.0, m1], r), options=config.solver)
    p1 = start.p
    _, a1 = project_to_hyperplane(problem.objectives(p1), config.hyperplane, r)
    pE = solve_min_objective(problem, "f2", options=config.solver)
    _, aE = project_to_hyperplane(problem.objectives(pE), config.hyperplane, r)
    return Anchors(a1, aE, aE - a1, p1, pE, start, float(m1))


def apc_step(a_l, mu_l, v, alpha: float, r) -> np.ndarray:
    a_l, mu_l, v, r = (np.asarray(x, dtype=float) for x in (a_l, mu_l, v, r))
    denom = float(np.linalg.norm(v - (mu_l @ v) * r))
    if denom == 0.0:
        raise ZeroStepError("predicted objective displacement is zero")
    return a_l + (alpha / denom) * v


def in_segment(a, a1, v, tol: float = 1e-9) -> float | None:
    """``rho`` with ``a = a1 + rho v`` and ``0 <= rho <= 1``, else None."""
    a, a1, v = (np.asarray(x, dtype=float) for x in (a, a1, v))
    vv = float(v @ v)
    d = a - a1
    rho = float(d @ v) / vv
    off = np.linalg.norm(d - rho * v)
    if off > tol * np.sqrt(vv):
        return None
    if -tol <= rho <= 1.0 + tol:
        return min(max(rho, 0.0), 1.0)
    return None


def _normalized_mu(mu, r):
    """Rescale so ``mu @ r = 1``; None when the recovered multiplier is off by > 1%."""
    scale = float(np.asarray(mu) @ r)
    if not abs(scale - 1.0) <= 0.01:
        return None
    return np.asarray(mu) / scale


def _warm_start(problem, sol: SpSolution, params: SpParameters, v, s):
    part = classify_constraints(sol, params, problem)
    try:
        d = solve_sensitivity_system(sol, part, v, problem, params.r)
    except (DegenerateActiveSetError, SingularSystemError):
        return sol.p
    return predict_solution(sol, d, s).p


def _entry(problem, sol: SpSolution, a) -> FrontEntry:
    return FrontEntry(sol.p, ObjectivePair(*problem.objectives(sol.p)), sol, np.asarray(a, dtype=float))


def run_apc(problem: BiObjectiveProblem, config: ApcConfig | None = None) -> ParetoFront:
    """Trace the efficient front from the ``f1`` minimizer to the ``f2`` minimizer.

    ``front.meta`` carries the anchors, the spacing actually used, the
    reference-point path and the points dropped because their SP did not
    converge.
    """
    config = config or ApcConfig()
    r = np.asarray(config.r, dtype=float)
    opts = config.solver
    anchors = anchor_points(problem, config)
    a1, aE, v = anchors.a1, anchors.aE, anchors.v
    f1_pt, fE_pt = problem.objectives(anchors.p1), problem.objectives(anchors.pE)
    span = float(np.linalg.norm(f1_pt - fE_pt))
    alpha = config.alpha if config.alpha is not None else span / config.alpha_divisions
    meta = {"anchors": anchors, "alpha": alpha, "flagged": [], "path": [a1.copy()]}

    solE = solve_sp(problem, SpParameters(aE, r), warm_start=anchors.pE, options=opts)
    if anchors.collapsed or span == 0.0:
        log.warning("front collapsed to a single point")
        return ParetoFront((_entry(problem, solE, aE),), meta=meta)

    sol = solve_sp(problem, SpParameters(a1, r), warm_start=anchors.p1, options=opts)
    entries = [_entry(problem, sol, a1)]
    a = a1
    while len(entries) < config.max_front_points - 1:
        mu = _normalized_mu(sol.mu, r)
        if mu is None:
            log.warning("multiplier normalization off at a=%s; stopping", a)
            break
        step_alpha, a_next = alpha, None
        for _ in range(5):
            try:
                a_next = apc_step(a, mu, v, step_alpha, r)
                break
            except ZeroStepError:
                step_alpha /= 2.0
        if a_next is None:
            log.warning("zero step at a=%s; stopping", a)
            break
        rho = in_segment(a_next, a1, v, tol=1e-9)
        if rho is None or rho >= 1.0:
            break
        params = SpParameters(a_next, r)
        warm = sol.p
        if config.use_prediction and sol.ok:
            s = float(np.linalg.norm(a_next - a) / np.linalg.norm(v))
            warm = _warm_start(problem, sol, SpParameters(a, r), v, s)
        nxt = solve_sp(problem, params, warm_start=warm, options=opts)
        meta["path"].append(a_next.copy())
        a = a_next
        if not nxt.ok:
            meta["flagged"].append((a_next.copy(), nxt))
            log.warning("SP at a=%s: %s (residual %.2e)", a_next, nxt.status.value, nxt.kkt_residual)
            if _normalized_mu(nxt.mu, r) is not None:
                sol = nxt
            continue
        entries.append(_entry(problem, nxt, a_next))
        sol = nxt

    last = _entry(problem, solE, aE)
    while entries and not _strictly_ordered(entries[-1].f, last.f):
        entries.pop()
    entries.append(last)
    meta["path"].append(aE.copy())
    return ParetoFront(tuple(entries), meta=meta)


def _strictly_ordered(prev, last) -> bool:
    return not (dominates(prev, last) or dominates(last, prev) or tuple(prev) == tuple(last))
