"""First-order sensitivity of SP(a) solutions along a direction in ``a``.

Along ``a(s) = a0 + s v`` the solution ``(t, p, mu, beta)`` of a
non-degenerate SP has right-hand derivatives obtained from a square linear
system: differentiate the stationarity conditions, keep strongly active
constraints active and hold the multipliers of inactive constraints at zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .moo import BiObjectiveProblem
from .solver import SpParameters, SpSolution


class DegenerateActiveSetError(RuntimeError):
    """An active constraint has a zero multiplier; the linear system does not apply."""


class SingularSystemError(RuntimeError):
    pass


@dataclass(frozen=True)
class ActiveSetPartition:
    i_plus: tuple
    i_zero: tuple
    i_minus: tuple
    j_plus: tuple
    j_zero: tuple
    j_minus: tuple

    @property
    def degenerate(self) -> bool:
        return bool(self.i_zero or self.j_zero)


def _split(values, mults, vtol, mtol):
    plus, zero, minus = [], [], []
    for k, (val, mul) in enumerate(zip(values, mults)):
        if val <= vtol:
            (plus if mul > mtol else zero).append(k)
        else:
            minus.append(k)
    return tuple(plus), tuple(zero), tuple(minus)


def classify_constraints(solution: SpSolution, params: SpParameters,
                         problem: BiObjectiveProblem, tol: float = 1e-7) -> ActiveSetPartition:
    """Three-way split of both constraint families by value and multiplier.

    A constraint is active when its value is at most ``tol`` times the problem
    scale; an active constraint with multiplier above ``tol`` (relative to
    the largest multiplier) is strongly active.
    """
    a, r = params.a, params.r
    cone = a + solution.t * r - problem.objectives(solution.p)
    g = problem.constraints(solution.p)
    vtol = tol * max(1.0, float(np.max(np.abs(a))), problem.p_max)
    mtol = tol * max(1.0, float(np.max(solution.mu)), float(np.max(solution.beta, initial=0.0)))
    ip, iz, im = _split(cone, solution.mu, vtol, mtol)
    jp, jz, jm = _split(g, solution.beta, vtol, mtol)
    return ActiveSetPartition(ip, iz, im, jp, jz, jm)


class SensitivityDerivatives(NamedTuple):
    t_bar: float
    p_bar: np.ndarray
    mu_bar: np.ndarray
    beta_bar: np.ndarray


def sensitivity_matrix(solution: SpSolution, partition: ActiveSetPartition,
                       problem: BiObjectiveProblem, r) -> tuple[np.ndarray, list]:
    """Coefficient matrix of the derivative system and the cone rows' indices.

    Unknowns are stacked as ``[t_bar, p_bar (N), mu_bar (2), beta_bar (N+1)]``.
    """
    n = problem.dimension
    r = np.asarray(r, dtype=float)
    p0, mu0 = solution.p, solution.mu
    grad_f = problem.gradients(p0)
    grad_g = problem.constraint_gradients(p0)
    hess = np.einsum("i,ijk->jk", mu0, problem.hessians(p0))  # g is linear

    it, ip, imu, ib = 0, slice(1, n + 1), slice(n + 1, n + 3), slice(n + 3, 2 * n + 4)
    size = 2 * n + 4
    rows = []

    row = np.zeros(size)
    row[imu] = -r
    rows.append(row)
    stat = np.zeros((n, size))
    stat[:, ip] = hess
    stat[:, imu] = grad_f.T
    stat[:, ib] = -grad_g.T
    rows.extend(stat)
    cone_rows = []
    for i in partition.i_plus:
        row = np.zeros(size)
        row[it] = r[i]
        row[ip] = -grad_f[i]
        cone_rows.append((len(rows), i))
        rows.append(row)
    for j in partition.j_plus:
        row = np.zeros(size)
        row[ip] = grad_g[j]
        rows.append(row)
    for i in partition.i_minus:
        row = np.zeros(size)
        row[n + 1 + i] = 1.0
        rows.append(row)
    for j in partition.j_minus:
        row = np.zeros(size)
        row[n + 3 + j] = 1.0
        rows.append(row)
    return np.array(rows), cone_rows


def solve_sensitivity_system(solution: SpSolution, partition: ActiveSetPartition, v,
                             problem: BiObjectiveProblem, r=(1.0, 1.0)) -> SensitivityDerivatives:
    if partition.degenerate:
        raise DegenerateActiveSetError(
            f"degenerate constraints I0={partition.i_zero} J0={partition.j_zero}")
    v = np.asarray(v, dtype=float)
    n = problem.dimension
    mat, cone_rows = sensitivity_matrix(solution, partition, problem, r)
    rhs = np.zeros(len(mat))
    for row, i in cone_rows:
        rhs[row] = -v[i]
    if mat.shape[0] != mat.shape[1]:
        raise SingularSystemError(f"system is {mat.shape[0]}x{mat.shape[1]}")
    # row equilibration: Hessian rows of idle subcarriers can be huge
    scale = np.max(np.abs(mat), axis=1)
    scale[scale == 0] = 1.0
    mat_s, rhs_s = mat / scale[:, None], rhs / scale
    sv = np.linalg.svd(mat_s, compute_uv=False)
    if sv[-1] <= 1e-13 * sv[0]:
        raise SingularSystemError(f"sensitivity system is rank deficient (cond {sv[0] / max(sv[-1], 1e-300):.2e})")
    x = np.linalg.solve(mat_s, rhs_s)
    return SensitivityDerivatives(float(x[0]), x[1:n + 1], x[n + 1:n + 3], x[n + 3:])


def system_residual(solution, partition, v, problem, r, derivs: SensitivityDerivatives) -> float:
    """Max abs residual of the derivative system at ``derivs``."""
    mat, cone_rows = sensitivity_matrix(solution, partition, problem, r)
    rhs = np.zeros(len(mat))
    for row, i in cone_rows:
        rhs[row] = -np.asarray(v, dtype=float)[i]
    x = np.concatenate([[derivs.t_bar], derivs.p_bar, derivs.mu_bar, derivs.beta_bar])
    return float(np.max(np.abs(mat @ x - rhs)))


class Prediction(NamedTuple):
    t: float
    p: np.ndarray
    mu: np.ndarray
    beta: np.ndarray


def predict_solution(solution: SpSolution, derivs: SensitivityDerivatives, s: float) -> Prediction:
    """Linear extrapolation of the solution; ``p`` is clipped at zero."""
    return Prediction(
        solution.t + s * derivs.t_bar,
        np.maximum(solution.p + s * derivs.p_bar, 0.0),
        solution.mu + s * derivs.mu_bar,
        solution.beta + s * derivs.beta_bar,
    )


def predict_objectives(f0, s: float, v, mu0, r) -> np.ndarray:
    """``f0 + s v - s (mu0 @ v) r``: first-order objective point after moving ``a`` by ``s v``."""
    f0, v, mu0, r = (np.asarray(x, dtype=float) for x in (f0, v, mu0, r))
    return f0 + s * v + s * (-(mu0 @ v)) * r
