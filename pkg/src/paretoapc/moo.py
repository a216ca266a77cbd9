"""Bi-objective minimization vocabulary: objective pairs, dominance, fronts.

Dominance is taken with respect to the nonnegative orthant of the plane:
``y1`` dominates ``y2`` when it is no worse in both components and differs
from it somewhere.  Comparisons are exact; tolerances belong to callers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np


class _Pair(NamedTuple):
    f1: float
    f2: float


class ObjectivePair(_Pair):
    """Objective vector ``(f1, f2)``.

    ``f1`` is the negated throughput contribution, ``f2`` the total power in
    watts.  Both must be finite and ``f2`` nonnegative.
    """

    __slots__ = ()

    def __new__(cls, f1: float, f2: float):
        f1, f2 = float(f1), float(f2)
        if not (math.isfinite(f1) and math.isfinite(f2)):
            raise ValueError(f"objective values must be finite, got ({f1}, {f2})")
        if f2 < 0.0:
            raise ValueError(f"f2 (power) must be nonnegative, got {f2}")
        return super().__new__(cls, f1, f2)


def dominates(y1: Sequence[float], y2: Sequence[float]) -> bool:
    """True iff ``y1 <= y2`` componentwise and ``y1 != y2``."""
    return (y1[0] <= y2[0] and y1[1] <= y2[1]) and (y1[0] < y2[0] or y1[1] < y2[1])


def nondominated_mask(points: Sequence[Sequence[float]]) -> np.ndarray:
    """Boolean survivor mask for :func:`filter_nondominated`.

    Sort-and-sweep, O(n log n).  Of several identical vectors only the first
    occurrence survives.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    keep = np.zeros(n, dtype=bool)
    if n == 0:
        return keep
    # lexsort: last key is primary -> (f1, f2, original index)
    order = np.lexsort((np.arange(n), pts[:, 1], pts[:, 0]))
    best_f2 = math.inf
    for i in order:
        if pts[i, 1] < best_f2:
            keep[i] = True
            best_f2 = pts[i, 1]
    return keep


def filter_nondominated(points: Iterable[Sequence[float]]) -> list:
    """Points not dominated by any other input point, in input order."""
    points = list(points)
    if not points:
        return []
    mask = nondominated_mask(points)
    return [p for p, k in zip(points, mask) if k]


def _simplex_box_constraints(p: np.ndarray, p_max: float) -> np.ndarray:
    return np.append(p, p_max - p.sum())


@dataclass(frozen=True)
class BiObjectiveProblem:
    """Two smooth objectives over ``{p >= 0, sum(p) <= p_max}``.

    The constraint vector has the ``N + 1`` components
    ``g_j(p) = p_j`` (j < N) and ``g_N(p) = p_max - sum(p)``.

    ``objectives(p)`` returns shape (2,), ``gradients(p)`` shape (2, N) and
    ``hessians(p)`` shape (2, N, N).  ``f1_lower`` and ``f2_upper`` are
    certified bounds of the objectives over the feasible set; they seed the
    initial reference point of the front tracer.
    """

    dimension: int
    p_max: float
    objectives: Callable[[np.ndarray], np.ndarray]
    gradients: Callable[[np.ndarray], np.ndarray]
    hessians: Callable[[np.ndarray], np.ndarray]
    f1_lower: float
    f2_upper: float
    name: str = "problem"

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if not self.p_max >= 0:
            raise ValueError("p_max must be nonnegative")

    def evaluate(self, p) -> ObjectivePair:
        return ObjectivePair(*self.objectives(np.asarray(p, dtype=float)))

    def constraints(self, p) -> np.ndarray:
        return _simplex_box_constraints(np.asarray(p, dtype=float), self.p_max)

    def constraint_gradients(self, p=None) -> np.ndarray:
        n = self.dimension
        return np.vstack([np.eye(n), -np.ones((1, n))])

    def is_feasible(self, p, tol: float = 0.0) -> bool:
        return bool(np.all(self.constraints(p) >= -tol))


@dataclass(frozen=True)
class FrontEntry:
    p: np.ndarray
    f: ObjectivePair
    solution: object = None  # SpSolution, kept loose to avoid an import cycle
    a: np.ndarray | None = None


@dataclass(frozen=True)
class ParetoFront:
    """Entries sorted by ascending ``f2`` with no entry dominating another."""

    entries: tuple = field(default_factory=tuple)
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        entries = tuple(sorted(self.entries, key=lambda e: e.f.f2))
        object.__setattr__(self, "entries", entries)
        pts = [e.f for e in entries]
        if not all(nondominated_mask(pts)):
            raise ValueError("front contains dominated or duplicate points")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def objectives(self) -> np.ndarray:
        return np.array([tuple(e.f) for e in self.entries], dtype=float).reshape(-1, 2)

    @property
    def powers(self) -> np.ndarray:
        return np.array([e.p for e in self.entries])
