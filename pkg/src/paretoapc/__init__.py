"""Efficient power/throughput fronts for multi-cell OFDMA base stations."""
from .apc import ApcConfig, Hyperplane, run_apc
from .cellnet import Scenario, ScenarioConfig, generate_scenario
from .moo import BiObjectiveProblem, ObjectivePair, ParetoFront, dominates, filter_nondominated
from .solver import SpParameters, SpSolution, solve_min_objective, solve_sp

__version__ = "0.1.0"

__all__ = [
    "ApcConfig", "BiObjectiveProblem", "Hyperplane", "ObjectivePair", "ParetoFront",
    "Scenario", "ScenarioConfig", "SpParameters", "SpSolution", "dominates",
    "filter_nondominated", "generate_scenario", "run_apc", "solve_min_objective", "solve_sp",
]
