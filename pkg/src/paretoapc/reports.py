"""Tables derived from fronts and baselines: the rows the CLI writes."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import cellnet
from .apc import ApcConfig, run_apc
from .moo import ParetoFront
from .solver import SolverOptions, SpParameters, solve_sp

FRONT_SCHEMA = "apc-front/1"
FRONT_COLUMNS = [
    "index", "t", "a1", "a2", "f1", "f2_watts", "throughput_contribution_bits_s_hz",
    "system_throughput_bps", "energy_efficiency_bps_per_w", "kkt_residual",
]
SWEEP_SCHEMA = "sweep/1"
SWEEP_COLUMNS = [
    "budget_w", "scheme", "bs_power_w", "throughput_contribution_bits_s_hz",
    "system_throughput_pre_update_bps", "system_throughput_bps", "total_power_w",
    "energy_efficiency_bps_per_w",
]
SCHEMES = ("epa", "utilmax", "pricing", "apc")


def worker_count() -> int:
    env = os.environ.get("PARETO_APC_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def bs_problem(scenario, m, base_powers):
    prices = cellnet.compute_prices(scenario, base_powers)
    return cellnet.build_bs_problem(scenario, m, base_powers, prices), prices


def trace_front(scenario, m: int, base_powers, config: ApcConfig | None = None) -> ParetoFront:
    problem, _ = bs_problem(scenario, m, base_powers)
    return run_apc(problem, config)


def front_rows(scenario, m: int, front: ParetoFront, base_powers) -> list:
    rows = []
    for k, e in enumerate(front):
        thr, _, ee = cellnet.network_metrics(scenario, cellnet.with_row(base_powers, m, e.p))
        a = e.a if e.a is not None else (np.nan, np.nan)
        rows.append([k, e.solution.t, a[0], a[1], e.f.f1, e.f.f2, -e.f.f1, thr, ee,
                     e.solution.kkt_residual])
    return rows


def spacing_stats(front: ParetoFront, alpha: float) -> dict:
    f = front.objectives
    if len(f) < 2:
        return {"pairs": 0}
    gaps = np.linalg.norm(np.diff(f, axis=0), axis=1) / alpha
    within = (gaps >= 0.5) & (gaps <= 1.5)
    return {
        "pairs": int(gaps.size),
        "min_over_alpha": float(gaps.min()),
        "max_over_alpha": float(gaps.max()),
        "mean_over_alpha": float(gaps.mean()),
        "fraction_within_half_alpha": float(within.mean()),
    }


def marginal_gain_ratio(power, contribution, low=10.0, high=20.0) -> float:
    """Gain per watt above ``high`` W divided by gain per watt below ``low`` W.

    Computed on the piecewise-linear curve through the front points.
    """
    power, contribution = np.asarray(power), np.asarray(contribution)
    order = np.argsort(power)
    power, contribution = power[order], contribution[order]
    top = power[-1]
    if top <= high:
        return float("nan")
    at = lambda x: float(np.interp(x, power, contribution))  # noqa: E731
    low_rate = (at(low) - at(0.0)) / low
    high_rate = (at(top) - at(high)) / (top - high)
    return high_rate / low_rate


def is_unimodal(x, y, rtol: float = 1e-9) -> tuple[bool, int]:
    """Whether ``y`` sorted by ``x`` rises to one peak and then falls.

    Also returns the peak position in that sorted order.
    """
    order = np.argsort(x, kind="stable")
    ys = np.asarray(y)[order]
    k = int(np.argmax(ys))
    slack = rtol * max(1.0, float(np.max(np.abs(ys))))
    up = np.all(np.diff(ys[: k + 1]) >= -slack)
    down = np.all(np.diff(ys[k:]) <= slack)
    return bool(up and down), k


def efficient_point_at_power(problem, budget: float, options=None):
    """Front point with ``f2 <= budget``: SP with a vertical direction ``r = (1, 0)``."""
    sol = solve_sp(problem, SpParameters([0.0, budget], [1.0, 0.0]), options=options)
    return sol


def allocate(scenario, m: int, scheme: str, budget: float, base_powers,
             options: SolverOptions | None = None) -> np.ndarray:
    if scheme == "epa":
        return cellnet.epa_allocation(scenario, m, budget)
    if scheme == "utilmax":
        return cellnet.utility_max(scenario, m, base_powers, budget)
    prices = cellnet.compute_prices(scenario, base_powers)
    if scheme == "pricing":
        return cellnet.pricing_best_response(scenario, m, base_powers, prices, budget, options)
    if scheme == "apc":
        problem = cellnet.build_bs_problem(scenario, m, base_powers, prices)
        return efficient_point_at_power(problem, budget, options).p
    raise ValueError(f"unknown scheme {scheme!r}; choose from {', '.join(SCHEMES)}")


def pre_update_throughput(scenario, m: int, base_powers, row) -> float:
    """System throughput with BS ``m`` changed but other cells' rates left as before."""
    before = cellnet.rates(scenario, base_powers)
    after = cellnet.rates(scenario, cellnet.with_row(base_powers, m, row))
    before[m] = after[m]
    return scenario.bandwidth_hz / scenario.n_subcarriers * float(before.sum())


def baseline_report(scenario, m: int, scheme: str, budget: float, base_powers,
                    options: SolverOptions | None = None) -> dict:
    row = allocate(scenario, m, scheme, budget, base_powers, options)
    new_powers = cellnet.with_row(base_powers, m, row)
    old_prices = cellnet.compute_prices(scenario, base_powers)
    new_prices = cellnet.compute_prices(scenario, new_powers)
    thr, total, ee = cellnet.network_metrics(scenario, new_powers)
    return {
        "scheme": scheme,
        "bs": m,
        "budget_w": budget,
        "powers_w": row.tolist(),
        "bs_power_w": float(row.sum()),
        "throughput_contribution_bits_s_hz": cellnet.throughput_contribution(scenario, m, new_powers, old_prices),
        "throughput_contribution_post_update_bits_s_hz": cellnet.throughput_contribution(scenario, m, new_powers, new_prices),
        "system_throughput_pre_update_bps": pre_update_throughput(scenario, m, base_powers, row),
        "system_throughput_bps": thr,
        "total_power_w": total,
        "energy_efficiency_bps_per_w": ee,
    }


def sweep_rows(scenario, m: int, budgets, base_powers, schemes=SCHEMES,
               options: SolverOptions | None = None, workers: int | None = None) -> list:
    jobs = [(b, s) for b in budgets for s in schemes]

    def run(job):
        b, s = job
        rep = baseline_report(scenario, m, s, b, base_powers, options)
        return [b, s, rep["bs_power_w"], rep["throughput_contribution_bits_s_hz"],
                rep["system_throughput_pre_update_bps"], rep["system_throughput_bps"],
                rep["total_power_w"], rep["energy_efficiency_bps_per_w"]]

    with ThreadPoolExecutor(max_workers=workers or worker_count()) as pool:
        return list(pool.map(run, jobs))
