"""Multi-cell downlink OFDMA model with interference pricing.

Gains are stored as a tensor ``gains[j, m, n]``: the power gain from BS ``j``
to the user that BS ``m`` serves on subcarrier ``n``.  With that orientation
the interference seen by cell ``m`` is ``sum_{j != m} gains[j, m, n] p_j`` and
the interference BS ``m`` causes to cell ``j`` is ``gains[m, j, n] p_m``.

Powers for the whole network are ``(M, N)`` arrays, one row per BS.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .moo import BiObjectiveProblem
from .solver import SolverOptions, solve_min_objective

LN2 = math.log(2.0)


class InvalidConfigError(ValueError):
    pass


class StalePriceError(RuntimeError):
    """Prices were computed from a different power state."""


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    n_cells: int = 19
    n_subcarriers: int = 64
    isd_m: float = 1000.0
    bandwidth_hz: float = 10e6
    p_max_w: float = 30.0
    noise_psd_dbm_hz: float = -174.0
    min_distance_m: float = 35.0

    def validate(self):
        if self.n_cells < 1 or self.n_subcarriers < 1:
            raise InvalidConfigError("cell and subcarrier counts must be positive")
        if not (self.isd_m > 0 and self.bandwidth_hz > 0 and self.p_max_w > 0):
            raise InvalidConfigError("distances, bandwidth and power budget must be positive")
        if not 0 < self.min_distance_m < self.isd_m / 2:
            raise InvalidConfigError("min_distance_m must lie in (0, isd_m / 2)")

    @property
    def noise_power_w(self) -> float:
        sub_bw = self.bandwidth_hz / self.n_subcarriers
        return 10 ** ((self.noise_psd_dbm_hz - 30.0) / 10.0) * sub_bw


@dataclass(frozen=True, eq=False)
class Scenario:
    n_cells: int
    n_subcarriers: int
    bs_positions: np.ndarray      # (M, 2) meters
    user_positions: np.ndarray    # (M, N, 2) user served by BS m on subcarrier n
    gains: np.ndarray             # (M, M, N), see module docstring
    sigma2: float
    p_max: float
    bandwidth_hz: float
    isd_m: float
    seed: int

    def __post_init__(self):
        m, n = self.n_cells, self.n_subcarriers
        if self.gains.shape != (m, m, n):
            raise InvalidConfigError(f"gains must have shape {(m, m, n)}, got {self.gains.shape}")
        if self.user_positions.shape != (m, n, 2) or self.bs_positions.shape != (m, 2):
            raise InvalidConfigError("position arrays do not match the cell/subcarrier counts")
        if not (np.all(np.isfinite(self.gains)) and np.all(self.gains >= 0)):
            raise InvalidConfigError("gains must be finite and nonnegative")
        if not (self.sigma2 > 0 and self.p_max > 0):
            raise InvalidConfigError("noise power and power budget must be positive")

    def user_index(self, m: int, n: int) -> int:
        """Users are numbered slot by slot; each (BS, subcarrier) slot has one user."""
        return m * self.n_subcarriers + n

    def epa_powers(self, total_power: float | None = None) -> np.ndarray:
        total = self.p_max if total_power is None else total_power
        return np.full((self.n_cells, self.n_subcarriers), total / self.n_subcarriers)


def path_loss_db(d_km):
    return 128.1 + 37.6 * np.log10(d_km)


def hex_positions(n_cells: int, isd: float) -> np.ndarray:
    """Centre cell first, then rings outward, walked counter-clockwise."""
    dirs = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]
    axial = [(0, 0)]
    ring = 1
    while len(axial) < n_cells:
        q, r = ring, 0
        for d in range(6):
            dq, dr = dirs[(d + 2) % 6]
            for _ in range(ring):
                axial.append((q, r))
                q, r = q + dq, r + dr
        ring += 1
    axial = np.array(axial[:n_cells], dtype=float)
    x = isd * (axial[:, 0] + axial[:, 1] / 2.0)
    y = isd * (axial[:, 1] * math.sqrt(3.0) / 2.0)
    return np.column_stack([x, y])


def generate_scenario(config: ScenarioConfig, seed: int) -> Scenario:
    """Hexagonal layout, uniform users in a disk per cell, Rayleigh-faded path loss.

    One PCG64 stream is spawned for user placement and one for fading, both
    from ``SeedSequence(seed)``.
    """
    config.validate()
    m, n = config.n_cells, config.n_subcarriers
    place_ss, fade_ss = np.random.SeedSequence(seed).spawn(2)
    place = np.random.Generator(np.random.PCG64(place_ss))
    fade = np.random.Generator(np.random.PCG64(fade_ss))

    bs = hex_positions(m, config.isd_m)
    r_out, r_in = config.isd_m / 2.0, config.min_distance_m
    radius = np.sqrt(place.uniform(r_in ** 2, r_out ** 2, size=(m, n)))
    angle = place.uniform(0.0, 2.0 * math.pi, size=(m, n))
    users = bs[:, None, :] + np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)

    # dist[j, m, n]: BS j to the user of cell m on subcarrier n
    dist = np.linalg.norm(bs[:, None, None, :] - users[None, :, :, :], axis=-1)
    dist = np.maximum(dist, config.min_distance_m)
    pl = 10.0 ** (-path_loss_db(dist / 1000.0) / 10.0)
    gains = pl * fade.exponential(1.0, size=(m, m, n))
    return Scenario(m, n, bs, users, gains, config.noise_power_w, config.p_max_w,
                    config.bandwidth_hz, config.isd_m, int(seed))


# ---------------------------------------------------------------- rates

def _check_powers(scenario: Scenario, powers) -> np.ndarray:
    p = np.asarray(powers, dtype=float)
    if p.shape != (scenario.n_cells, scenario.n_subcarriers):
        raise ValueError(f"powers must have shape {(scenario.n_cells, scenario.n_subcarriers)}")
    return p


def interference(scenario: Scenario, powers) -> np.ndarray:
    """``I[m, n] = sum_{j != m} gains[j, m, n] * p[j, n]``."""
    p = _check_powers(scenario, powers)
    g = scenario.gains
    total = np.einsum("jmn,jn->mn", g, p)
    own = np.einsum("mmn->mn", g) * p
    return total - own


def own_gains(scenario: Scenario) -> np.ndarray:
    return np.einsum("mmn->mn", scenario.gains)


def rates(scenario: Scenario, powers) -> np.ndarray:
    p = _check_powers(scenario, powers)
    sinr = own_gains(scenario) * p / (scenario.sigma2 + interference(scenario, p))
    return np.log2(1.0 + sinr)


def subchannel_rate(scenario: Scenario, m: int, n: int, powers) -> float:
    p = _check_powers(scenario, powers)
    g = scenario.gains[:, m, n]
    i_mn = float(g @ p[:, n] - g[m] * p[m, n])
    return math.log2(1.0 + g[m] * p[m, n] / (scenario.sigma2 + i_mn))


def price_formula(signal, noise_plus_interference):
    """``-dU/dI`` for ``U = log2(1 + S / (sigma2 + I))``."""
    return signal / (LN2 * noise_plus_interference * (noise_plus_interference + signal))


def pricing_rate(scenario: Scenario, j: int, n: int, powers) -> float:
    p = _check_powers(scenario, powers)
    g = scenario.gains[:, j, n]
    npi = scenario.sigma2 + float(g @ p[:, n] - g[j] * p[j, n])
    return float(price_formula(g[j] * p[j, n], npi))


def _digest(powers: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(powers, dtype=float).tobytes()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class PriceTable:
    """Interference prices ``pi[j, n]`` stamped with the power state they came from."""

    prices: np.ndarray
    source_powers: np.ndarray
    version: str

    def check(self, powers, exclude: int | None = None):
        """Raise :class:`StalePriceError` unless ``powers`` match the stamp.

        Row ``exclude`` (the deciding BS) is not compared.
        """
        p = np.asarray(powers, dtype=float)
        rows = np.ones(len(p), dtype=bool)
        if exclude is not None:
            rows[exclude] = False
        if p.shape != self.source_powers.shape or not np.array_equal(p[rows], self.source_powers[rows]):
            raise StalePriceError(f"prices {self.version} are stale for this power state")


def compute_prices(scenario: Scenario, powers) -> PriceTable:
    p = _check_powers(scenario, powers).copy()
    npi = scenario.sigma2 + interference(scenario, p)
    prices = price_formula(own_gains(scenario) * p, npi)
    p.setflags(write=False)
    prices.setflags(write=False)
    return PriceTable(prices, p, _digest(p))


def cost_weights(scenario: Scenario, m: int, prices: PriceTable) -> np.ndarray:
    """Per-watt interference cost of BS ``m`` on each subcarrier."""
    g = scenario.gains[m]  # (M, N): BS m toward the user of cell j
    mask = np.ones(scenario.n_cells, dtype=bool)
    mask[m] = False
    return np.sum(prices.prices[mask] * g[mask], axis=0)


def throughput_contribution(scenario: Scenario, m: int, powers, prices: PriceTable) -> float:
    """Own sum rate of BS ``m`` minus its priced interference."""
    p = _check_powers(scenario, powers)
    prices.check(p, exclude=m)
    own = rates(scenario, p)[m].sum()
    cost = float(cost_weights(scenario, m, prices) @ p[m])
    return float(own - cost)


def effective_gains(scenario: Scenario, m: int, other_powers) -> np.ndarray:
    """``g_mm / (sigma2 + I_m)`` per subcarrier with the other BSs frozen."""
    i_m = interference(scenario, other_powers)[m]
    return scenario.gains[m, m] / (scenario.sigma2 + i_m)


def build_bs_problem(scenario: Scenario, m: int, other_powers, prices: PriceTable,
                     p_max: float | None = None) -> BiObjectiveProblem:
    """Bi-objective power problem of BS ``m`` with interference and prices frozen.

    ``f1(p) = -sum log2(1 + c p) + w @ p`` and ``f2(p) = sum(p)``.  ``f1`` is
    separable, so its Hessian is diagonal.
    """
    others = _check_powers(scenario, other_powers)
    prices.check(others, exclude=m)
    c = effective_gains(scenario, m, others)
    w = cost_weights(scenario, m, prices)
    n = scenario.n_subcarriers
    budget = scenario.p_max if p_max is None else float(p_max)

    def objectives(p):
        return np.array([-np.sum(np.log2(1.0 + c * p)) + w @ p, np.sum(p)])

    def gradients(p):
        return np.vstack([-c / (LN2 * (1.0 + c * p)) + w, np.ones(n)])

    def hessians(p):
        h = np.zeros((2, n, n))
        h[0][np.diag_indices(n)] = c * c / (LN2 * (1.0 + c * p) ** 2)
        return h

    g_max = float(np.max(scenario.gains[m, m]))
    f1_lower = -n * math.log2(1.0 + g_max * budget / scenario.sigma2)
    return BiObjectiveProblem(n, budget, objectives, gradients, hessians,
                              f1_lower=f1_lower, f2_upper=budget, name=f"bs{m}")


# ------------------------------------------------------------ baselines

def epa_allocation(scenario: Scenario, m: int, total_power: float) -> np.ndarray:
    if not 0.0 <= total_power <= scenario.p_max:
        raise BudgetError(f"total power {total_power} outside [0, {scenario.p_max}]")
    return np.full(scenario.n_subcarriers, total_power / scenario.n_subcarriers)


def water_filling(c, budget: float) -> np.ndarray:
    """Maximize ``sum log2(1 + c p)`` s.t. ``sum p = budget``, ``p >= 0``."""
    c = np.asarray(c, dtype=float)
    p = np.zeros_like(c)
    idx = np.flatnonzero(c > 0)
    if budget <= 0 or idx.size == 0:
        return p
    floors = 1.0 / c[idx]
    order = np.argsort(floors, kind="stable")
    fs = floors[order]
    levels = (budget + np.cumsum(fs)) / np.arange(1, fs.size + 1)
    nxt = np.append(fs[1:], np.inf)
    k = int(np.argmax(levels <= nxt))
    level = levels[k]
    p[idx[order[: k + 1]]] = level - fs[: k + 1]
    return p


def utility_max(scenario: Scenario, m: int, other_powers, budget: float) -> np.ndarray:
    """Greedy rate maximization: water-filling, caused interference ignored."""
    if budget > scenario.p_max:
        raise BudgetError(f"budget {budget} exceeds p_max {scenario.p_max}")
    return water_filling(effective_gains(scenario, m, _check_powers(scenario, other_powers)), budget)


def pricing_best_response(scenario: Scenario, m: int, other_powers, prices: PriceTable,
                          budget: float, options: SolverOptions | None = None) -> np.ndarray:
    """Maximize the throughput contribution of BS ``m`` within ``budget``."""
    if not np.any(cost_weights(scenario, m, prices)):
        prices.check(other_powers, exclude=m)
        return utility_max(scenario, m, other_powers, budget)
    problem = build_bs_problem(scenario, m, other_powers, prices, p_max=budget)
    return solve_min_objective(problem, "f1", options=options)


def network_metrics(scenario: Scenario, powers) -> tuple[float, float, float]:
    """(system throughput in bit/s, total power in W, energy efficiency in bit/s/W)."""
    p = _check_powers(scenario, powers)
    thr = scenario.bandwidth_hz / scenario.n_subcarriers * float(rates(scenario, p).sum())
    total = float(p.sum())
    ee = thr / total if total > 0 else 0.0
    return thr, total, ee


def with_row(powers, m: int, row) -> np.ndarray:
    out = np.array(powers, dtype=float, copy=True)
    out[m] = row
    return out
