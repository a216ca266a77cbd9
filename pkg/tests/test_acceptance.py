"""Acceptance criteria, one test each, every one at its stated tolerance.

Run alone with ``pytest tests/test_acceptance.py -v``; each test prints a
``criterion N: PASS|FAIL`` line and the lines are repeated in the terminal
summary.
"""
import time

import numpy as np
import pytest

from paretoapc import cellnet, persist
from paretoapc.apc import ApcConfig, anchor_points, run_apc
from paretoapc.cli import main
from paretoapc.moo import filter_nondominated
from paretoapc.reports import is_unimodal, marginal_gain_ratio
from paretoapc.sensitivity import (
    DegenerateActiveSetError,
    SingularSystemError,
    classify_constraints,
    predict_solution,
    solve_sensitivity_system,
)
from paretoapc.solver import SpParameters, solve_sp

from oracles import (
    complex_step_jacobian,
    evaluate_all,
    hausdorff,
    scalar_rate,
    simplex_grid,
    staircase,
)

FULL = cellnet.ScenarioConfig()          # 19 cells, 64 subcarriers
FULL_SEED = 7
SEEDS = (1, 2, 3, 4, 5)
R = np.array([1.0, 1.0])


def bs_problem(sc, m=0):
    base = sc.epa_powers()
    prices = cellnet.compute_prices(sc, base)
    return cellnet.build_bs_problem(sc, m, base, prices), base, prices


@pytest.fixture(scope="module")
def full_scenario():
    return cellnet.generate_scenario(FULL, FULL_SEED)


@pytest.fixture(scope="module")
def full_run(full_scenario):
    prob, _, _ = bs_problem(full_scenario)
    start = time.perf_counter()
    front = run_apc(prob)
    return prob, front, time.perf_counter() - start


def test_c01_front_matches_grid_oracle(criterion):
    start = time.perf_counter()
    sc = cellnet.generate_scenario(cellnet.ScenarioConfig(n_cells=2, n_subcarriers=2), seed=7)
    prob, _, _ = bs_problem(sc)
    front = run_apc(prob)
    ref = staircase(evaluate_all(prob, simplex_grid(prob.p_max, 201)))
    dist = hausdorff(front.objectives, ref)
    alpha = front.meta["alpha"]
    elapsed = time.perf_counter() - start
    ok = dist <= 2 * alpha and elapsed <= 60.0
    criterion(1, ok, f"Hausdorff {dist:.4g} <= 2 alpha = {2 * alpha:.4g}; {elapsed:.1f} s <= 60 s")


def test_c02_price_matches_finite_differences(criterion):
    rng = np.random.default_rng(2024)
    sc = cellnet.generate_scenario(FULL, 3)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        powers = rng.uniform(0, 1, (sc.n_cells, sc.n_subcarriers)) * sc.p_max / sc.n_subcarriers * 2
        j, n = int(rng.integers(sc.n_cells)), int(rng.integers(sc.n_subcarriers))
        signal = sc.gains[j, j, n] * powers[j, n]
        interf = sum(sc.gains[k, j, n] * powers[k, n] for k in range(sc.n_cells) if k != j)
        x = sc.sigma2 + interf
        h = 1e-4 * x
        fd = -(scalar_rate(signal, x + h) - scalar_rate(signal, x - h)) / (2 * h)
        closed = cellnet.pricing_rate(sc, j, n, powers)
        if fd == 0.0:
            err = abs(closed)
        else:
            err = abs(closed - fd) / abs(fd)
        worst = max(worst, err)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed <= 5.0
    criterion(2, ok, f"max relative error {worst:.2e} <= 1e-6 over 1000 states; {elapsed:.2f} s <= 5 s")


def test_c03_gradient_matches_finite_differences(criterion, full_scenario):
    rng = np.random.default_rng(3)
    worst = 0.0
    for k in range(100):
        prob, _, _ = bs_problem(full_scenario, m=k % full_scenario.n_cells)
        p = rng.dirichlet(np.ones(prob.dimension)) * rng.uniform(0, 1) * prob.p_max
        ref = complex_step_jacobian(prob.objectives, p)[0]
        err = np.max(np.abs(prob.gradients(p)[0] - ref) / np.abs(ref))
        worst = max(worst, float(err))
    criterion(3, worst <= 1e-6, f"max relative error {worst:.2e} <= 1e-6 at 100 points")


def test_c04_value_function_gradient_is_minus_mu(criterion, full_run):
    prob, front, _ = full_run
    checked, worst = 0, 0.0
    for entry in front.entries[1:-1]:
        sol, a = entry.solution, entry.a
        part = classify_constraints(sol, SpParameters(a, R), prob)
        if part.degenerate or len(part.i_plus) != 2:
            continue
        h = 1e-5 * max(1.0, float(np.max(np.abs(a))))
        grad = np.empty(2)
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            tp = solve_sp(prob, SpParameters(a + e, R), warm_start=sol.p).t
            tm = solve_sp(prob, SpParameters(a - e, R), warm_start=sol.p).t
            grad[i] = (tp - tm) / (2 * h)
        worst = max(worst, float(np.linalg.norm(grad + sol.mu) / np.linalg.norm(sol.mu)))
        checked += 1
        if checked == 20:
            break
    ok = checked == 20 and worst <= 1e-3
    criterion(4, ok, f"max relative error {worst:.2e} <= 1e-3 at {checked} non-degenerate points")


def test_c05_prediction_error_decays(criterion, full_run):
    prob, front, _ = full_run
    v = front.meta["anchors"].v
    s = 1e-3
    ratios = []
    for entry in front.entries[1:-1]:
        sol, a = entry.solution, entry.a
        part = classify_constraints(sol, SpParameters(a, R), prob)
        try:
            d = solve_sensitivity_system(sol, part, v, prob, R)
        except (DegenerateActiveSetError, SingularSystemError):
            continue
        errs = []
        for step in (s, s / 10):
            truth = solve_sp(prob, SpParameters(a + step * v, R), warm_start=sol.p)
            errs.append(np.linalg.norm(predict_solution(sol, d, step).p - truth.p))
        ratios.append(errs[0] / max(errs[1], 1e-300))
        if len(ratios) == 10:
            break
    ratios = np.array(ratios)
    ok = len(ratios) == 10 and bool(np.all(ratios >= 3.0))
    criterion(5, ok, f"error ratio at s/10 min {ratios.min():.1f}, median {np.median(ratios):.1f} "
                     f"(>= 3) at {len(ratios)} points")


def test_c06_front_validity(criterion, full_run):
    _, front, _ = full_run
    f = front.objectives
    alpha = front.meta["alpha"]
    unchanged = np.array_equal(np.array(filter_nondominated([tuple(x) for x in f])), f)
    increasing = bool(np.all(np.diff(f[:, 1]) > 0))
    kkt = max(e.solution.kkt_residual for e in front)
    gaps = np.linalg.norm(np.diff(f, axis=0), axis=1) / alpha
    spaced = float(np.mean((gaps >= 0.5) & (gaps <= 1.5)))
    ok = unchanged and increasing and kkt <= 1e-6 and spaced >= 0.9
    criterion(6, ok, f"{len(f)} points; nondominated {unchanged}; f2 increasing {increasing}; "
                     f"max KKT {kkt:.1e} <= 1e-6; {spaced:.0%} of gaps in [0.5, 1.5] alpha (>= 90%)")


def test_c07_projected_start_point(criterion):
    dp, dmu = [], []
    for seed in SEEDS:
        prob, _, _ = bs_problem(cellnet.generate_scenario(FULL, seed))
        cfg = ApcConfig()
        anchors = anchor_points(prob, cfg)
        proj = solve_sp(prob, SpParameters(anchors.a1, cfg.r))
        dp.append(float(np.max(np.abs(proj.p - anchors.sp_start.p))))
        dmu.append(float(np.max(np.abs(proj.mu - anchors.sp_start.mu))))
    ok = max(dp) <= 1e-4 and max(dmu) <= 1e-3
    criterion(7, ok, f"max |dp| {max(dp):.1e} <= 1e-4, max |dmu| {max(dmu):.1e} <= 1e-3 on {len(SEEDS)} seeds")


def test_c08_pricing_point_on_front(criterion):
    ratios = []
    for seed in SEEDS:
        sc = cellnet.generate_scenario(FULL, seed)
        prob, base, prices = bs_problem(sc)
        front = run_apc(prob)
        # the full-budget response plus budget-limited responses along the sweep grid
        for budget in (5.0, 10.0, 15.0, 20.0, 25.0, 30.0):
            p = cellnet.pricing_best_response(sc, 0, base, prices, budget)
            y = prob.objectives(p)
            dist = float(np.min(np.linalg.norm(front.objectives - y, axis=1)))
            ratios.append(dist / front.meta["alpha"])
    ok = max(ratios) <= 2.0
    criterion(8, ok, f"max distance {max(ratios):.3f} alpha <= 2 alpha over {len(ratios)} "
                     f"budget/seed pairs on {len(SEEDS)} seeds")


def test_c09_front_shapes(criterion, full_scenario, full_run):
    prob, front, elapsed = full_run
    f = front.objectives
    power, contribution = f[:, 1], -f[:, 0]
    ratio = marginal_gain_ratio(power, contribution, low=10.0, high=20.0)
    increasing = bool(np.all(np.diff(contribution) > 0))
    slopes = np.diff(contribution) / np.diff(power)
    concave = bool(np.all(np.diff(slopes) <= 1e-6 * slopes.max()))
    base = full_scenario.epa_powers()
    thr, ee = [], []
    for e in front:
        t, _, eff = cellnet.network_metrics(full_scenario, cellnet.with_row(base, 0, e.p))
        thr.append(t)
        ee.append(eff)
    unimodal, peak = is_unimodal(thr, ee)
    interior = 0 < peak < len(ee) - 1
    ok = ratio < 0.2 and increasing and concave and unimodal and interior and elapsed <= 600
    criterion(9, ok, f"marginal ratio {ratio:.3f} < 0.2; increasing {increasing}; concave {concave}; "
                     f"EE unimodal {unimodal} with peak at {peak}/{len(ee) - 1}; "
                     f"{len(f)} points in {elapsed:.1f} s <= 600 s")


def test_c10_determinism(criterion, tmp_path):
    outputs = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        assert main(["gen-scenario", "--seed", str(FULL_SEED), "-o", str(d / "s.json")]) == 0
        assert main(["apc", "--scenario", str(d / "s.json"), "-o", str(d / "front.csv")]) == 0
        assert main(["sweep", "--scenario", str(d / "s.json"), "-o", str(d / "sweep.csv")]) == 0
        assert main(["baseline", "--seed", str(FULL_SEED), "--scheme", "pricing",
                     "-o", str(d / "base.json")]) == 0
        outputs.append([(d / n).read_bytes() for n in ("s.json", "front.csv", "sweep.csv", "base.json")])
    same = [x == y for x, y in zip(*outputs)]
    criterion(10, all(same), f"scenario, front CSV, sweep CSV, baseline JSON identical: {same}")
