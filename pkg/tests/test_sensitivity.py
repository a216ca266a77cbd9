import numpy as np
import pytest

from paretoapc import cellnet
from paretoapc.sensitivity import (
    DegenerateActiveSetError,
    SensitivityDerivatives,
    classify_constraints,
    predict_objectives,
    predict_solution,
    solve_sensitivity_system,
    system_residual,
)
from paretoapc.solver import SpParameters, solve_sp

from oracles import toy_problem

R = np.array([1.0, 1.0])


def solved(problem, a, r=R):
    params = SpParameters(a, r)
    return params, solve_sp(problem, params)


def derivatives(problem, a, v, r=R):
    params, sol = solved(problem, a, r)
    part = classify_constraints(sol, params, problem)
    return sol, part, solve_sensitivity_system(sol, part, v, problem, r)


class TestClassify:
    def test_toy_solution(self):
        prob = toy_problem()
        params, sol = solved(prob, [0.0, 0.0])
        part = classify_constraints(sol, params, prob)
        assert part.i_plus == (0, 1)
        assert part.j_minus == (0, 1) and not part.j_plus and not part.j_zero
        assert not part.degenerate

    def test_budget_active(self, tiny_scenario):
        base = tiny_scenario.epa_powers()
        prices = cellnet.compute_prices(tiny_scenario, base)
        # a budget below the unconstrained optimum, reference far below the front
        prob = cellnet.build_bs_problem(tiny_scenario, 0, base, prices, p_max=0.5)
        params, sol = solved(prob, [-100.0, 0.0], r=np.array([1.0, 0.01]))
        part = classify_constraints(sol, params, prob)
        assert sol.p.sum() == pytest.approx(prob.p_max)
        assert sol.beta[2] > 0
        assert 2 in part.j_plus

    def test_idle_subcarrier_in_minus_set(self, tiny_problem):
        params, sol = solved(tiny_problem, [-1.0, 0.0])
        part = classify_constraints(sol, params, tiny_problem)
        for j in range(tiny_problem.dimension):
            if sol.p[j] > 1e-3:
                assert j in part.j_minus
        assert 2 in part.j_minus  # budget slack


class TestSensitivitySystem:
    def test_toy_against_finite_differences(self):
        prob = toy_problem()
        v = np.array([1.0, 0.0])
        a = np.zeros(2)
        sol, _, d = derivatives(prob, a, v)
        s = 1e-4
        plus = solve_sp(prob, SpParameters(a + s * v, R))
        minus = solve_sp(prob, SpParameters(a - s * v, R))
        t_fd = (plus.t - minus.t) / (2 * s)
        p_fd = (plus.p - minus.p) / (2 * s)
        mu_fd = (plus.mu - minus.mu) / (2 * s)
        assert d.t_bar == pytest.approx(t_fd, rel=1e-3)
        assert np.allclose(d.p_bar, p_fd, rtol=1e-3)
        assert np.allclose(d.mu_bar, mu_fd, rtol=1e-3, atol=1e-9)
        # by hand: s + t = p^2 and t = (1 - p)^2 give p = (1 + s) / 2
        assert d.t_bar == pytest.approx(-0.5, abs=1e-9)
        assert d.p_bar[0] == pytest.approx(0.5, abs=1e-9)

    def test_zero_direction(self, tiny_problem):
        _, _, d = derivatives(tiny_problem, [-6.0, 3.0], np.zeros(2))
        assert d.t_bar == 0.0
        assert not np.any(d.p_bar) and not np.any(d.mu_bar) and not np.any(d.beta_bar)

    def test_residual_small(self, tiny_problem):
        v = np.array([1.0, -0.5])
        params, sol = solved(tiny_problem, [-6.0, 3.0])
        part = classify_constraints(sol, params, tiny_problem)
        d = solve_sensitivity_system(sol, part, v, tiny_problem, R)
        assert system_residual(sol, part, v, tiny_problem, R, d) <= 1e-9

    def test_degenerate_raises(self):
        prob = toy_problem()
        params, sol = solved(prob, [0.0, 0.0])
        # pretend an active constraint carries a zero multiplier
        part = classify_constraints(sol, params, prob)
        part = type(part)(part.i_plus, part.i_zero, part.i_minus, (), (0,), (1,))
        with pytest.raises(DegenerateActiveSetError):
            solve_sensitivity_system(sol, part, [1.0, 0.0], prob, R)

    @pytest.mark.parametrize("a", [(-8.0, 2.0), (-6.0, 3.0), (-3.0, 1.0)])
    def test_prediction_error_is_second_order(self, tiny_problem, a):
        a = np.asarray(a)
        v = np.array([1.0, -1.0])
        sol, _, d = derivatives(tiny_problem, a, v)
        errs = []
        for s in (1e-2, 1e-3):
            pred = predict_solution(sol, d, s)
            truth = solve_sp(tiny_problem, SpParameters(a + s * v, R), warm_start=sol.p)
            errs.append(np.linalg.norm(pred.p - truth.p) + abs(pred.t - truth.t))
        assert errs[1] <= errs[0] / 30.0


class TestPrediction:
    def test_zero_step(self):
        prob = toy_problem()
        sol, _, d = derivatives(prob, [0.0, 0.0], [1.0, 0.0])
        pred = predict_solution(sol, d, 0.0)
        assert pred.t == sol.t and np.array_equal(pred.p, sol.p)
        assert np.array_equal(pred.mu, sol.mu) and np.array_equal(pred.beta, sol.beta)

    def test_toy_small_step(self):
        prob = toy_problem()
        a, v, s = np.zeros(2), np.array([1.0, 0.0]), 1e-3
        sol, _, d = derivatives(prob, a, v)
        pred = predict_solution(sol, d, s)
        truth = solve_sp(prob, SpParameters(a + s * v, R))
        assert abs(pred.t - truth.t) <= 1e-5
        assert np.max(np.abs(pred.p - truth.p)) <= 1e-5

    def test_clamps_negative_powers(self):
        sol = solve_sp(toy_problem(), SpParameters([0.0, 0.0], R))
        d = SensitivityDerivatives(0.0, np.array([-10.0]), np.zeros(2), np.zeros(2))
        assert predict_solution(sol, d, 1.0).p[0] == 0.0


class TestPredictObjectives:
    def test_zero_step(self):
        assert np.array_equal(predict_objectives([1.0, 2.0], 0.0, [1.0, -1.0], [0.5, 0.5], R), [1.0, 2.0])

    def test_orthogonal_direction(self):
        out = predict_objectives([1.0, 2.0], 0.3, [1.0, -1.0], [0.5, 0.5], R)
        assert np.array_equal(out, np.array([1.0, 2.0]) + 0.3 * np.array([1.0, -1.0]))

    def test_toy_second_order(self):
        prob = toy_problem()
        a, v = np.zeros(2), np.array([1.0, -1.0])
        sol = solve_sp(prob, SpParameters(a, R))
        f0 = prob.objectives(sol.p)
        errs = []
        for s in (1e-2, 1e-3):
            pred = predict_objectives(f0, s, v, sol.mu, R)
            truth = prob.objectives(solve_sp(prob, SpParameters(a + s * v, R)).p)
            errs.append(np.linalg.norm(pred - truth))
        assert errs[0] / errs[1] == pytest.approx(100.0, rel=0.1)
