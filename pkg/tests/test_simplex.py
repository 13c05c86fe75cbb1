import math

import numpy as np
import pytest

from milplab.instance import EQ, GE, LE, MAXIMIZE, MilpInstance
from milplab.simplex import (
    AT_LOWER, BASIC, LpLimits, dual_objective, solve_lp,
)

from util import build, enumerate_lp_vertices, row_feasible


def random_lp(rng, max_vars=10, max_rows=8):
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(1, max_rows + 1))
    c = rng.integers(-9, 10, size=n).astype(float)
    rows = []
    for _ in range(m):
        size = int(rng.integers(1, n + 1))
        idx = rng.choice(n, size=size, replace=False)
        coefs = {int(j): float(rng.integers(-9, 10)) for j in idx}
        coefs = {j: v for j, v in coefs.items() if v != 0.0} or {int(idx[0]): 1.0}
        rel = str(rng.choice([LE, GE, EQ], p=[0.5, 0.3, 0.2]))
        rows.append((coefs, rel, float(rng.integers(-9, 10))))
    lower = rng.integers(-9, 1, size=n).astype(float)
    upper = lower + rng.integers(1, 15, size=n)
    return build(c, rows, lower=lower, upper=upper)


class TestExamples:
    def test_two_var_max(self):
        # max 3x+2y s.t. x+y <= 4, x <= 2, x,y >= 0
        inst = build([3.0, 2.0],
                     [({0: 1.0, 1: 1.0}, LE, 4.0), ({0: 1.0}, LE, 2.0)],
                     sense=MAXIMIZE)
        status, oracle = enumerate_lp_vertices(inst)
        assert status == "optimal" and oracle == pytest.approx(10.0)
        sol = solve_lp(inst)
        assert sol.is_optimal()
        assert sol.objective == pytest.approx(10.0, abs=1e-9)
        assert sol.primal == pytest.approx([2.0, 2.0], abs=1e-9)

    def test_single_var_dual(self):
        inst = build([1.0], [({0: 1.0}, GE, 5.0)])
        sol = solve_lp(inst)
        assert sol.is_optimal()
        assert sol.objective == pytest.approx(5.0)
        assert sol.duals[0] == pytest.approx(1.0, abs=1e-9)

    def test_infeasible_pair(self):
        inst = build([1.0], [({0: 1.0}, LE, 1.0), ({0: 1.0}, GE, 2.0)])
        assert solve_lp(inst).status == "infeasible"

    def test_unbounded(self):
        inst = build([-1.0], [({0: 1.0}, GE, 0.0)])
        assert solve_lp(inst).status == "unbounded"

    def test_iteration_limit_status(self):
        inst = build([3.0, 2.0],
                     [({0: 1.0, 1: 1.0}, LE, 4.0), ({0: 1.0}, LE, 2.0)],
                     sense=MAXIMIZE)
        sol = solve_lp(inst, limits=LpLimits(max_iterations=1))
        assert sol.status == "iteration-limit"

    def test_equality_row(self):
        inst = build([1.0, 1.0], [({0: 2.0, 1: 1.0}, EQ, 3.0)],
                     lower=[0.0, 0.0], upper=[10.0, 10.0])
        sol = solve_lp(inst)
        assert sol.is_optimal()
        assert sol.objective == pytest.approx(1.5)

    def test_maximize_sign_conventions(self):
        # max x s.t. x <= 5: dual of the row should be +1 for a max problem
        inst = build([1.0], [({0: 1.0}, LE, 5.0)], sense=MAXIMIZE)
        sol = solve_lp(inst)
        assert sol.objective == pytest.approx(5.0)
        assert sol.duals[0] == pytest.approx(1.0, abs=1e-9)


def _optimality_checks(inst, sol):
    # primal feasibility
    assert np.all(sol.primal >= inst.lower - 1e-7)
    assert np.all(sol.primal <= inst.upper + 1e-7)
    assert row_feasible(inst, sol.primal, tol=1e-7)
    # strong duality
    gap = abs(sol.objective - dual_objective(inst, sol))
    assert gap <= 1e-6 * (1.0 + abs(sol.objective))
    # complementary slackness on rows
    for i, row in enumerate(inst.rows):
        slack = row.rhs - row.activity(sol.primal)
        assert abs(sol.duals[i] * slack) <= 1e-6
    # basic variables carry (near) zero reduced cost
    for j in range(inst.n_vars):
        if sol.basis_var[j] == BASIC:
            assert abs(sol.reduced_costs[j]) <= 1e-6


class TestRandomSuite:
    def test_strong_duality_and_slackness_100(self):
        rng = np.random.default_rng(7)
        solved = 0
        while solved < 100:
            inst = random_lp(rng)
            sol = solve_lp(inst)
            if sol.status != "optimal":
                continue
            _optimality_checks(inst, sol)
            solved += 1

    def test_agreement_with_vertex_enumeration(self):
        rng = np.random.default_rng(11)
        checked = 0
        while checked < 60:
            inst = random_lp(rng, max_vars=6, max_rows=5)
            status, oracle = enumerate_lp_vertices(inst)
            sol = solve_lp(inst)
            if status == "infeasible":
                assert sol.status == "infeasible"
            else:
                # bounded by construction: all variables boxed
                assert sol.status == "optimal"
                assert sol.objective == pytest.approx(oracle, abs=1e-6)
            checked += 1

    def test_determinism(self):
        rng = np.random.default_rng(23)
        inst = random_lp(rng)
        a = solve_lp(inst)
        b = solve_lp(inst)
        assert a.status == b.status
        assert a.iterations == b.iterations
        assert np.array_equal(a.primal, b.primal)
        assert a.basis_var == b.basis_var


class TestWarmStart:
    def test_bound_tightening_matches_cold(self):
        rng = np.random.default_rng(31)
        agreements = 0
        while agreements < 40:
            inst = random_lp(rng, max_vars=8, max_rows=6)
            sol = solve_lp(inst)
            if sol.status != "optimal":
                continue
            j = int(rng.integers(0, inst.n_vars))
            v = sol.primal[j]
            child = inst.copy()
            if rng.random() < 0.5:
                child.upper[j] = math.floor(v)
            else:
                child.lower[j] = math.ceil(v)
            if child.lower[j] > child.upper[j]:
                continue
            warm = solve_lp(child,
                            basis=(sol.basis_var, sol.basis_row),
                            bound_override=(j, inst.lower[j], inst.upper[j]))
            cold = solve_lp(child)
            assert warm.status == cold.status
            if cold.status == "optimal":
                assert warm.objective == pytest.approx(cold.objective, abs=1e-6)
                _optimality_checks(child, warm)
            agreements += 1

    def test_warm_detects_infeasible_child(self):
        # x + y = 1.5, both in [0,1]; forcing x >= 1 leaves y = 0.5 ok,
        # but forcing x >= 2 crosses its upper bound
        inst = build([1.0, 1.0], [({0: 1.0, 1: 1.0}, EQ, 1.5)],
                     upper=[1.0, 1.0])
        sol = solve_lp(inst)
        assert sol.is_optimal()
        child = inst.copy()
        child.lower[0] = 2.0
        warm = solve_lp(child, basis=(sol.basis_var, sol.basis_row),
                        bound_override=(0, 0.0, 1.0))
        assert warm.status == "infeasible"
