from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linprog

from roundrobin.cuts import example1_solution
from roundrobin.formulations import (Column, InfeasibleMaster, MatchingLpSolution, MatchingMaster,
                                     build_krr_traditional_lp, build_traditional_lp, check_assign,
                                     check_matching_solution, column_cost, permutation_cost,
                                     project_to_assign, solve_krr_traditional_relaxation,
                                     solve_matching_relaxation, solve_permutation_relaxation,
                                     solve_traditional_relaxation)
from roundrobin.instance import (Instance, InstanceError, KrrInstance, dominance_instance, generate,
                                 match_index, matches)
from roundrobin.matching import BranchDecision, DecisionKind, enumerate_perfect_matchings
from roundrobin.oracles import brute_force_optimum

TOL = 1e-6


def full_matching_lp(inst: Instance) -> float:
    """Matching relaxation with every (perfect matching, round) column, solved by HiGHS."""
    n, R = inst.n, inst.rounds
    index = match_index(n)
    pms = enumerate_perfect_matchings(n)
    cols, cost = [], []
    for r in range(R):
        for pm in pms:
            a = np.zeros(R + len(matches(n)))
            a[r] = 1
            for m in pm:
                a[R + index[m]] = 1
            cols.append(a)
            cost.append(column_cost(inst, pm, r))
    res = linprog(cost, A_eq=np.array(cols).T, b_eq=np.ones(R + len(matches(n))), method="highs")
    assert res.status == 0
    return res.fun


def full_permutation_lp(inst: Instance) -> float:
    n, R = inst.n, inst.rounds
    index = match_index(n)
    rows = {}
    cols, cost = [], []
    for i in range(n):
        opp = [j for j in range(n) if j != i]
        for order in itertools.permutations(opp):
            a = {("team", i): 1.0}
            for r, j in enumerate(order):
                a[("link", index[(min(i, j), max(i, j))], r)] = 1.0 if i < j else -1.0
            cols.append(a)
            cost.append(0.5 * permutation_cost(inst, i, order))
            for key in a:
                rows.setdefault(key, len(rows))
    A = np.zeros((len(rows), len(cols)))
    for c, a in enumerate(cols):
        for key, v in a.items():
            A[rows[key], c] = v
    b = np.array([1.0 if key[0] == "team" else 0.0 for key in rows])
    res = linprog(cost, A_eq=A, b_eq=b, method="highs")
    assert res.status == 0
    return res.fun


def test_traditional_lp_shape():
    model, idx = build_traditional_lp(generate(6, 0.5, 0))
    assert model.num_cols == 75 and model.num_rows == 15 + 30
    assert idx.var(14, 4) == 74


def test_traditional_dominance_zero():
    assert abs(solve_traditional_relaxation(dominance_instance(6))[0]) <= TOL


def test_traditional_all_zero_costs_uniform_point_feasible():
    n = 6
    inst = Instance(n, np.zeros((15, 5), dtype=np.int64))
    value, x = solve_traditional_relaxation(inst)
    assert value == pytest.approx(0.0, abs=TOL)
    assert check_assign(n, x)
    assert check_assign(n, np.full((15, 5), 1 / 5))


def test_traditional_matches_highs():
    for seed in range(10):
        inst = generate(6, 0.6, seed)
        model, _ = build_traditional_lp(inst)
        A = np.zeros((model.num_rows, model.num_cols))
        for j in range(model.num_cols):
            for i, v in model.column(j)[1]:
                A[i, j] = v
        ref = linprog(inst.costs.ravel(), A_eq=A, b_eq=np.ones(model.num_rows), method="highs")
        assert solve_traditional_relaxation(inst)[0] == pytest.approx(ref.fun, abs=TOL)


def test_matching_relaxation_frozen_values():
    assert solve_matching_relaxation(dominance_instance(6)).objective == pytest.approx(2.0, abs=TOL)
    assert solve_matching_relaxation(dominance_instance(8)).objective == pytest.approx(2.0, abs=TOL)
    assert solve_matching_relaxation(generate(8, 0.7, 0)).objective == pytest.approx(25 / 3, abs=TOL)
    assert solve_matching_relaxation(generate(6, 0.6, 4)).objective == pytest.approx(4.5, abs=TOL)


def test_matching_relaxation_agrees_with_full_column_lp():
    for seed in range(8):
        inst = generate(6, 0.5 + 0.05 * seed, seed)
        sol = solve_matching_relaxation(inst)
        assert sol.exact
        assert sol.objective == pytest.approx(full_matching_lp(inst), abs=TOL)
        assert check_matching_solution(sol)
        # the last pricing sweep found no improving column
        assert sol.final_min_reduced_cost >= -TOL


def test_matching_relaxation_zero_costs():
    inst = Instance(6, np.zeros((15, 5), dtype=np.int64))
    assert solve_matching_relaxation(inst).objective == pytest.approx(0.0, abs=TOL)


def test_matching_relaxation_n4_equals_integer_optimum():
    for seed in range(20):
        inst = generate(4, 0.5, seed)
        assert solve_matching_relaxation(inst).objective == pytest.approx(brute_force_optimum(inst)[0], abs=TOL)


def test_master_columns_are_unique_and_costed():
    inst = generate(6, 0.7, 2)
    master = MatchingMaster(inst)
    master.solve()
    keys = [(c.matching, c.round) for c in master.pool.columns]
    assert len(keys) == len(set(keys))
    assert all(c.cost == column_cost(inst, c.matching, c.round) for c in master.pool.columns)


def test_decisions_restrict_the_master():
    inst = generate(6, 0.7, 3)
    master = MatchingMaster(inst)
    root = master.solve().objective
    d = BranchDecision((0, 1), 0, DecisionKind.ENFORCE)
    child = master.solve([d])
    assert child.objective >= root - TOL
    for col, v in child.entries:
        if col.round == 0:
            assert (0, 1) in col.matching
    # back at the root the fixed columns are released again
    assert master.solve().objective == pytest.approx(root, abs=TOL)


def test_infeasible_decisions_detected():
    inst = generate(4, 0.5, 0)
    # (0,1) and (2,3) form the same matching, so enforcing them in different rounds is impossible
    ds = [BranchDecision((0, 1), 0, DecisionKind.ENFORCE), BranchDecision((2, 3), 1, DecisionKind.ENFORCE)]
    with pytest.raises(InfeasibleMaster):
        MatchingMaster(inst).solve(ds)


def test_dominance_chain_on_random_instances():
    for seed in range(6):
        inst = generate(6, 0.8, seed)
        v_tra = solve_traditional_relaxation(inst)[0]
        v_mat = solve_matching_relaxation(inst).objective
        v_ip = brute_force_optimum(inst)[0]
        assert v_tra <= v_mat + TOL <= v_ip + 2 * TOL


def test_permutation_frozen_values():
    assert solve_permutation_relaxation(generate(8, 0.7, 0)).objective == pytest.approx(49 / 6, abs=TOL)
    assert solve_permutation_relaxation(generate(8, 0.5, 1)).objective == pytest.approx(1.0, abs=TOL)
    assert abs(solve_permutation_relaxation(dominance_instance(6)).objective) <= TOL
    zero = Instance(6, np.zeros((15, 5), dtype=np.int64))
    assert abs(solve_permutation_relaxation(zero).objective) <= TOL


@pytest.mark.parametrize("n,seeds", [(4, range(5)), (6, range(3))])
def test_permutation_agrees_with_full_column_lp(n, seeds):
    for seed in seeds:
        inst = generate(n, 0.6, seed)
        got = solve_permutation_relaxation(inst).objective
        assert got == pytest.approx(full_permutation_lp(inst), abs=TOL)
        assert got == pytest.approx(solve_traditional_relaxation(inst)[0], abs=TOL)


def test_permutation_without_seed_schedule_starts_infeasible():
    inst = generate(6, 0.5, 9)
    a = solve_permutation_relaxation(inst, seed_schedule=False).objective
    b = solve_permutation_relaxation(inst).objective
    assert a == pytest.approx(b, abs=TOL)


def test_projection_of_integral_solution():
    inst = generate(6, 0.5, 1)
    v_ip, schedule = brute_force_optimum(inst)
    sol = MatchingLpSolution(6, [(Column(pm, r, column_cost(inst, pm, r)), 1.0) for r, pm in enumerate(schedule)],
                             objective=float(v_ip))
    x = project_to_assign(sol)
    assert set(np.unique(x)) <= {0.0, 1.0}
    assert check_assign(6, x)
    assert float((x * inst.costs).sum()) == pytest.approx(v_ip)


def test_projection_preserves_objective():
    for seed in range(5):
        inst = generate(6, 0.7, seed)
        sol = solve_matching_relaxation(inst)
        x = project_to_assign(sol)
        assert check_assign(6, x)
        assert float((x * inst.costs).sum()) == pytest.approx(sol.objective, abs=1e-9)


def test_projection_of_example_point_is_half_integral():
    x = project_to_assign(example1_solution())
    assert set(x.ravel()) <= {Fraction(0), Fraction(1, 2), Fraction(1)}
    assert check_matching_solution(example1_solution(), tol=0)


def test_krr_counts_and_values():
    k4 = KrrInstance.from_srr(generate(4, 0.5, 0), 2)
    assert build_krr_traditional_lp(k4).num_cols == 72
    zero = KrrInstance.from_srr(Instance(4, np.zeros((6, 3), dtype=np.int64)), 2)
    assert solve_krr_traditional_relaxation(zero) == pytest.approx(0.0, abs=TOL)
    for seed in range(3):
        inst = generate(6, 0.7, seed)
        doubled = solve_krr_traditional_relaxation(KrrInstance.from_srr(inst, 2))
        assert doubled == pytest.approx(2 * solve_traditional_relaxation(inst)[0], abs=TOL)


def test_krr_rejects_odd_k():
    with pytest.raises(InstanceError):
        build_krr_traditional_lp(KrrInstance.from_srr(generate(4, 0.5, 0), 1))
