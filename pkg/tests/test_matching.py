from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roundrobin.instance import matches
from roundrobin.matching import (BranchDecision, DecisionConflict, DecisionKind, WeightedGraph,
                                 allowed_mask, apply_decisions, brute_force_max_weight_perfect_matching,
                                 double_factorial, enumerate_perfect_matchings, is_perfect_matching,
                                 max_weight_perfect_matching, max_weight_perfect_matching_array)

E, F = DecisionKind.ENFORCE, DecisionKind.FORBID


def random_graph(rng: np.random.Generator, n: int, delete: float, integer: bool = True) -> WeightedGraph:
    weights = {}
    for m in matches(n):
        weights[m] = float(rng.integers(-10, 11)) if integer else float(rng.normal())
    deleted = frozenset(m for m in matches(n) if rng.random() < delete)
    return WeightedGraph(n, weights, deleted)


def test_uniform_k4():
    res = max_weight_perfect_matching(WeightedGraph.complete(4))
    assert res is not None
    matching, weight = res
    assert matching in enumerate_perfect_matchings(4) and weight == 0.0
    # ties go to the lexicographically smallest edge set
    assert matching == ((0, 1), (2, 3))


def test_path_graph_has_unique_matching():
    g = WeightedGraph(4, {(0, 1): 1.0, (1, 2): 1.0, (2, 3): 1.0})
    assert max_weight_perfect_matching(g) == (((0, 1), (2, 3)), 2.0)


def test_odd_node_count_rejected():
    with pytest.raises(ValueError):
        max_weight_perfect_matching(WeightedGraph(3, {(0, 1): 1.0}))


def test_no_perfect_matching_gives_none():
    g = WeightedGraph(4, {(0, 1): 1.0, (0, 2): 1.0, (0, 3): 1.0})
    assert max_weight_perfect_matching(g) is None
    assert brute_force_max_weight_perfect_matching(g) is None


def test_graph_validation():
    with pytest.raises(ValueError):
        WeightedGraph(4, {(1, 1): 1.0})
    with pytest.raises(ValueError):
        WeightedGraph(4, {(0, 5): 1.0})
    with pytest.raises(ValueError):
        WeightedGraph(4, {(0, 1): float("nan")})
    with pytest.raises(ValueError):
        WeightedGraph(4, {(0, 1): 1.0, (1, 0): 2.0})


def test_enumeration_counts():
    k4 = enumerate_perfect_matchings(4)
    assert k4 == [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))]
    assert len(enumerate_perfect_matchings(6)) == 15
    assert len(enumerate_perfect_matchings(8)) == 105
    pm10 = enumerate_perfect_matchings(10)
    assert len(pm10) == len(set(pm10)) == double_factorial(9) == 945
    with pytest.raises(ValueError):
        enumerate_perfect_matchings(14)


@pytest.mark.parametrize("n", [4, 6, 8])
def test_random_integer_weights_match_brute_force(n):
    rng = np.random.default_rng(n)
    for _ in range(100):
        g = random_graph(rng, n, delete=0.0)
        got = max_weight_perfect_matching(g)
        ref = brute_force_max_weight_perfect_matching(g)
        assert got == ref


@pytest.mark.parametrize("backend", ["dp", "blossom"])
def test_backends_agree_with_deletions(backend):
    rng = np.random.default_rng(5)
    for _ in range(150):
        n = int(rng.choice([4, 6, 8]))
        g = random_graph(rng, n, delete=float(rng.uniform(0, 0.7)), integer=bool(rng.random() < 0.5))
        got = max_weight_perfect_matching(g, backend=backend)
        ref = brute_force_max_weight_perfect_matching(g)
        assert (got is None) == (ref is None)
        if got is not None:
            assert got[0] == ref[0]
            assert got[1] == pytest.approx(ref[1], abs=1e-9)
            assert is_perfect_matching(n, got[0])


def test_array_entry_point_matches_graph_entry_point():
    rng = np.random.default_rng(8)
    for _ in range(100):
        n = int(rng.choice([4, 6, 8, 10]))
        w = rng.normal(size=len(matches(n)))
        allowed = rng.random(len(matches(n))) > 0.3
        g = WeightedGraph(n, {m: float(w[k]) for k, m in enumerate(matches(n)) if allowed[k]})
        assert max_weight_perfect_matching_array(n, w, allowed) == max_weight_perfect_matching(g)


def test_large_graph_uses_blossom_consistently():
    rng = np.random.default_rng(2)
    n = 22
    w = rng.integers(-5, 6, size=len(matches(n))).astype(float)
    g = WeightedGraph.complete(n, w)
    a = max_weight_perfect_matching(g)
    b = max_weight_perfect_matching(g, backend="blossom")
    assert a == b and is_perfect_matching(n, a[0])


@settings(max_examples=60, deadline=None)
@given(n=st.sampled_from([4, 6]), data=st.data())
def test_oracle_weight_is_sum_of_edges(n, data):
    ws = data.draw(st.lists(st.integers(-20, 20), min_size=len(matches(n)), max_size=len(matches(n))))
    g = WeightedGraph.complete(n, np.array(ws, dtype=float))
    matching, weight = max_weight_perfect_matching(g)
    assert weight == sum(g.weights[e] for e in matching)
    assert weight == brute_force_max_weight_perfect_matching(g)[1]


def test_enforce_leaves_degree_one():
    g = apply_decisions(WeightedGraph.complete(6), [BranchDecision((0, 1), 0, E)])
    assert g.degree(0) == 1 and g.degree(1) == 1
    assert g.degree(2) == 3


def test_contradictory_decisions_rejected():
    with pytest.raises(DecisionConflict):
        apply_decisions(WeightedGraph.complete(6), [BranchDecision((0, 1), 0, F), BranchDecision((0, 1), 0, E)])
    with pytest.raises(DecisionConflict):
        apply_decisions(WeightedGraph.complete(6), [BranchDecision((0, 1), 0, E), BranchDecision((1, 2), 0, E)])


def test_two_enforced_matches_force_the_third():
    g = apply_decisions(WeightedGraph.complete(6, np.arange(15, dtype=float)),
                        [BranchDecision((0, 1), 2, E), BranchDecision((2, 3), 2, E)])
    matching, _ = max_weight_perfect_matching(g)
    assert matching == ((0, 1), (2, 3), (4, 5))


def test_forbid_deletes_one_edge():
    g = apply_decisions(WeightedGraph.complete(6), [BranchDecision((2, 4), 1, F)])
    assert (2, 4) in g.deleted and len(g.deleted) == 1


def test_allowed_mask_agrees_with_apply_decisions():
    rng = np.random.default_rng(4)
    ms = matches(8)
    for _ in range(50):
        k1, k2 = rng.choice(len(ms), size=2, replace=False)
        ds = [BranchDecision(ms[k1], 0, E)]
        if not set(ms[k2]) & set(ms[k1]):
            ds.append(BranchDecision(ms[k2], 0, F))
        g = apply_decisions(WeightedGraph.complete(8), ds)
        mask = allowed_mask(8, ds)
        assert {m for k, m in enumerate(ms) if not mask[k]} == set(g.deleted)


def test_decision_admits():
    d = BranchDecision((1, 0), 3, E)
    assert d.match == (0, 1)
    assert d.admits([(0, 1), (2, 3)]) and not d.admits([(0, 2), (1, 3)])
    assert BranchDecision((0, 1), 3, F).admits([(0, 2), (1, 3)])
