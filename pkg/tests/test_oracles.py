from __future__ import annotations

from roundrobin.instance import generate
from roundrobin.matching import enumerate_perfect_matchings
from roundrobin.oracles import brute_force_optimum, n4_assignments


def all_schedules(n: int):
    pms = enumerate_perfect_matchings(n)

    def rec(used: frozenset, prefix: list):
        if len(prefix) == n - 1:
            yield tuple(prefix)
            return
        for pm in pms:
            if used.isdisjoint(pm):
                yield from rec(used | set(pm), prefix + [pm])

    return list(rec(frozenset(), []))


def test_schedule_count_n6():
    # six one-factorizations of K6, each in 5! round orders
    assert len(all_schedules(6)) == 720


def test_n4_assignments_are_the_six_orders():
    inst = generate(4, 0.5, 2)
    got = n4_assignments(inst)
    assert len(got) == 6
    assert sorted(s for s, _ in got) == sorted(all_schedules(4))
    assert all(v == inst.schedule_cost(s) for s, v in got)


def test_dfs_matches_full_enumeration():
    schedules = all_schedules(6)
    for seed in range(15):
        inst = generate(6, 0.3 + 0.04 * seed, seed)
        value, sched = brute_force_optimum(inst)
        assert value == min(inst.schedule_cost(s) for s in schedules)
        assert inst.schedule_cost(sched) == value
