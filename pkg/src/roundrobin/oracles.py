"""Exhaustive reference solvers for small instances."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .instance import Instance, match_index
from .matching import PerfectMatching, enumerate_perfect_matchings

DFS_LIMIT = 8


def n4_assignments(inst: Instance) -> list[tuple[tuple[PerfectMatching, ...], int]]:
    """All 6 ways to put the three perfect matchings of four teams into the three rounds."""
    if inst.n != 4:
        raise ValueError("n4_assignments needs exactly four teams")
    pms = enumerate_perfect_matchings(4)
    return [(sched, inst.schedule_cost(sched)) for sched in itertools.permutations(pms)]


def brute_force_optimum(inst: Instance) -> tuple[int, tuple[PerfectMatching, ...]]:
    """Optimal schedule by depth-first search over one perfect matching per round.

    Matchings that reuse an already scheduled match are pruned, and so are
    partial schedules whose cost plus the cheapest completion bound reaches
    the incumbent.  Ties keep the first schedule found in lexicographic order.
    """
    n, R = inst.n, inst.rounds
    if n > DFS_LIMIT:
        raise ValueError(f"exhaustive search is limited to n <= {DFS_LIMIT}")
    if n == 4:
        sched, value = min(n4_assignments(inst), key=lambda sv: sv[1])
        return value, sched
    index = match_index(n)
    pms = enumerate_perfect_matchings(n)
    masks = np.array([sum(1 << index[m] for m in pm) for pm in pms], dtype=object)
    cost = np.array([[sum(int(inst.costs[index[m], r]) for m in pm) for r in range(R)] for pm in pms])
    cheapest = cost.min(axis=0)
    tail = np.concatenate([np.cumsum(cheapest[::-1])[::-1], [0]])
    best = [math.inf, None]
    chosen: list[int] = []

    def dfs(r: int, used: int, acc: int) -> None:
        if acc + tail[r] >= best[0]:
            return
        if r == R:
            best[0], best[1] = acc, tuple(pms[p] for p in chosen)
            return
        for p in np.argsort(cost[:, r], kind="stable"):
            if masks[p] & used:
                continue
            if acc + cost[p, r] + tail[r + 1] >= best[0]:
                break
            chosen.append(int(p))
            dfs(r + 1, used | masks[p], acc + int(cost[p, r]))
            chosen.pop()

    dfs(0, 0, 0)
    return int(best[0]), best[1]
