"""Maximum-weight perfect matchings on general graphs.

Weights are rounded to a 1e-9 grid and doubled, so every solve runs on exact
integers.  Among all maximum-weight perfect matchings the lexicographically
smallest edge set (canonical match order) is returned.

Two exact backends share that contract.  Up to ``DP_LIMIT`` nodes a compiled
subset dynamic program is used: state = set of unmatched nodes, the lowest one
is matched first, and the smallest optimal partner wins ties.  Larger graphs go
to :func:`networkx.max_weight_matching` with each weight shifted left by one
bit per edge plus a unique-rank bonus that encodes the same tie-break.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import networkx as nx
import numba
import numpy as np

from .instance import canonical, check_team_count, match_index, matches

PerfectMatching = tuple[tuple[int, int], ...]

WEIGHT_GRID = 1e-9
ENUMERATION_LIMIT = 12
DP_LIMIT = 20
# scaled weights beyond this could overflow int64 sums in the DP kernel
DP_WEIGHT_LIMIT = 1 << 52


class DecisionKind(str, enum.Enum):
    ENFORCE = "enforce"
    FORBID = "forbid"


@dataclass(frozen=True, order=True)
class BranchDecision:
    """Ryan-Foster decision: match ``match`` is (not) played in round ``round``."""

    match: tuple[int, int]
    round: int
    kind: DecisionKind

    def __post_init__(self) -> None:
        object.__setattr__(self, "match", canonical(*self.match))
        object.__setattr__(self, "kind", DecisionKind(self.kind))

    def admits(self, matching: Iterable[tuple[int, int]]) -> bool:
        """Whether a matching used in this decision's round respects it."""
        present = self.match in set(matching)
        return present if self.kind is DecisionKind.ENFORCE else not present


class DecisionConflict(ValueError):
    """Decisions that cannot hold simultaneously."""


def check_decisions(decisions: Iterable[BranchDecision]) -> None:
    enforced: dict[int, dict[int, tuple[int, int]]] = {}
    forbidden: set[tuple[tuple[int, int], int]] = set()
    decisions = list(decisions)
    for d in decisions:
        if d.kind is DecisionKind.FORBID:
            forbidden.add((d.match, d.round))
    for d in decisions:
        if d.kind is not DecisionKind.ENFORCE:
            continue
        if (d.match, d.round) in forbidden:
            raise DecisionConflict(f"match {d.match} both enforced and forbidden in round {d.round}")
        busy = enforced.setdefault(d.round, {})
        for t in d.match:
            other = busy.get(t)
            if other is not None and other != d.match:
                raise DecisionConflict(
                    f"matches {other} and {d.match} both enforced in round {d.round}")
            busy[t] = d.match


@dataclass(frozen=True)
class WeightedGraph:
    """Simple undirected graph on nodes ``0..n-1`` with edge weights and deleted edges."""

    n: int
    weights: Mapping[tuple[int, int], float]
    deleted: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        clean = {}
        for (u, v), w in self.weights.items():
            if u == v:
                raise ValueError(f"self loop at node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) outside node range")
            if not np.isfinite(w):
                raise ValueError(f"edge ({u}, {v}) has non-finite weight")
            e = canonical(u, v)
            if e in clean:
                raise ValueError(f"duplicate edge {e}")
            clean[e] = float(w)
        object.__setattr__(self, "weights", clean)
        object.__setattr__(self, "deleted", frozenset(canonical(*e) for e in self.deleted))

    @classmethod
    def complete(cls, n: int, weights: Mapping[tuple[int, int], float] | np.ndarray | None = None
                 ) -> WeightedGraph:
        """Complete graph; ``weights`` is a mapping or an array in canonical match order."""
        if weights is None:
            return cls(n, {m: 0.0 for m in matches(n)})
        if isinstance(weights, Mapping):
            return cls(n, {m: weights.get(m, 0.0) for m in matches(n)})
        return cls(n, dict(zip(matches(n), map(float, weights))))

    def edges(self) -> list[tuple[int, int, float]]:
        return [(u, v, w) for (u, v), w in sorted(self.weights.items()) if (u, v) not in self.deleted]

    def degree(self, node: int) -> int:
        return sum(1 for (u, v, _) in self.edges() if node in (u, v))

    def without(self, edges: Iterable[tuple[int, int]]) -> WeightedGraph:
        return WeightedGraph(self.n, self.weights, self.deleted | {canonical(*e) for e in edges})


def _scaled(w: float) -> int:
    return 2 * int(round(w / WEIGHT_GRID))


@numba.njit(cache=True)
def _dp_matching(n: int, w: np.ndarray, ok: np.ndarray) -> np.ndarray:
    """Exact DP over node subsets; returns partner array, or all -1 if no perfect matching."""
    size = 1 << n
    best = np.zeros(size, dtype=np.int64)
    feasible = np.zeros(size, dtype=np.bool_)
    feasible[0] = True
    for mask in range(1, size):
        # only even subsets can be perfectly matched
        bits = 0
        m = mask
        while m:
            m &= m - 1
            bits += 1
        if bits & 1:
            continue
        i = 0
        while not (mask >> i) & 1:
            i += 1
        rest = mask ^ (1 << i)
        found = False
        top = np.int64(0)
        for j in range(i + 1, n):
            if (rest >> j) & 1 and ok[i, j]:
                sub = rest ^ (1 << j)
                if feasible[sub]:
                    v = w[i, j] + best[sub]
                    if not found or v > top:
                        top = v
                        found = True
        feasible[mask] = found
        best[mask] = top
    mate = -np.ones(n, dtype=np.int64)
    mask = size - 1
    if not feasible[mask]:
        return mate
    while mask:
        i = 0
        while not (mask >> i) & 1:
            i += 1
        rest = mask ^ (1 << i)
        for j in range(i + 1, n):
            if (rest >> j) & 1 and ok[i, j]:
                sub = rest ^ (1 << j)
                if feasible[sub] and w[i, j] + best[sub] == best[mask]:
                    mate[i] = j
                    mate[j] = i
                    mask = sub
                    break
    return mate


def _solve_dp(n: int, edges: list[tuple[int, int, float]]) -> PerfectMatching | None:
    w = np.zeros((n, n), dtype=np.int64)
    ok = np.zeros((n, n), dtype=np.bool_)
    for u, v, x in edges:
        w[u, v] = _scaled(x)
        ok[u, v] = True
    mate = _dp_matching(n, w, ok)
    if mate[0] < 0:
        return None
    return tuple((i, int(mate[i])) for i in range(n) if mate[i] > i)


def _solve_blossom(n: int, edges: list[tuple[int, int, float]]) -> PerfectMatching | None:
    rank_bits = len(edges)
    G = nx.Graph()
    G.add_nodes_from(range(n))
    for rank, (u, v, w) in enumerate(edges):
        G.add_edge(u, v, weight=(_scaled(w) << rank_bits) + (1 << (rank_bits - 1 - rank)))
    mate = nx.max_weight_matching(G, maxcardinality=True)
    if len(mate) != n // 2:
        return None
    return tuple(sorted(canonical(u, v) for u, v in mate))


def max_weight_perfect_matching(g: WeightedGraph, backend: str = "auto"
                                ) -> tuple[PerfectMatching, float] | None:
    """Maximum-weight perfect matching over the non-deleted edges, or ``None`` if none exists.

    Among optimal matchings the lexicographically smallest sorted edge list wins.
    ``backend`` is ``"auto"``, ``"dp"`` or ``"blossom"``; all give identical results.
    """
    if g.n % 2:
        raise ValueError(f"perfect matchings need an even node count, got {g.n}")
    if backend not in ("auto", "dp", "blossom"):
        raise ValueError(f"unknown backend {backend!r}")
    if g.n == 0:
        return (), 0.0
    edges = g.edges()
    if len(edges) < g.n // 2:
        return None
    small = max((abs(_scaled(w)) for _, _, w in edges), default=0) * g.n < DP_WEIGHT_LIMIT
    if backend == "dp" or (backend == "auto" and g.n <= DP_LIMIT and small):
        if g.n > DP_LIMIT or not small:
            raise ValueError("dp backend limited to small graphs with moderate weights")
        matching = _solve_dp(g.n, edges)
    else:
        matching = _solve_blossom(g.n, edges)
    if matching is None:
        return None
    return matching, float(sum(g.weights[e] for e in matching))


def max_weight_perfect_matching_array(n: int, weights: np.ndarray, allowed: np.ndarray | None = None
                                      ) -> tuple[PerfectMatching, float] | None:
    """Same as :func:`max_weight_perfect_matching` on ``K_n`` with array weights.

    ``weights`` and ``allowed`` are indexed in canonical match order.
    """
    ms = matches(n)
    weights = np.asarray(weights, dtype=float)
    if allowed is None:
        allowed = np.ones(len(ms), dtype=bool)
    if n % 2 == 0 and 0 < n <= DP_LIMIT and np.all(np.isfinite(weights)):
        scaled = 2 * np.round(weights / WEIGHT_GRID)
        if np.max(np.abs(scaled), initial=0.0) * n < DP_WEIGHT_LIMIT:
            iu = _upper_indices(n)
            w = np.zeros((n, n), dtype=np.int64)
            ok = np.zeros((n, n), dtype=np.bool_)
            w[iu] = scaled.astype(np.int64)
            ok[iu] = allowed
            mate = _dp_matching(n, w, ok)
            if mate[0] < 0:
                return None
            matching = tuple((i, int(mate[i])) for i in range(n) if mate[i] > i)
            index = match_index(n)
            return matching, float(sum(weights[index[e]] for e in matching))
    keep = np.flatnonzero(allowed)
    g = WeightedGraph(n, {ms[k]: float(weights[k]) for k in keep})
    return max_weight_perfect_matching(g)


def _upper_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    # np.triu_indices(n, 1) enumerates pairs in canonical match order
    return np.triu_indices(n, 1)


def is_perfect_matching(n: int, matching: Iterable[tuple[int, int]]) -> bool:
    seen: set[int] = set()
    count = 0
    for i, j in matching:
        if i == j or i in seen or j in seen or not (0 <= i < n and 0 <= j < n):
            return False
        seen.update((i, j))
        count += 1
    return count == n // 2 and len(seen) == n


def enumerate_perfect_matchings(n: int) -> list[PerfectMatching]:
    """All ``(n-1)!!`` perfect matchings of ``K_n`` in lexicographic order."""
    check_team_count(n, minimum=2)
    if n > ENUMERATION_LIMIT:
        raise ValueError(f"refusing to enumerate perfect matchings for n = {n} > {ENUMERATION_LIMIT}")

    def rec(free: tuple[int, ...]) -> list[list[tuple[int, int]]]:
        if not free:
            return [[]]
        first, rest = free[0], free[1:]
        out = []
        for k, partner in enumerate(rest):
            for tail in rec(rest[:k] + rest[k + 1:]):
                out.append([(first, partner)] + tail)
        return out

    return [tuple(m) for m in rec(tuple(range(n)))]


def brute_force_max_weight_perfect_matching(g: WeightedGraph) -> tuple[PerfectMatching, float] | None:
    """Enumeration oracle: best perfect matching using only non-deleted edges."""
    best = None
    top = 0
    available = {(u, v): w for u, v, w in g.edges()}
    for matching in enumerate_perfect_matchings(g.n):
        if all(e in available for e in matching):
            # compare on the same integer grid as the fast backends
            score = sum(_scaled(available[e]) for e in matching)
            if best is None or score > top:
                best, top = matching, score
    if best is None:
        return None
    return best, float(sum(available[e] for e in best))


def apply_decisions(g: WeightedGraph, decisions: Iterable[BranchDecision]) -> WeightedGraph:
    """Delete edges so that every perfect matching of the result respects ``decisions``.

    Forbid ``{i, j}`` deletes that edge; Enforce ``{i, j}`` deletes every other
    edge touching ``i`` or ``j``.
    """
    decisions = list(decisions)
    if len({d.round for d in decisions}) > 1:
        raise ValueError("apply_decisions expects decisions of a single round")
    check_decisions(decisions)
    drop: set[tuple[int, int]] = set()
    for d in decisions:
        i, j = d.match
        if d.kind is DecisionKind.FORBID:
            drop.add(d.match)
        else:
            for e in g.weights:
                if e != d.match and (i in e or j in e):
                    drop.add(e)
    return g.without(drop)


def allowed_mask(n: int, decisions: Iterable[BranchDecision]) -> np.ndarray:
    """Boolean mask over canonical matches: the edges :func:`apply_decisions` would keep."""
    index = match_index(n)
    ms = matches(n)
    mask = np.ones(len(ms), dtype=bool)
    for d in decisions:
        if d.kind is DecisionKind.FORBID:
            mask[index[d.match]] = False
        else:
            i, j = d.match
            for k, e in enumerate(ms):
                if e != d.match and (i in e or j in e):
                    mask[k] = False
    return mask


def double_factorial(k: int) -> int:
    return int(np.prod(np.arange(k, 0, -2))) if k > 0 else 1


__all__ = [
    "BranchDecision", "DecisionKind", "DecisionConflict", "PerfectMatching", "WeightedGraph",
    "allowed_mask", "apply_decisions", "brute_force_max_weight_perfect_matching",
    "check_decisions", "double_factorial", "enumerate_perfect_matchings", "is_perfect_matching",
    "max_weight_perfect_matching", "max_weight_perfect_matching_array",
]
