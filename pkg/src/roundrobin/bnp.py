"""Branch-and-price over the matching model with Ryan-Foster branching.

Every node is an LP over (matching, round) columns restricted by a list of
decisions "match m is (not) played in round r"; columns that violate a
decision are filtered out of the node's master and pricing runs on the
decision-reduced graph.  The branching pair comes from :func:`select_branching`,
a literal implementation of the strong-branching candidate rule.
"""

from __future__ import annotations

import enum
import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .formulations import (InfeasibleMaster, MatchingLpSolution, MatchingMaster, project_to_assign)
from .instance import Instance, circle_schedule, match_index, matches
from .lp import INT_TOL
from .matching import (BranchDecision, DecisionConflict, DecisionKind, PerfectMatching,
                       check_decisions, is_perfect_matching)

log = logging.getLogger(__name__)

PRUNE_TOL = 1e-6
CANDIDATE_SHARE = Fraction(1, 10)
CANDIDATE_DECAY = Fraction(13, 20)


class NodeStatus(str, enum.Enum):
    OPEN = "open"
    PRUNED = "pruned"
    BRANCHED = "branched"
    INTEGRAL = "integral"
    INFEASIBLE = "infeasible"


class SolveStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    TIME_LIMIT = "time_limit"
    NODE_LIMIT = "node_limit"


@dataclass
class SolverParams:
    time_limit: float = math.inf
    node_limit: int | None = None
    pricing_cap: int = 50
    strong_branching: bool = True
    heuristic: bool = False
    record_tree: bool = False


@dataclass
class NodeRecord:
    id: int
    depth: int
    decisions: tuple[BranchDecision, ...]
    lp_bound: float
    status: NodeStatus = NodeStatus.OPEN
    parent: int | None = None


Schedule = tuple[PerfectMatching, ...]


def check_schedule(n: int, schedule: Sequence[Sequence[tuple[int, int]]]) -> bool:
    """Each round a perfect matching and each match played exactly once."""
    if len(schedule) != n - 1:
        return False
    seen = [tuple(sorted(m)) for matching in schedule for m in matching]
    return (all(is_perfect_matching(n, matching) for matching in schedule)
            and sorted(seen) == list(matches(n)))


@dataclass
class SolveReport:
    status: SolveStatus
    value: int | None
    schedule: Schedule | None
    bound: float
    nodes: int
    lp_iterations: int
    columns: int
    wall_time: float
    root_bound: float
    max_depth: int = 0
    strong_branching_solves: int = 0
    tree: list[NodeRecord] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    @property
    def gap(self) -> float:
        """Relative gap between incumbent and bound; 0 when proven optimal."""
        if self.value is None:
            return math.inf
        if self.status is SolveStatus.OPTIMAL:
            return 0.0
        return (self.value - self.bound) / max(1.0, abs(self.value))


# ------------------------------------------------------- branching selection

class IntegralDetected:
    """Marker returned when every assignment value is 0 or 1."""

    def __repr__(self) -> str:
        return "INTEGRAL"


INTEGRAL = IntegralDetected()


@dataclass
class BranchingChoice:
    match: int
    round: int
    candidates: list[tuple[int, int]]
    scores: np.ndarray
    score_star: dict[tuple[int, int], float]
    skipped: list[tuple[int, int]]
    fallback: bool = False


def candidate_count(num_pairs: int, depth: int) -> int:
    """``max(1, floor(0.1 * |M x R| * 0.65**depth))`` in exact rational arithmetic."""
    return max(1, math.floor(CANDIDATE_SHARE * num_pairs * CANDIDATE_DECAY ** depth))


def branching_scores(assign: np.ndarray, costs: np.ndarray) -> np.ndarray:
    """``frac * (1 + |c|) * assign**2`` with values within the integrality tolerance snapped."""
    a = np.asarray(assign, dtype=float)
    a = np.where(np.abs(a) <= INT_TOL, 0.0, np.where(np.abs(1.0 - a) <= INT_TOL, 1.0, a))
    frac = np.minimum(a, 1.0 - a)
    return frac * (1.0 + np.abs(np.asarray(costs, dtype=float))) * a * a


def select_branching(assign: np.ndarray, costs: np.ndarray, depth: int, obj: float,
                     strong: Callable[[int, int], tuple[float, float]] | None = None
                     ) -> IntegralDetected | BranchingChoice:
    """Choose the (match index, round) to branch on.

    ``strong(k, r)`` returns the child objectives ``(obj_forbid, obj_enforce)``;
    passing ``None`` disables strong branching.  Ties go to the smallest
    ``(k, r)``.  If every strong-branching candidate is skipped the global
    score argmax is returned.
    """
    a = np.asarray(assign, dtype=float)
    if np.all(np.minimum(np.abs(a), np.abs(1.0 - a)) <= INT_TOL):
        return INTEGRAL
    scores = branching_scores(a, costs)
    # stable ordering: descending score, then ascending (k, r)
    order = np.lexsort((np.arange(scores.size), -scores.ravel()))
    pairs = [divmod(int(f), scores.shape[1]) for f in order]
    count = candidate_count(scores.size, depth)

    def best_by_score() -> tuple[int, int]:
        return pairs[0]

    if count <= 1 or strong is None:
        k, r = best_by_score()
        return BranchingChoice(k, r, [(k, r)], scores, {}, [])
    candidates = pairs[:count]
    star: dict[tuple[int, int], float] = {}
    skipped = []
    for k, r in candidates:
        if scores[k, r] == 0.0:
            skipped.append((k, r))
            continue
        forbid, enforce = strong(k, r)
        star[(k, r)] = (forbid - obj + 1.0) * (enforce - obj + 1.0)
    if not star:
        k, r = best_by_score()
        return BranchingChoice(k, r, candidates, scores, star, skipped, fallback=True)
    top = max(star.values())
    k, r = min(kr for kr, s in star.items() if s == top)
    return BranchingChoice(k, r, candidates, scores, star, skipped)


# ------------------------------------------------------------------ search

def prunable(bound: float, incumbent: float) -> bool:
    """Integral costs: a node whose bound rounds up to the incumbent cannot improve it."""
    if bound == -math.inf:
        return False
    if bound == math.inf:
        return True
    return math.ceil(bound - PRUNE_TOL) >= incumbent


class _Limit(Exception):
    def __init__(self, status: SolveStatus) -> None:
        self.status = status


class BranchAndPrice:
    def __init__(self, inst: Instance, params: SolverParams | None = None,
                 decisions: Sequence[BranchDecision] = ()) -> None:
        check_decisions(decisions)
        self.inst = inst
        self.params = params or SolverParams()
        self.root_decisions = tuple(decisions)
        self.master = MatchingMaster(inst)
        self.index = match_index(inst.n)
        self.incumbent_value: float = math.inf
        self.incumbent: Schedule | None = None
        self.nodes = 0
        self.strong_solves = 0
        self.records: list[NodeRecord] = []
        self._cache: dict[tuple[BranchDecision, ...], MatchingLpSolution | None] = {}
        self._deadline = math.inf
        self._next_id = 1

    # -- helpers ---------------------------------------------------------------
    def _check_time(self) -> None:
        if time.perf_counter() > self._deadline:
            raise _Limit(SolveStatus.TIME_LIMIT)

    def _cutoff(self) -> float:
        # a Lagrangian bound at or above this value proves the node prunable
        return self.incumbent_value - 1.0 + 2 * PRUNE_TOL

    def _solve_lp(self, decisions: tuple[BranchDecision, ...], max_rounds: int | None = None
                  ) -> MatchingLpSolution | None:
        """Node LP under ``decisions``; ``None`` if the master is provably infeasible."""
        key = tuple(sorted(decisions))
        if key in self._cache:
            return self._cache.pop(key)
        try:
            check_decisions(decisions)
            return self.master.solve(decisions, max_rounds=max_rounds, cutoff=self._cutoff())
        except (InfeasibleMaster, DecisionConflict):
            return None

    def child_bound(self, node: NodeRecord, decision: BranchDecision) -> float:
        """LP bound of ``node`` with one more decision; ``inf`` if the child is infeasible."""
        sol = self._solve_lp(node.decisions + (decision,))
        if sol is None:
            return math.inf
        return sol.objective if sol.exact else sol.bound

    def _offer(self, schedule: Schedule) -> None:
        value = self.inst.schedule_cost(schedule)
        if value < self.incumbent_value:
            assert check_schedule(self.inst.n, schedule)
            self.incumbent_value = value
            self.incumbent = schedule
            log.debug("incumbent %d after %d nodes", value, self.nodes)

    def _schedule_from(self, sol: MatchingLpSolution) -> Schedule:
        chosen: list[PerfectMatching | None] = [None] * self.inst.rounds
        for col, v in sol.entries:
            if v > 0.5:
                chosen[col.round] = col.matching
        assert all(c is not None for c in chosen)
        return tuple(chosen)  # type: ignore[arg-type]

    def _child_decision(self, k: int, r: int, kind: DecisionKind) -> BranchDecision:
        return BranchDecision(matches(self.inst.n)[k], r, kind)

    def _strong(self, node: NodeRecord, obj: float) -> Callable[[int, int], tuple[float, float]]:
        keep: dict[tuple[BranchDecision, ...], MatchingLpSolution | None] = {}

        def evaluate(k: int, r: int) -> tuple[float, float]:
            out = []
            for kind in (DecisionKind.FORBID, DecisionKind.ENFORCE):
                self._check_time()
                decisions = node.decisions + (self._child_decision(k, r, kind),)
                sol = self._solve_lp(decisions, max_rounds=self.params.pricing_cap)
                self.strong_solves += 1
                if sol is None:
                    out.append(math.inf)
                    keep[tuple(sorted(decisions))] = None
                elif sol.exact:
                    out.append(max(sol.objective, obj))
                    keep[tuple(sorted(decisions))] = sol
                else:
                    out.append(max(sol.bound, obj))
            return out[0], out[1]

        evaluate.keep = keep  # type: ignore[attr-defined]
        return evaluate

    # -- main loop -------------------------------------------------------------
    def solve(self) -> SolveReport:
        start = time.perf_counter()
        self._deadline = start + self.params.time_limit
        if self.params.heuristic:
            schedule = tuple(circle_schedule(self.inst.n))
            if all(d.admits(schedule[d.round]) for d in self.root_decisions):
                self._offer(schedule)
        root = NodeRecord(0, 0, self.root_decisions, -math.inf)
        heap: list[tuple[float, int, NodeRecord]] = []
        next_node: NodeRecord | None = root
        root_bound = -math.inf
        max_depth = 0
        status = SolveStatus.OPTIMAL
        current: NodeRecord | None = None
        try:
            while True:
                if next_node is None:
                    while heap and prunable(heap[0][0], self.incumbent_value):
                        _, _, pruned = heapq.heappop(heap)
                        pruned.status = NodeStatus.PRUNED
                    if not heap:
                        break
                    next_node = heapq.heappop(heap)[2]
                node, next_node = next_node, None
                if prunable(node.lp_bound, self.incumbent_value):
                    node.status = NodeStatus.PRUNED
                    continue
                if self.params.node_limit is not None and self.nodes >= self.params.node_limit:
                    heapq.heappush(heap, (node.lp_bound, node.id, node))
                    raise _Limit(SolveStatus.NODE_LIMIT)
                self._check_time()
                current = node
                self.nodes += 1
                if self.params.record_tree:
                    self.records.append(node)
                max_depth = max(max_depth, node.depth)
                children = self._process(node)
                if node.id == 0:
                    root_bound = node.lp_bound
                current = None
                if children:
                    forbid, enforce = children
                    for child in (forbid, enforce):
                        if child.status is NodeStatus.OPEN and prunable(child.lp_bound, self.incumbent_value):
                            child.status = NodeStatus.PRUNED
                            if self.params.record_tree:
                                self.records.append(child)
                    if enforce.status is NodeStatus.OPEN:
                        next_node = enforce
                    if forbid.status is NodeStatus.OPEN:
                        heapq.heappush(heap, (forbid.lp_bound, forbid.id, forbid))
        except _Limit as limit:
            status = limit.status
            if current is not None:
                heapq.heappush(heap, (current.lp_bound, current.id, current))
            if next_node is not None:
                heapq.heappush(heap, (next_node.lp_bound, next_node.id, next_node))

        if status is SolveStatus.OPTIMAL:
            bound = self.incumbent_value
            if self.incumbent is None:
                status = SolveStatus.INFEASIBLE
        else:
            open_bounds = [b for b, _, _ in heap]
            bound = min(open_bounds + [self.incumbent_value])
        return SolveReport(
            status=status,
            value=None if self.incumbent is None else int(self.incumbent_value),
            schedule=self.incumbent,
            bound=float(bound),
            nodes=self.nodes,
            lp_iterations=self.master.total_lp_iterations,
            columns=len(self.master.pool),
            wall_time=time.perf_counter() - start,
            root_bound=root_bound,
            max_depth=max_depth,
            strong_branching_solves=self.strong_solves,
            tree=self.records,
        )

    def _new_id(self) -> int:
        i = self._next_id
        self._next_id += 1
        return i

    def _process(self, node: NodeRecord) -> tuple[NodeRecord, NodeRecord] | None:
        sol = self._solve_lp(node.decisions)
        if sol is None:
            node.status = NodeStatus.INFEASIBLE
            node.lp_bound = math.inf
            return None
        if not sol.exact:
            # pricing stopped at the cutoff: the Lagrangian bound already prunes
            node.lp_bound = max(node.lp_bound, sol.bound)
            node.status = NodeStatus.PRUNED
            return None
        node.lp_bound = max(node.lp_bound, sol.objective)
        if prunable(node.lp_bound, self.incumbent_value):
            node.status = NodeStatus.PRUNED
            return None
        assign = project_to_assign(sol)
        strong = self._strong(node, sol.objective) if self.params.strong_branching else None
        choice = select_branching(assign, self.inst.costs, node.depth, sol.objective, strong)
        if isinstance(choice, IntegralDetected):
            node.status = NodeStatus.INTEGRAL
            self._offer(self._schedule_from(sol))
            return None
        node.status = NodeStatus.BRANCHED
        children = []
        for kind in (DecisionKind.FORBID, DecisionKind.ENFORCE):
            decisions = node.decisions + (self._child_decision(choice.match, choice.round, kind),)
            bound = node.lp_bound
            if strong is not None:
                key = tuple(sorted(decisions))
                keep = strong.keep  # type: ignore[attr-defined]
                if key in keep:
                    if keep[key] is None:
                        bound = math.inf
                    else:
                        bound = max(bound, keep[key].objective)
                        self._cache[key] = keep[key]
            children.append(NodeRecord(self._new_id(), node.depth + 1, decisions, bound, parent=node.id))
        # drop cached solutions of children that will never be processed
        for child in children:
            if child.lp_bound == math.inf:
                child.status = NodeStatus.INFEASIBLE
                self._cache.pop(tuple(sorted(child.decisions)), None)
        return children[0], children[1]


def solve(inst: Instance, params: SolverParams | None = None,
          decisions: Sequence[BranchDecision] = ()) -> SolveReport:
    """Optimal schedule, optionally under fixed root ``decisions``.

    Contradictory decisions raise :class:`DecisionConflict`; decisions that
    are consistent but admit no schedule end with status ``infeasible``.
    """
    return BranchAndPrice(inst, params, decisions).solve()


__all__ = [
    "BranchAndPrice", "BranchingChoice", "INTEGRAL", "IntegralDetected", "NodeRecord", "NodeStatus",
    "Schedule", "SolveReport", "SolveStatus", "SolverParams", "branching_scores", "candidate_count",
    "check_schedule", "prunable", "select_branching", "solve",
]
