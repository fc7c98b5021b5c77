"""LP relaxations of the traditional, matching and permutation SRR models.

All relaxations return values in their own variable space.  The matching and
permutation models have exponentially many columns and are solved by column
generation; both start from an empty master and price with a
maximum-weight perfect matching (general graph for rounds, bipartite
opponent x round graph for team permutations).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import lp
from .instance import (Instance, circle_schedule, InstanceError, KrrInstance, match_index, matches, ordered_matches,
                       team_incidence)
from .lp import OPT_TOL, LpModel, Sense, Status
from .matching import (BranchDecision, DecisionKind, PerfectMatching, WeightedGraph,
                       allowed_mask, check_decisions, max_weight_perfect_matching,
                       max_weight_perfect_matching_array)

log = logging.getLogger(__name__)


class PricingError(RuntimeError):
    """Pricing produced a column that the master already holds with negative reduced cost."""


class InfeasibleMaster(RuntimeError):
    """The decision-restricted master problem has no feasible solution."""


# ---------------------------------------------------------------- traditional

@dataclass(frozen=True)
class TraditionalIndex:
    n: int

    @property
    def rounds(self) -> int:
        return self.n - 1

    def var(self, k: int, r: int) -> int:
        return k * self.rounds + r

    def match_row(self, k: int) -> int:
        return k

    def team_row(self, t: int, r: int) -> int:
        return len(matches(self.n)) + t * self.rounds + r


def build_traditional_lp(inst: Instance) -> tuple[LpModel, TraditionalIndex]:
    """One column per (match, round); rows: match played once, team plays once per round."""
    n, R = inst.n, inst.rounds
    idx = TraditionalIndex(n)
    model = LpModel()
    for k, (i, j) in enumerate(inst.matches):
        model.add_row(1.0, Sense.EQ, name=f"meet_{i + 1}_{j + 1}")
    for t in range(n):
        for r in range(R):
            model.add_row(1.0, Sense.EQ, name=f"play_{t + 1}_r{r + 1}")
    for k, (i, j) in enumerate(inst.matches):
        for r in range(R):
            model.add_column(float(inst.costs[k, r]),
                             {idx.match_row(k): 1.0, idx.team_row(i, r): 1.0, idx.team_row(j, r): 1.0},
                             name=f"x_{i + 1}_{j + 1}_r{r + 1}")
    return model, idx


def assign_from_primal(inst: Instance, primal: np.ndarray) -> np.ndarray:
    return np.asarray(primal[: len(inst.matches) * inst.rounds]).reshape(len(inst.matches), inst.rounds)


def solve_traditional_relaxation(inst: Instance) -> tuple[float, np.ndarray]:
    model, _ = build_traditional_lp(inst)
    res = model.solve()
    if res.status is not Status.OPTIMAL:
        raise lp.LpError(f"traditional relaxation ended {res.status.value}")
    return res.objective, assign_from_primal(inst, res.primal)


def check_assign(n: int, x: np.ndarray, tol: float = 1e-6) -> bool:
    """Whether ``x`` satisfies the match-once and team-once-per-round equations."""
    x = np.asarray(x, dtype=float)
    if np.any(x < -tol):
        return False
    if np.max(np.abs(x.sum(axis=1) - 1.0)) > tol:
        return False
    return bool(np.max(np.abs(team_incidence(n) @ x - 1.0)) <= tol)


# ------------------------------------------------------------------ matching

@dataclass(frozen=True)
class Column:
    matching: PerfectMatching
    round: int
    cost: int


@dataclass
class MatchingLpSolution:
    """Nonzero columns of a matching-model LP solution.

    ``bound`` is a valid lower bound on the decision-restricted LP value; it
    equals ``objective`` when pricing converged (``exact``).
    """

    n: int
    entries: list[tuple[Column, float]]
    objective: float
    bound: float = -math.inf
    exact: bool = True
    pricing_rounds: int = 0
    lp_iterations: int = 0
    columns_added: int = 0
    final_min_reduced_cost: float = 0.0

    @property
    def rounds(self) -> int:
        return self.n - 1


def column_cost(inst: Instance, matching: Iterable[tuple[int, int]], r: int) -> int:
    index = match_index(inst.n)
    return int(sum(inst.costs[index[m], r] for m in matching))


class ColumnPool:
    """Every (perfect matching, round) column generated so far, with vectorized filtering."""

    def __init__(self, inst: Instance) -> None:
        self.inst = inst
        self.columns: list[Column] = []
        self._keys: dict[tuple[PerfectMatching, int], int] = {}
        self._inc = np.zeros((64, len(inst.matches)), dtype=bool)
        self._round = np.zeros(64, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.columns)

    def find(self, matching: PerfectMatching, r: int) -> int | None:
        return self._keys.get((matching, r))

    def add(self, matching: PerfectMatching, r: int) -> int:
        key = (matching, r)
        if key in self._keys:
            return self._keys[key]
        k = len(self.columns)
        if k == self._inc.shape[0]:
            self._inc = np.vstack([self._inc, np.zeros_like(self._inc)])
            self._round = np.concatenate([self._round, np.zeros_like(self._round)])
        index = match_index(self.inst.n)
        for m in matching:
            self._inc[k, index[m]] = True
        self._round[k] = r
        col = Column(matching, r, column_cost(self.inst, matching, r))
        self.columns.append(col)
        self._keys[key] = k
        return k

    def incidence(self, ids: Sequence[int] | np.ndarray) -> np.ndarray:
        return self._inc[np.asarray(ids, dtype=np.int64)]

    def admissible(self, decisions: Iterable[BranchDecision]) -> np.ndarray:
        """Ids of pool columns that respect every decision."""
        size = len(self.columns)
        ok = np.ones(size, dtype=bool)
        rounds = self._round[:size]
        index = match_index(self.inst.n)
        for d in decisions:
            has = self._inc[:size, index[d.match]]
            want = d.kind is DecisionKind.ENFORCE
            ok &= ~((rounds == d.round) & (has != want))
        return np.flatnonzero(ok)


class MatchingMaster:
    """Column generation for the matching model under Ryan-Foster decisions.

    One LP holds every pooled column for the lifetime of the master.  A call
    fixes the columns that violate its decisions to zero, so each solve starts
    from the previous basis, then prices until no round yields a column with
    negative reduced cost (or Farkas-positive weight while the master is
    infeasible).
    """

    def __init__(self, inst: Instance) -> None:
        self.inst = inst
        self.pool = ColumnPool(inst)
        self.R = inst.rounds
        self.M = len(inst.matches)
        self.model = LpModel()
        for r in range(self.R):
            self.model.add_row(1.0, Sense.EQ, name=f"round_{r + 1}")
        for (i, j) in inst.matches:
            self.model.add_row(1.0, Sense.EQ, name=f"meet_{i + 1}_{j + 1}")
        self.total_lp_iterations = 0
        self.total_pricing_rounds = 0

    def _round_masks(self, decisions: Sequence[BranchDecision]) -> list[np.ndarray]:
        by_round: dict[int, list[BranchDecision]] = {}
        for d in decisions:
            by_round.setdefault(d.round, []).append(d)
        return [allowed_mask(self.inst.n, by_round.get(r, [])) for r in range(self.R)]

    def _add(self, matching: PerfectMatching, r: int) -> int:
        pid = self.pool.add(matching, r)
        index = match_index(self.inst.n)
        coeffs = {r: 1.0}
        for m in matching:
            coeffs[self.R + index[m]] = 1.0
        col = self.model.add_column(float(self.pool.columns[pid].cost), coeffs)
        assert col == pid
        return pid

    def _price_round(self, weights: np.ndarray, mask: np.ndarray) -> tuple[PerfectMatching, float] | None:
        return max_weight_perfect_matching_array(self.inst.n, weights, mask)

    def solve(self, decisions: Sequence[BranchDecision] = (), max_rounds: int | None = None,
              cutoff: float = math.inf) -> MatchingLpSolution:
        """Solve the decision-restricted LP; raise :class:`InfeasibleMaster` if it is provably empty.

        ``max_rounds`` caps pricing rounds and ``cutoff`` stops pricing once the
        Lagrangian bound reaches it; either way the result carries ``exact=False``
        and a valid ``bound``.
        """
        decisions = list(decisions)
        check_decisions(decisions)
        inst, R = self.inst, self.R
        masks = self._round_masks(decisions)
        admissible = np.zeros(len(self.pool), dtype=bool)
        admissible[self.pool.admissible(decisions)] = True
        model = self.model
        model.set_fixed(~admissible)
        index = match_index(inst.n)

        rounds_done = 0
        added = 0
        iterations = 0
        bound = -math.inf
        while True:
            res = model.solve()
            iterations += res.iterations
            feasible = res.status is Status.OPTIMAL
            if res.status is Status.UNBOUNDED:
                raise lp.LpError("matching master reported unbounded")
            y = res.duals if feasible else res.farkas_ray
            alpha, beta = y[:R], y[R:]
            new_cols = []
            lagrange = 0.0
            min_rc = 0.0
            for r in range(R):
                weights = beta - inst.costs[:, r] if feasible else beta.copy()
                found = self._price_round(weights, masks[r])
                if found is None:
                    self._account(iterations, rounds_done)
                    raise InfeasibleMaster(f"round {r + 1} admits no perfect matching")
                matching, _ = found
                # exact reduced cost of the priced column under the current duals
                ks = [index[m] for m in matching]
                if feasible:
                    rc = float(inst.costs[ks, r].sum()) - alpha[r] - float(beta[ks].sum())
                    lagrange += min(0.0, rc)
                    min_rc = min(min_rc, rc)
                    improving = rc < -OPT_TOL
                else:
                    improving = alpha[r] + float(beta[ks].sum()) > OPT_TOL
                if improving:
                    new_cols.append((matching, r))
            if feasible:
                bound = max(bound, res.objective + lagrange)
            if not new_cols:
                self._account(iterations, rounds_done)
                if not feasible:
                    raise InfeasibleMaster("no column prices out of the Farkas ray")
                return self._solution(res, admissible, res.objective, True,
                                      rounds_done, iterations, added, min_rc)
            if feasible and (bound >= cutoff or (max_rounds is not None and rounds_done >= max_rounds)):
                self._account(iterations, rounds_done)
                return self._solution(res, admissible, bound, False,
                                      rounds_done, iterations, added, min_rc)
            for matching, r in new_cols:
                if self.pool.find(matching, r) is not None:
                    raise PricingError(f"pricing regenerated existing column in round {r + 1}")
                self._add(matching, r)
                added += 1
            admissible = np.concatenate([admissible, np.ones(len(new_cols), dtype=bool)])
            rounds_done += 1

    def _account(self, iterations: int, rounds_done: int) -> None:
        self.total_lp_iterations += iterations
        self.total_pricing_rounds += rounds_done

    def _solution(self, res, admissible, bound, exact, rounds_done, iterations, added, min_rc):
        entries = []
        for pid in np.flatnonzero(res.primal > 1e-12):
            assert admissible[pid]
            entries.append((self.pool.columns[pid], float(res.primal[pid])))
        return MatchingLpSolution(self.inst.n, entries, res.objective, bound=bound if not exact else res.objective,
                                  exact=exact, pricing_rounds=rounds_done, lp_iterations=iterations,
                                  columns_added=added, final_min_reduced_cost=min_rc)


def solve_matching_relaxation(inst: Instance, decisions: Sequence[BranchDecision] = ()) -> MatchingLpSolution:
    """LP value of the matching model restricted by ``decisions`` (fresh column pool)."""
    return MatchingMaster(inst).solve(decisions)


def project_to_assign(sol: MatchingLpSolution) -> np.ndarray:
    """``x[m, r]`` = total value of the round-``r`` columns whose matching contains ``m``."""
    index = match_index(sol.n)
    values = [v for _, v in sol.entries]
    exact = all(not isinstance(v, float) for v in values) and values
    x = np.zeros((len(matches(sol.n)), sol.rounds), dtype=object if exact else float)
    if exact:
        x[:] = 0
    for col, v in sol.entries:
        for m in col.matching:
            x[index[m], col.round] += v
    return x


def check_matching_solution(sol: MatchingLpSolution, tol: float = 1e-6) -> bool:
    """Whether ``sol`` satisfies one-matching-per-round and each-match-once (exactly if tol is 0)."""
    per_round = [0] * sol.rounds
    per_match = dict.fromkeys(matches(sol.n), 0)
    for col, v in sol.entries:
        if v < -tol:
            return False
        per_round[col.round] += v
        for m in col.matching:
            per_match[m] += v
    return all(abs(s - 1) <= tol for s in per_round) and all(abs(s - 1) <= tol for s in per_match.values())


# --------------------------------------------------------------- permutation

@dataclass(frozen=True)
class PermutationColumn:
    team: int
    order: tuple[int, ...]
    cost: int


def permutation_cost(inst: Instance, team: int, order: Sequence[int]) -> int:
    index = match_index(inst.n)
    return int(sum(inst.costs[index[(min(team, j), max(team, j))], r] for r, j in enumerate(order)))


@dataclass
class PermutationLpSolution:
    objective: float
    columns: list[tuple[PermutationColumn, float]] = field(default_factory=list)
    pricing_rounds: int = 0


def solve_permutation_relaxation(inst: Instance, max_rounds: int = 100_000,
                                 seed_schedule: bool = True) -> PermutationLpSolution:
    """Column generation over (team, opponent order) columns, objective halved.

    The linking rows are stored as ``sum z_i(j at r) - sum z_j(i at r) = 0``
    with ``i < j``; pricing team ``i`` solves a maximum-weight perfect matching
    between its opponents and the rounds.
    """
    n, R = inst.n, inst.rounds
    ms = inst.matches
    index = match_index(n)
    model = LpModel()
    for t in range(n):
        model.add_row(1.0, Sense.EQ, name=f"team_{t + 1}")
    link_row = {}
    for k, (i, j) in enumerate(ms):
        for r in range(R):
            link_row[k, r] = model.add_row(0.0, Sense.EQ, name=f"link_{i + 1}_{j + 1}_r{r + 1}")

    columns: list[PermutationColumn] = []
    seen: set[tuple[int, tuple[int, ...]]] = set()
    opponents = [[j for j in range(n) if j != i] for i in range(n)]

    def add(team: int, order: tuple[int, ...]) -> None:
        coeffs = {team: 1.0}
        for r, j in enumerate(order):
            coeffs[link_row[index[(min(team, j), max(team, j))], r]] = 1.0 if team < j else -1.0
        col = PermutationColumn(team, order, permutation_cost(inst, team, order))
        model.add_column(0.5 * col.cost, coeffs)
        columns.append(col)
        seen.add((team, order))

    if seed_schedule:
        # one feasible schedule up front lets the master skip the Farkas phase
        orders = [[0] * R for _ in range(n)]
        for r, matching in enumerate(circle_schedule(n)):
            for i, j in matching:
                orders[i][r], orders[j][r] = j, i
        for t in range(n):
            add(t, tuple(orders[t]))

    rounds_done = 0
    while True:
        res = model.solve()
        feasible = res.status is Status.OPTIMAL
        y = res.duals if feasible else res.farkas_ray
        alpha = y[:n]
        beta = np.array([[y[link_row[k, r]] for r in range(R)] for k in range(len(ms))])
        found = []
        for i in range(n):
            opp = opponents[i]
            weights = {}
            for a, j in enumerate(opp):
                k = index[(min(i, j), max(i, j))]
                sign = 1.0 if i < j else -1.0
                for r in range(R):
                    w = sign * beta[k, r]
                    if feasible:
                        w -= 0.5 * inst.costs[k, r]
                    weights[(a, len(opp) + r)] = w
            best = max_weight_perfect_matching(WeightedGraph(2 * len(opp), weights))
            assert best is not None  # complete bipartite graph always has one
            pairs, _ = best
            order = [0] * R
            for a, rnode in pairs:
                order[rnode - len(opp)] = opp[a]
            order_t = tuple(order)
            score = sum(weights[(opp.index(j), len(opp) + r)] for r, j in enumerate(order_t))
            if alpha[i] + score > OPT_TOL:
                if (i, order_t) in seen:
                    raise PricingError(f"pricing regenerated existing permutation for team {i + 1}")
                found.append((i, order_t))
        if not found:
            if not feasible:
                raise InfeasibleMaster("permutation master infeasible")
            entries = [(c, float(v)) for c, v in zip(columns, res.primal) if v > 1e-12]
            return PermutationLpSolution(res.objective, entries, rounds_done)
        if rounds_done >= max_rounds:
            raise lp.LpNumericalError("permutation pricing did not converge")
        for i, order_t in found:
            add(i, order_t)
        rounds_done += 1


# ---------------------------------------------------------------------- kRR

def build_krr_traditional_lp(kinst: KrrInstance) -> LpModel:
    """Compact k-round-robin model over ordered matches; needs even ``k``.

    Rows: each ordered match ``k/2`` times, each pair once per part (only
    when phased), each team once per round.
    """
    n, k = kinst.n, kinst.k
    if k % 2:
        raise InstanceError(f"the compact kRR model needs an even k, got {k}")
    R = kinst.rounds
    om = ordered_matches(n)
    pairs = matches(n)
    model = LpModel()
    ord_row = {}
    for a, (i, j) in enumerate(om):
        ord_row[a] = model.add_row(k / 2, Sense.EQ, name=f"home_{i + 1}_{j + 1}")
    part_row = {}
    if kinst.phased:
        for p, (i, j) in enumerate(pairs):
            for part in range(k):
                part_row[p, part] = model.add_row(1.0, Sense.EQ, name=f"part_{i + 1}_{j + 1}_{part}")
    team_row = {}
    for t in range(n):
        for r in range(R):
            team_row[t, r] = model.add_row(1.0, Sense.EQ, name=f"play_{t + 1}_r{r + 1}")
    pidx = match_index(n)
    for a, (i, j) in enumerate(om):
        p = pidx[(min(i, j), max(i, j))]
        for r in range(R):
            coeffs = {ord_row[a]: 1.0, team_row[i, r]: 1.0, team_row[j, r]: 1.0}
            if kinst.phased:
                coeffs[part_row[p, kinst.part(r)]] = 1.0
            model.add_column(float(kinst.ordered_costs[a, r]), coeffs, name=f"x_{i + 1}_{j + 1}_r{r + 1}")
    return model


def solve_krr_traditional_relaxation(kinst: KrrInstance) -> float:
    res = build_krr_traditional_lp(kinst).solve()
    if res.status is not Status.OPTIMAL:
        raise lp.LpError(f"kRR relaxation ended {res.status.value}")
    return res.objective
