"""Valid inequalities: odd cuts for the traditional model, CG cuts for the matching model.

An odd cut ``(U, r)`` states that the matches crossing the odd team set ``U``
carry total value at least 1 in round ``r``.  A CG cut ``(A, B)`` with
pairwise disjoint matches ``A`` and rounds ``B`` (``|A| + |B|`` odd) reads

    sum_{(M, r)} ceil((|M & A| + [r in B]) / 2) * y[M, r]  >=  (1 + |A| + |B|) / 2.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .instance import Instance, canonical, check_team_count, match_index, matches
from .lp import INT_TOL, LpError, Sense, Status
from .formulations import (Column, MatchingLpSolution, assign_from_primal, build_traditional_lp)

VIOLATION_TOL = 1e-6
MAX_SEPARATION_ROUNDS = 200


class CutError(ValueError):
    """Malformed cut."""


class SeparationLimit(RuntimeError):
    """The cutting-plane loop hit its iteration cap with cuts still violated."""


@dataclass(frozen=True, order=True)
class OddCut:
    round: int
    teams: tuple[int, ...]

    def __post_init__(self) -> None:
        teams = tuple(sorted(set(self.teams)))
        if len(teams) != len(self.teams):
            raise CutError("odd cut lists a team twice")
        if len(teams) % 2 == 0 or len(teams) < 3:
            raise CutError(f"odd cut needs an odd team set of size >= 3, got {len(teams)}")
        object.__setattr__(self, "teams", teams)

    def crossing(self, n: int) -> list[tuple[int, int]]:
        inside = set(self.teams)
        return [m for m in matches(n) if (m[0] in inside) != (m[1] in inside)]

    def value(self, x: np.ndarray) -> float:
        n = _team_count(x.shape[0])
        index = match_index(n)
        return float(sum(x[index[m], self.round] for m in self.crossing(n)))


@dataclass(frozen=True, order=True)
class CgCut:
    matches: tuple[tuple[int, int], ...]
    rounds: tuple[int, ...]

    def __post_init__(self) -> None:
        A = tuple(sorted(canonical(*m) for m in self.matches))
        B = tuple(sorted(set(self.rounds)))
        if len(set(A)) != len(A) or len(B) != len(self.rounds):
            raise CutError("cut lists a match or round twice")
        teams = [t for m in A for t in m]
        if len(set(teams)) != len(teams):
            raise CutError("matches in A must be pairwise disjoint")
        if (len(A) + len(B)) % 2 == 0:
            raise CutError("|A| + |B| must be odd")
        object.__setattr__(self, "matches", A)
        object.__setattr__(self, "rounds", B)

    @property
    def rhs(self) -> int:
        return (1 + len(self.matches) + len(self.rounds)) // 2

    def coefficient(self, matching: Iterable[tuple[int, int]], r: int) -> int:
        hits = len(set(self.matches).intersection(matching)) + (r in self.rounds)
        return (hits + 1) // 2


def _team_count(num_matches: int) -> int:
    n = int(round((1 + math.sqrt(1 + 8 * num_matches)) / 2))
    if n * (n - 1) // 2 != num_matches:
        raise CutError(f"{num_matches} rows do not correspond to a complete set of matches")
    return n


# ----------------------------------------------------------------- odd cuts

@lru_cache(maxsize=None)
def odd_sets(n: int) -> tuple[tuple[tuple[int, ...], ...], np.ndarray]:
    """Odd team sets up to complement, and their match-crossing indicator matrix.

    Sets have size 3..n/2; at size exactly n/2 only the half containing team 0 is kept.
    """
    check_team_count(n)
    sets = []
    for size in range(3, n // 2 + 1, 2):
        for U in itertools.combinations(range(n), size):
            if 2 * size == n and U[0] != 0:
                continue
            sets.append(U)
    member = np.zeros((len(sets), n), dtype=bool)
    for k, U in enumerate(sets):
        member[k, list(U)] = True
    ms = np.array(matches(n))
    crossing = (member[:, ms[:, 0]] != member[:, ms[:, 1]]).astype(float)
    crossing.setflags(write=False)
    return tuple(sets), crossing


def separate_odd_cut(x: np.ndarray, r: int, tol: float = VIOLATION_TOL) -> OddCut | None:
    """Most violated odd cut of round ``r`` (first in enumeration order on ties), if any."""
    x = np.asarray(x, dtype=float)
    n = _team_count(x.shape[0])
    if n < 6:
        return None  # for n = 4 every odd set is a singleton up to complement
    sets, crossing = odd_sets(n)
    values = crossing @ x[:, r]
    k = int(np.argmin(values))
    if values[k] < 1.0 - tol:
        return OddCut(r, sets[k])
    return None


class Strengthening(NamedTuple):
    value: float
    cut_count: int
    cuts: list[OddCut]
    history: list[float]
    assign: np.ndarray


def strengthen_traditional(inst: Instance, max_rounds: int = MAX_SEPARATION_ROUNDS) -> Strengthening:
    """Traditional LP with odd cuts added round by round until none is violated.

    Each separation round adds the most violated cut of every round that has one.
    """
    model, idx = build_traditional_lp(inst)
    cuts: list[OddCut] = []
    history: list[float] = []
    for _ in range(max_rounds + 1):
        res = model.solve()
        if res.status is not Status.OPTIMAL:
            raise LpError(f"strengthened traditional LP ended {res.status.value}")
        history.append(res.objective)
        x = assign_from_primal(inst, res.primal)
        found = [c for r in range(inst.rounds) if (c := separate_odd_cut(x, r)) is not None]
        if not found:
            return Strengthening(res.objective, len(cuts), cuts, history, x)
        if len(history) > max_rounds:
            break
        index = match_index(inst.n)
        for cut in found:
            model.add_row(1.0, Sense.GE,
                          {idx.var(index[m], cut.round): 1.0 for m in cut.crossing(inst.n)},
                          name=f"odd_r{cut.round + 1}_" + "_".join(str(t + 1) for t in cut.teams))
            cuts.append(cut)
    raise SeparationLimit(f"odd cuts still violated after {max_rounds} separation rounds")


# ------------------------------------------------------------------ CG cuts

def evaluate_cg_cut(cut: CgCut, sol: MatchingLpSolution) -> tuple[object, int]:
    """``(lhs, rhs)`` of ``cut`` at ``sol``; exact when the solution values are exact."""
    for m in cut.matches:
        if max(m) >= sol.n:
            raise CutError(f"match {m} outside a {sol.n}-team solution")
    if any(not 0 <= r < sol.rounds for r in cut.rounds):
        raise CutError("cut round outside the schedule")
    lhs = sum((cut.coefficient(col.matching, col.round) * v for col, v in sol.entries), 0)
    return lhs, cut.rhs


def separate_simple_cg(sol: MatchingLpSolution, tol: float = VIOLATION_TOL) -> list[CgCut]:
    """Every violated cut with two disjoint matches and one round, in canonical order."""
    n, R = sol.n, sol.rounds
    ms = matches(n)
    index = match_index(n)
    exact = bool(sol.entries) and all(not isinstance(v, float) for _, v in sol.entries)
    dtype = object if exact else float
    zero = Fraction(0) if exact else 0.0
    # X[r, k]: value on match k in round r;  P[r][k1, k2]: value on columns holding both
    X = np.full((R, len(ms)), zero, dtype=dtype)
    P = np.full((R, len(ms), len(ms)), zero, dtype=dtype)
    S = np.full(R, zero, dtype=dtype)
    for col, v in sol.entries:
        ks = [index[m] for m in col.matching]
        S[col.round] += v
        X[col.round, ks] += v
        for a in ks:
            P[col.round, a, ks] += v
    Xt, Pt = X.sum(axis=0), P.sum(axis=0)
    out = []
    for k1, k2 in itertools.combinations(range(len(ms)), 2):
        if set(ms[k1]) & set(ms[k2]):
            continue
        covered = Xt[k1] + Xt[k2] - Pt[k1, k2]
        for r in range(R):
            in_r = X[r, k1] + X[r, k2] - P[r, k1, k2]
            lhs = covered - in_r + S[r] + P[r, k1, k2]
            if lhs < 2 - tol:
                out.append(CgCut((ms[k1], ms[k2]), (r,)))
    return out


# transcription of the fractional point: per round two matchings, each at value 1/2 (teams 1-indexed)
_EXAMPLE1 = (
    (((3, 4), (2, 5), (1, 6)), ((3, 5), (1, 4), (2, 6))),
    (((2, 3), (1, 5), (4, 6)), ((3, 6), (2, 4), (1, 5))),
    (((1, 3), (2, 5), (4, 6)), ((1, 3), (4, 5), (2, 6))),
    (((3, 5), (2, 4), (1, 6)), ((1, 2), (5, 6), (3, 4))),
    (((1, 2), (3, 6), (4, 5)), ((5, 6), (2, 3), (1, 4))),
)


def example1_solution() -> MatchingLpSolution:
    """The ten-column fractional point on six teams, every column at exactly 1/2."""
    half = Fraction(1, 2)
    entries = []
    for r, pair in enumerate(_EXAMPLE1):
        for matching in pair:
            edges = tuple(sorted(canonical(i - 1, j - 1) for i, j in matching))
            entries.append((Column(edges, r, 0), half))
    return MatchingLpSolution(6, entries, objective=0.0, bound=0.0)


# ------------------------------------------------------------------- export

def cuts_to_csv(cuts: Sequence[OddCut | CgCut]) -> str:
    """CSV with columns ``kind,rounds,teams,matches``; teams and rounds 1-indexed."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind", "rounds", "teams", "matches"])
    for cut in cuts:
        if isinstance(cut, OddCut):
            writer.writerow(["odd", cut.round + 1, " ".join(str(t + 1) for t in cut.teams), ""])
        elif isinstance(cut, CgCut):
            writer.writerow(["cg", " ".join(str(r + 1) for r in cut.rounds), "",
                             " ".join(f"{i + 1}-{j + 1}" for i, j in cut.matches)])
        else:
            raise TypeError(f"not a cut: {cut!r}")
    return buf.getvalue()


def cuts_from_csv(text: str) -> list[OddCut | CgCut]:
    out: list[OddCut | CgCut] = []
    for row in csv.DictReader(io.StringIO(text)):
        if row["kind"] == "odd":
            out.append(OddCut(int(row["rounds"]) - 1, tuple(int(t) - 1 for t in row["teams"].split())))
        elif row["kind"] == "cg":
            pairs = [tuple(int(t) - 1 for t in m.split("-")) for m in row["matches"].split()]
            out.append(CgCut(tuple(pairs), tuple(int(r) - 1 for r in row["rounds"].split())))
        else:
            raise CutError(f"unknown cut kind {row['kind']!r}")
    return out


def is_integral(x: np.ndarray, tol: float = INT_TOL) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(np.all(np.minimum(np.abs(x), np.abs(1 - x)) <= tol))


__all__ = [
    "CgCut", "CutError", "OddCut", "SeparationLimit", "Strengthening", "cuts_from_csv",
    "cuts_to_csv", "evaluate_cg_cut", "example1_solution", "is_integral", "odd_sets",
    "separate_odd_cut", "separate_simple_cg", "strengthen_traditional",
]
