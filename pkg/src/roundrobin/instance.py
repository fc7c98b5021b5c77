"""Round robin instances: data model, random generation and file I/O.

Teams are 0-indexed internally.  Matches are unordered pairs ``(i, j)`` with
``i < j`` in lexicographic order; that order fixes the row layout of every
cost table and of the instance file.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

FORMAT_TAG = "srr-instance"
FORMAT_VERSION = 1


class InstanceError(ValueError):
    """Raised for invalid team counts, malformed files or inconsistent tables."""


def check_team_count(n: int, minimum: int = 4) -> None:
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise InstanceError(f"team count must be an integer, got {n!r}")
    if n % 2:
        raise InstanceError(f"team count must be even, got {n}")
    if n < minimum:
        raise InstanceError(f"team count must be at least {minimum}, got {n}")


@lru_cache(maxsize=None)
def matches(n: int) -> tuple[tuple[int, int], ...]:
    """All unordered matches of ``n`` teams in canonical order."""
    return tuple(itertools.combinations(range(n), 2))


@lru_cache(maxsize=None)
def match_index(n: int) -> dict[tuple[int, int], int]:
    return {m: k for k, m in enumerate(matches(n))}


def canonical(i: int, j: int) -> tuple[int, int]:
    if i == j:
        raise InstanceError(f"a match needs two distinct teams, got ({i}, {j})")
    return (i, j) if i < j else (j, i)


@lru_cache(maxsize=None)
def team_incidence(n: int) -> np.ndarray:
    """0/1 matrix of shape (n, |matches|); entry [t, k] is 1 iff team t plays match k."""
    inc = np.zeros((n, len(matches(n))), dtype=np.int8)
    for k, (i, j) in enumerate(matches(n)):
        inc[i, k] = 1
        inc[j, k] = 1
    inc.setflags(write=False)
    return inc


@dataclass(frozen=True, eq=False)
class Instance:
    """An SRR instance: ``n`` teams, ``n - 1`` rounds, integer cost per (match, round).

    ``rho`` and ``seed`` record how a generated instance was produced; they
    carry no meaning for the optimization problem itself.
    """

    n: int
    costs: np.ndarray
    rho: float | None = None
    seed: int | None = None
    name: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        check_team_count(self.n)
        costs = np.asarray(self.costs)
        expected = (len(matches(self.n)), self.n - 1)
        if costs.shape != expected:
            raise InstanceError(f"cost table has shape {costs.shape}, expected {expected}")
        if costs.dtype.kind == "f":
            if not np.all(np.isfinite(costs)) or not np.all(costs == np.round(costs)):
                raise InstanceError("costs must be integral")
        elif costs.dtype.kind not in "iu":
            raise InstanceError(f"unsupported cost dtype {costs.dtype}")
        costs = costs.astype(np.int64, copy=True)
        costs.setflags(write=False)
        object.__setattr__(self, "costs", costs)

    @property
    def rounds(self) -> int:
        return self.n - 1

    @property
    def matches(self) -> tuple[tuple[int, int], ...]:
        return matches(self.n)

    def cost(self, i: int, j: int, r: int) -> int:
        return int(self.costs[match_index(self.n)[canonical(i, j)], r])

    def schedule_cost(self, schedule) -> int:
        """Total cost of ``schedule``: one collection of matches per round."""
        index = match_index(self.n)
        return int(sum(self.costs[index[canonical(*m)], r]
                       for r, matching in enumerate(schedule) for m in matching))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.costs, other.costs)
                and self.rho == other.rho and self.seed == other.seed)

    def __hash__(self) -> int:
        return hash((self.n, self.costs.tobytes(), self.rho, self.seed))


@dataclass(frozen=True, eq=False)
class KrrInstance:
    """A k-round-robin instance with home/away-dependent costs.

    ``ordered_costs[k, r]`` is the cost of ordered match ``ordered_matches(n)[k]``
    (first team at home) in round ``r``; there are ``k * (n - 1)`` rounds and
    part ``l`` covers rounds ``l*(n-1) .. (l+1)*(n-1) - 1``.
    """

    n: int
    k: int
    ordered_costs: np.ndarray
    phased: bool = True

    def __post_init__(self) -> None:
        check_team_count(self.n)
        if self.k < 1:
            raise InstanceError(f"k must be at least 1, got {self.k}")
        costs = np.asarray(self.ordered_costs)
        expected = (self.n * (self.n - 1), self.k * (self.n - 1))
        if costs.shape != expected:
            raise InstanceError(f"cost table has shape {costs.shape}, expected {expected}")
        costs = costs.astype(np.int64, copy=True)
        costs.setflags(write=False)
        object.__setattr__(self, "ordered_costs", costs)

    @property
    def rounds(self) -> int:
        return self.k * (self.n - 1)

    def part(self, r: int) -> int:
        return r // (self.n - 1)

    @classmethod
    def from_srr(cls, inst: Instance, k: int, phased: bool = True) -> KrrInstance:
        """Replicate an SRR cost table in every part, same cost for home and away."""
        om = ordered_matches(inst.n)
        index = match_index(inst.n)
        rows = np.array([inst.costs[index[canonical(i, j)]] for i, j in om])
        return cls(inst.n, k, np.tile(rows, (1, k)), phased)


@lru_cache(maxsize=None)
def ordered_matches(n: int) -> tuple[tuple[int, int], ...]:
    return tuple((i, j) for i in range(n) for j in range(n) if i != j)


class SplitMix64:
    """SplitMix64 (Steele, Lea and Flood 2014): 64-bit state, one add and a mix per draw.

    Kept in-tree so that generated instances are identical across numpy and
    Python versions.
    """

    MASK = (1 << 64) - 1

    def __init__(self, seed: int) -> None:
        self.state = seed & self.MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)`` by rejection, free of modulo bias."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % bound


def generate(n: int, rho: float, seed: int) -> Instance:
    """Random 0/1 instance with exactly ``floor(rho * |matches x rounds|)`` unit costs.

    The unit-cost cells are the first ``k`` positions of a partial Fisher-Yates
    shuffle of all cells (match-major, round-minor), driven by SplitMix64.
    """
    check_team_count(n)
    if not 0 < rho < 1:
        raise InstanceError(f"rho must lie strictly between 0 and 1, got {rho}")
    rounds = n - 1
    cells = len(matches(n)) * rounds
    ones = int(np.floor(rho * cells))
    rng = SplitMix64(seed)
    perm = list(range(cells))
    for t in range(ones):
        s = t + rng.below(cells - t)
        perm[t], perm[s] = perm[s], perm[t]
    flat = np.zeros(cells, dtype=np.int64)
    flat[perm[:ones]] = 1
    return Instance(n, flat.reshape(len(matches(n)), rounds), rho=rho, seed=seed)


def circle_schedule(n: int) -> list[tuple[tuple[int, int], ...]]:
    """Canonical round robin by the circle method: team ``n-1`` fixed, the others rotate."""
    check_team_count(n, minimum=2)
    rounds = []
    for r in range(n - 1):
        pairs = [canonical(r, n - 1)]
        for k in range(1, n // 2):
            pairs.append(canonical((r + k) % (n - 1), (r - k) % (n - 1)))
        rounds.append(tuple(sorted(pairs)))
    return rounds


def dominance_pairs(n: int) -> list[tuple[int, int]]:
    """Edge set of the separating construction, 0-indexed.

    n = 6: two triangles; n = 8: a triangle and a 5-cycle; n >= 10: two
    triangles plus the cycle 7-8-...-n-7 (1-indexed).
    """
    check_team_count(n, minimum=6)
    pairs = [(0, 1), (1, 2), (0, 2)]
    if n == 8:
        cycle = list(range(3, 8))
    else:
        pairs += [(3, 4), (4, 5), (3, 5)]
        cycle = list(range(6, n))
    if cycle:
        pairs += [canonical(cycle[t], cycle[(t + 1) % len(cycle)]) for t in range(len(cycle))]
    return pairs


def dominance_instance(n: int) -> Instance:
    """Cost 1 for every match outside :func:`dominance_pairs` in the first two rounds."""
    pairs = set(dominance_pairs(n))
    costs = np.zeros((len(matches(n)), n - 1), dtype=np.int64)
    for k, m in enumerate(matches(n)):
        if m not in pairs:
            costs[k, :2] = 1
    return Instance(n, costs, name=f"dominance-{n}")


def to_dict(inst: Instance) -> dict:
    doc: dict = {"format": FORMAT_TAG, "version": FORMAT_VERSION,
                 "n": inst.n, "rounds": inst.rounds}
    if inst.rho is not None:
        doc["rho"] = inst.rho
    if inst.seed is not None:
        doc["seed"] = inst.seed
    doc["costs"] = inst.costs.tolist()
    return doc


def from_dict(doc: dict) -> Instance:
    if not isinstance(doc, dict):
        raise InstanceError("instance document must be a JSON object")
    if doc.get("format") != FORMAT_TAG:
        raise InstanceError(f"not an instance file (format tag {doc.get('format')!r})")
    if doc.get("version") != FORMAT_VERSION:
        raise InstanceError(f"unsupported instance version {doc.get('version')!r}")
    try:
        n, rounds, costs = doc["n"], doc["rounds"], doc["costs"]
    except KeyError as exc:
        raise InstanceError(f"missing field {exc.args[0]!r}") from None
    check_team_count(n)
    if rounds != n - 1:
        raise InstanceError(f"rounds must be n - 1 = {n - 1}, got {rounds}")
    if not isinstance(costs, list) or len(costs) != len(matches(n)):
        raise InstanceError(f"expected {len(matches(n))} cost rows")
    for k, row in enumerate(costs):
        if not isinstance(row, list) or len(row) != rounds:
            raise InstanceError(f"cost row {k} must hold {rounds} entries")
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in row):
            raise InstanceError(f"cost row {k} holds non-integer entries")
    return Instance(n, np.array(costs, dtype=np.int64), rho=doc.get("rho"), seed=doc.get("seed"))


def dumps(inst: Instance) -> str:
    """Serialize with one cost row per line; output is byte-stable."""
    doc = to_dict(inst)
    rows = doc.pop("costs")
    head = json.dumps(doc)[:-1]
    body = ",\n".join("  " + json.dumps(row) for row in rows)
    return f'{head}, "costs": [\n{body}\n]}}\n'


def save(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps(inst), encoding="utf-8")


def load(path: str | Path) -> Instance:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: malformed JSON ({exc})") from None
    inst = from_dict(doc)
    return Instance(inst.n, inst.costs, rho=inst.rho, seed=inst.seed, name=path.stem)
