"""Command-line interface and experiment harness.

Subcommands:

* ``gen``      write random instances to a directory
* ``compare``  relaxation values per instance plus a per-(n, rho) summary
* ``solve``    branch-and-price on one instance
* ``bench``    branch-and-price timings with shifted geometric means
* ``cuts``     odd cuts found while strengthening the traditional relaxation
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import bnp
from .cuts import cuts_to_csv, strengthen_traditional
from .formulations import (solve_matching_relaxation, solve_permutation_relaxation,
                           solve_traditional_relaxation)
from .instance import Instance, InstanceError, generate, load, save
from .matching import BranchDecision, DecisionConflict, DecisionKind
from .oracles import DFS_LIMIT, brute_force_optimum

log = logging.getLogger("roundrobin")

VALUE_TOL = 1e-6
GEO_SHIFT = 10.0

ROW_HEADER = ["n", "rho", "seed", "v_tra", "v_per", "v_mat", "v_ip", "rgap", "time", "nodes", "status"]
SUMMARY_HEADER = [
    "n", "rho", "count", "avg_tra", "avg_per", "avg_mat", "avg_ip", "solved", "timeout", "errors",
    "gap_count", "gap_avg_tra", "gap_avg_mat", "gap_avg_ip", "gap_solved", "gap_timeout",
    "rgap_avg", "rgap_max",
]
BENCH_HEADER = ["n", "rho", "seed", "status", "value", "bound", "time", "nodes"]
BENCH_SUMMARY_HEADER = ["n", "rho", "count", "solved", "timeout", "errors", "min", "mean", "max"]


# ------------------------------------------------------------------ helpers

def shifted_geometric_mean(values: Sequence[float], shift: float = GEO_SHIFT) -> float:
    """``prod(t + shift) ** (1/N) - shift``; nan for an empty sequence."""
    if not values:
        return math.nan
    if any(t + shift <= 0 for t in values):
        raise ValueError("shifted values must be positive")
    logs = math.fsum(math.log(t + shift) for t in values)
    return math.exp(logs / len(values)) - shift


def rgap(v_tra: float, v_mat: float, v_ip: float | None) -> float | None:
    """Share of the traditional gap closed by the matching relaxation, if there is a gap."""
    if v_ip is None or v_ip - v_tra <= VALUE_TOL:
        return None
    return (v_mat - v_tra) / (v_ip - v_tra)


def _fmt(v: float | int | None, digits: int = 6) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, int):
        return str(v)
    out = f"{v:.{digits}f}".rstrip("0").rstrip(".")
    return "0" if out in ("-0", "") else out


def _sort_key(inst: Instance) -> tuple:
    return (inst.n, -1.0 if inst.rho is None else inst.rho, -1 if inst.seed is None else inst.seed,
            inst.name or "")


def _instance_files(paths: Iterable[str]) -> list[Path]:
    out: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(p.glob("*.json")))
        else:
            out.append(p)
    return out


_GRID = re.compile(r"^(\d+):([0-9.,]+):(\d+)(?::(\d+))?$")


def _grid(spec: str) -> list[Instance]:
    """``N:RHO[,RHO...]:COUNT[:SEED0]`` generated in memory."""
    m = _GRID.match(spec)
    if not m:
        raise argparse.ArgumentTypeError(f"grid must look like N:RHO[,RHO]:COUNT[:SEED0], got {spec!r}")
    n, count, seed0 = int(m[1]), int(m[3]), int(m[4] or 0)
    return [generate(n, float(rho), seed0 + s) for rho in m[2].split(",") for s in range(count)]


def collect_instances(paths: Sequence[str], grids: Sequence[str]) -> list[Instance]:
    insts = [load(p) for p in _instance_files(paths)]
    for spec in grids:
        insts.extend(_grid(spec))
    return sorted(insts, key=_sort_key)


def _run_all(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _params(args: argparse.Namespace) -> bnp.SolverParams:
    return bnp.SolverParams(
        time_limit=args.time_limit if args.time_limit is not None else math.inf,
        node_limit=args.node_limit,
        pricing_cap=args.pricing_cap,
        strong_branching=not args.no_strong_branching,
        heuristic=args.heuristic,
    )


# ------------------------------------------------------------------ compare

@dataclass
class ExperimentRow:
    n: int
    rho: float | None
    seed: int | None
    v_tra: float | None = None
    v_per: float | None = None
    v_mat: float | None = None
    v_ip: int | None = None
    rgap: float | None = None
    time: float | None = None
    nodes: int | None = None
    status: str = "ok"
    name: str = ""

    def csv_fields(self, with_time: bool = True) -> list[str]:
        return [str(self.n), _fmt(self.rho, 4), _fmt(self.seed), _fmt(self.v_tra), _fmt(self.v_per),
                _fmt(self.v_mat), _fmt(self.v_ip), _fmt(self.rgap),
                _fmt(self.time, 3) if with_time else "", _fmt(self.nodes), self.status]

    @property
    def errored(self) -> bool:
        return self.status.startswith("error")


def row_violations(row: ExperimentRow) -> list[str]:
    """Broken per-row invariants: dominance chain, v_per = v_tra, rgap presence and range."""
    bad = []
    if row.errored:
        return bad
    if row.v_tra is not None and row.v_mat is not None and row.v_tra > row.v_mat + VALUE_TOL:
        bad.append("v_tra > v_mat")
    if row.v_mat is not None and row.v_ip is not None and row.v_mat > row.v_ip + VALUE_TOL:
        bad.append("v_mat > v_ip")
    if row.v_per is not None and row.v_tra is not None and abs(row.v_per - row.v_tra) > VALUE_TOL:
        bad.append("v_per != v_tra")
    gap = row.v_ip is not None and row.v_tra is not None and row.v_ip - row.v_tra > VALUE_TOL
    if gap != (row.rgap is not None):
        bad.append("rgap presence does not match the gap")
    if row.rgap is not None and not -VALUE_TOL <= row.rgap <= 1 + VALUE_TOL:
        bad.append("rgap outside [0, 1]")
    return bad


@dataclass(frozen=True)
class CompareOptions:
    ip_oracle: str = "bnp"
    permutation: bool = True
    params: bnp.SolverParams = field(default_factory=bnp.SolverParams)


def compare_instance(inst: Instance, options: CompareOptions | None = None) -> ExperimentRow:
    options = options or CompareOptions()
    row = ExperimentRow(inst.n, inst.rho, inst.seed, name=inst.name or "")
    try:
        row.v_tra = solve_traditional_relaxation(inst)[0]
        if options.permutation:
            row.v_per = solve_permutation_relaxation(inst).objective
        row.v_mat = solve_matching_relaxation(inst).objective
        if options.ip_oracle == "brute":
            start = time.perf_counter()
            row.v_ip = brute_force_optimum(inst)[0]
            row.time = time.perf_counter() - start
        elif options.ip_oracle == "bnp":
            rep = bnp.solve(inst, options.params)
            row.v_ip, row.time, row.nodes = rep.value, rep.wall_time, rep.nodes
            if not rep.optimal:
                row.status = rep.status.value
        row.rgap = rgap(row.v_tra, row.v_mat, row.v_ip)
    except Exception as exc:  # recorded per row; the batch goes on
        log.error("instance n=%s rho=%s seed=%s failed: %s", inst.n, inst.rho, inst.seed, exc)
        row.status = f"error: {type(exc).__name__}"
    return row


def _mean(values: Sequence[float]) -> float | None:
    return math.fsum(values) / len(values) if values else None


def summarize(rows: Sequence[ExperimentRow]) -> list[dict[str, object]]:
    """Per-(n, rho) aggregates over all rows and over rows with ``v_tra < v_ip``."""
    groups: dict[tuple, list[ExperimentRow]] = {}
    for row in rows:
        groups.setdefault((row.n, row.rho), []).append(row)
    out = []
    for (n, rho), group in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1] or -1.0)):
        good = [r for r in group if not r.errored]
        gap = [r for r in good if r.rgap is not None]

        def avg(rs: list[ExperimentRow], attr: str) -> float | None:
            vals = [getattr(r, attr) for r in rs if getattr(r, attr) is not None]
            return _mean(vals) if len(vals) == len(rs) else None

        def solved(rs: list[ExperimentRow]) -> int:
            return sum(r.v_ip is not None and r.status == "ok" for r in rs)

        def timed_out(rs: list[ExperimentRow]) -> int:
            return sum(r.status in ("time_limit", "node_limit") for r in rs)

        rgaps = [r.rgap for r in gap]
        out.append({
            "n": n, "rho": rho, "count": len(group),
            "avg_tra": avg(good, "v_tra"), "avg_per": avg(good, "v_per"),
            "avg_mat": avg(good, "v_mat"), "avg_ip": avg(good, "v_ip"),
            "solved": solved(good), "timeout": timed_out(good), "errors": len(group) - len(good),
            "gap_count": len(gap), "gap_avg_tra": avg(gap, "v_tra"), "gap_avg_mat": avg(gap, "v_mat"),
            "gap_avg_ip": avg(gap, "v_ip"), "gap_solved": solved(gap), "gap_timeout": timed_out(gap),
            "rgap_avg": _mean(rgaps), "rgap_max": max(rgaps) if rgaps else None,
        })
    return out


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _summary_fields(summary: dict[str, object], header: Sequence[str]) -> list[str]:
    cells = []
    for key in header:
        v = summary[key]
        cells.append(_fmt(v, 4) if key == "rho" else _fmt(v))  # type: ignore[arg-type]
    return cells


def compare_csv(rows: Sequence[ExperimentRow], with_time: bool = True) -> tuple[str, str]:
    """Row table and summary table as CSV text."""
    table = _csv_text(ROW_HEADER, (r.csv_fields(with_time) for r in rows))
    summary = _csv_text(SUMMARY_HEADER, (_summary_fields(s, SUMMARY_HEADER) for s in summarize(rows)))
    return table, summary


# -------------------------------------------------------------------- bench

def bench_summary(reports: Sequence[tuple[Instance, bnp.SolveReport | None]]) -> list[dict[str, object]]:
    groups: dict[tuple, list[bnp.SolveReport | None]] = {}
    for inst, rep in reports:
        groups.setdefault((inst.n, inst.rho), []).append(rep)
    out = []
    for (n, rho), group in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1] or -1.0)):
        ok = [r for r in group if r is not None]
        times = [r.wall_time for r in ok]
        out.append({
            "n": n, "rho": rho, "count": len(group),
            "solved": sum(r.optimal for r in ok),
            "timeout": sum(r.status in (bnp.SolveStatus.TIME_LIMIT, bnp.SolveStatus.NODE_LIMIT) for r in ok),
            "errors": len(group) - len(ok),
            "min": min(times) if times else None,
            "mean": shifted_geometric_mean(times) if times else None,
            "max": max(times) if times else None,
        })
    return out


def _bench_one(item: tuple[Instance, bnp.SolverParams]) -> bnp.SolveReport | None:
    inst, params = item
    try:
        return bnp.solve(inst, params)
    except Exception as exc:
        log.error("instance n=%s rho=%s seed=%s failed: %s", inst.n, inst.rho, inst.seed, exc)
        return None


def _compare_one(item: tuple[Instance, CompareOptions]) -> ExperimentRow:
    return compare_instance(*item)


# ----------------------------------------------------------------- commands

def format_schedule(schedule: Sequence[Sequence[tuple[int, int]]]) -> str:
    return "\n".join(
        f"round {r + 1:>2}: " + "  ".join(f"{i + 1}-{j + 1}" for i, j in sorted(matching))
        for r, matching in enumerate(schedule))


def _parse_decision(text: str, kind: DecisionKind) -> BranchDecision:
    m = re.fullmatch(r"(\d+)-(\d+)@(\d+)", text)
    if not m:
        raise argparse.ArgumentTypeError(f"decision must look like I-J@ROUND (1-indexed), got {text!r}")
    i, j, r = (int(g) - 1 for g in m.groups())
    if i == j or min(i, j, r) < 0:
        raise argparse.ArgumentTypeError(f"bad decision {text!r}")
    return BranchDecision((i, j), r, kind)


def cmd_gen(args: argparse.Namespace) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for s in range(args.seed0, args.seed0 + args.count):
        inst = generate(args.n, args.rho, s)
        save(inst, outdir / f"srr_n{args.n}_rho{args.rho:.2f}_s{s}.json")
    log.info("wrote %d instances to %s", args.count, outdir)
    return 0


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_compare(args: argparse.Namespace) -> int:
    insts = collect_instances(args.instances, args.grid)
    if args.ip_oracle == "brute" and any(i.n > DFS_LIMIT for i in insts):
        raise SystemExit(f"--ip-oracle brute supports n <= {DFS_LIMIT}")
    options = CompareOptions(args.ip_oracle, not args.no_permutation, _params(args))
    rows = _run_all(_compare_one, [(i, options) for i in insts], args.jobs)
    table, summary = compare_csv(rows, with_time=not args.no_times)
    for row in rows:
        for problem in row_violations(row):
            log.warning("n=%s rho=%s seed=%s: %s", row.n, row.rho, row.seed, problem)
    if args.summary:
        _write(table, args.out)
        Path(args.summary).write_text(summary, encoding="utf-8")
    else:
        _write(table + "\n" + summary, args.out)
    return 1 if any(r.errored for r in rows) else 0


def cmd_solve(args: argparse.Namespace) -> int:
    inst = load(args.instance)
    decisions = [_parse_decision(t, DecisionKind.ENFORCE) for t in args.enforce]
    decisions += [_parse_decision(t, DecisionKind.FORBID) for t in args.forbid]
    try:
        rep = bnp.solve(inst, _params(args), decisions)
    except DecisionConflict as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    lines = [f"instance   {args.instance} (n={inst.n})",
             f"status     {rep.status.value}",
             f"value      {_fmt(rep.value) or '-'}",
             f"bound      {_fmt(rep.bound)}",
             f"gap        {_fmt(rep.gap)}",
             f"root bound {_fmt(rep.root_bound)}",
             f"nodes      {rep.nodes}",
             f"columns    {rep.columns}",
             f"lp iters   {rep.lp_iterations}",
             f"time       {rep.wall_time:.3f} s"]
    if rep.schedule is not None:
        lines += ["schedule", format_schedule(rep.schedule)]
    print("\n".join(lines))
    print()
    print(_csv_text(BENCH_HEADER, [[str(inst.n), _fmt(inst.rho, 4), _fmt(inst.seed), rep.status.value,
                                    _fmt(rep.value), _fmt(rep.bound), _fmt(rep.wall_time, 3),
                                    str(rep.nodes)]]), end="")
    return 0 if rep.status in (bnp.SolveStatus.OPTIMAL, bnp.SolveStatus.INFEASIBLE) else 3


def cmd_bench(args: argparse.Namespace) -> int:
    insts = collect_instances(args.instances, args.grid)
    params = _params(args)
    reports = _run_all(_bench_one, [(i, params) for i in insts], args.jobs)
    rows = []
    for inst, rep in zip(insts, reports):
        if rep is None:
            rows.append([str(inst.n), _fmt(inst.rho, 4), _fmt(inst.seed), "error", "", "", "", ""])
        else:
            rows.append([str(inst.n), _fmt(inst.rho, 4), _fmt(inst.seed), rep.status.value,
                         _fmt(rep.value), _fmt(rep.bound), _fmt(rep.wall_time, 3), str(rep.nodes)])
    summary = bench_summary(list(zip(insts, reports)))
    text = _csv_text(BENCH_SUMMARY_HEADER, (
        [_fmt(s[k], 4) if k == "rho" else (_fmt(s[k], 2) if k in ("min", "mean", "max") else _fmt(s[k]))
         for k in BENCH_SUMMARY_HEADER] for s in summary))
    if args.out:
        Path(args.out).write_text(_csv_text(BENCH_HEADER, rows), encoding="utf-8")
    sys.stdout.write(text)
    return 1 if any(r is None for r in reports) else 0


def cmd_cuts(args: argparse.Namespace) -> int:
    inst = load(args.instance)
    res = strengthen_traditional(inst)
    log.info("value %s after %d cuts", _fmt(res.value), res.cut_count)
    _write(cuts_to_csv(res.cuts), args.out)
    return 0


# ------------------------------------------------------------------- parser

def _solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("branch-and-price")
    g.add_argument("--time-limit", type=float, help="seconds per instance (default: none)")
    g.add_argument("--node-limit", type=int, help="nodes per instance (default: none)")
    g.add_argument("--pricing-cap", type=int, default=50,
                   help="pricing rounds per strong-branching child LP (default: 50)")
    g.add_argument("--no-strong-branching", action="store_true", help="branch on the top score only")
    g.add_argument("--heuristic", action="store_true", help="seed the incumbent with a circle schedule")


def _batch_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("instances", nargs="*", help="instance files or directories of *.json")
    p.add_argument("--grid", action="append", default=[], metavar="N:RHO[,RHO]:COUNT[:SEED0]",
                   help="generate instances in memory (repeatable)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roundrobin", description="Single round-robin scheduling toolkit.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write random instances")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--seed0", type=int, default=0)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("compare", help="compare relaxation values")
    _batch_flags(p)
    p.add_argument("--ip-oracle", choices=["bnp", "brute", "none"], default="bnp",
                   help="source of v_ip (brute needs n <= 8)")
    p.add_argument("--no-permutation", action="store_true", help="skip the permutation relaxation")
    p.add_argument("--no-times", action="store_true", help="leave the time column empty")
    p.add_argument("--out", help="row CSV path (default: stdout)")
    p.add_argument("--summary", help="summary CSV path (default: appended after the rows)")
    _solver_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("solve", help="solve one instance by branch-and-price")
    p.add_argument("instance")
    p.add_argument("--enforce", action="append", default=[], metavar="I-J@R",
                   help="play match I-J in round R (1-indexed, repeatable)")
    p.add_argument("--forbid", action="append", default=[], metavar="I-J@R",
                   help="never play match I-J in round R (1-indexed, repeatable)")
    _solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="time branch-and-price over a batch")
    _batch_flags(p)
    p.add_argument("--out", help="per-instance CSV path")
    _solver_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("cuts", help="export the odd cuts that close the traditional relaxation")
    p.add_argument("instance")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_cuts)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InstanceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())


__all__ = [
    "CompareOptions", "ExperimentRow", "bench_summary", "build_parser", "compare_csv", "compare_instance",
    "format_schedule", "main", "rgap", "row_violations", "shifted_geometric_mean", "summarize",
]
