"""Triangular-program benchmark: linearity of propositional evaluation.

A triangular program of height n is ``p1 <- p2,...,pn``, ``p2 <- p3,...,pn``,
..., ``pn <- true``, sized by its proposition occurrences n(n+1)/2.  The
benchmark meta-interprets it with a variant table on atom lookup plus a
fully-abstracted subsumptive table doing the actual clause resolution, and
times the query ``interp_atom(p1)`` only (program generation is excluded).
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

from .engine import Engine
from .program import Clause, Program, comma_join, parse_program
from .terms import Struct, VarSource

META_INTERPRETER = """
interp_goal(true) :- !.
interp_goal((G1,G2)) :- !, interp_atom(G1), interp_goal(G2).
interp_goal(G) :- interp_atom(G).

:- table interp_atom/1.
interp_atom(G) :- interp_atoms(G).

:- table_index(interp_atoms/1,[0]).
interp_atoms(G) :- (G <- Gs), interp_goal(Gs).
"""


def occurrences(n: int) -> int:
    """Proposition occurrences of the height-n triangular program."""
    return n * (n + 1) // 2


def largest_height(max_occurrences: int) -> int:
    """Height of the largest triangular program within the occurrence
    budget (at least 1)."""
    n = 1
    while occurrences(n + 1) <= max_occurrences:
        n += 1
    return n


def triangular_rules(n: int) -> Program:
    """The height-n triangular program as ``<-``/2 facts."""
    prog = Program()
    atoms = [f"p{i}" for i in range(1, n + 1)]
    for i in range(n - 1):
        body = comma_join(atoms[i + 1:])
        prog.clauses.append(Clause(Struct("<-", (atoms[i], body)), []))
    prog.clauses.append(Clause(Struct("<-", (atoms[n - 1], "true")), []))
    return prog


def build_bench_program(n: int, varsource: VarSource) -> Program:
    prog = parse_program(META_INTERPRETER, varsource)
    prog.extend(triangular_rules(n))
    return prog


@dataclass
class BenchRow:
    target: int
    height: int
    occurrences: int
    seconds: float


def time_once(n: int, step_limit: int = 10 ** 9) -> float:
    vs = VarSource()
    prog = build_bench_program(n, vs)
    engine = Engine(prog, vs, step_limit=step_limit)
    query = Struct("interp_atom", ("p1",))
    t0 = time.perf_counter()
    answers = engine.solve(query)
    elapsed = time.perf_counter() - t0
    if len(answers) != 1:
        raise RuntimeError(f"triangular program height {n}: expected one answer")
    return elapsed


def run_bench(sizes, reps: int = 3, warmup: bool = True) -> list:
    """Median solve times for the largest triangular programs within each
    occurrence target.  One warmup run precedes measurement."""
    rows = []
    for target in sizes:
        n = largest_height(target)
        if warmup:
            time_once(n)
        times = [time_once(n) for _ in range(max(1, reps))]
        rows.append(BenchRow(target, n, occurrences(n), statistics.median(times)))
    return rows


def doubling_ratios(rows) -> list:
    """(target_a, target_b, time_ratio) for adjacent rows where the
    occurrence target doubles."""
    out = []
    for a, b in zip(rows, rows[1:]):
        if b.target == 2 * a.target:
            out.append((a.target, b.target, b.seconds / a.seconds))
    return out


def loglog_slope(rows) -> float:
    """Least-squares exponent of time against size on the log-log plane."""
    import math

    xs = [math.log(r.occurrences) for r in rows]
    ys = [math.log(max(r.seconds, 1e-9)) for r in rows]
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    den = sum((x - mx) ** 2 for x in xs)
    return num / den


def format_report(rows, reps: int) -> str:
    lines = [f"{'target':>10} {'height':>8} {'occurrences':>12} {'median_s':>10}"]
    for r in rows:
        lines.append(
            f"{r.target:>10} {r.height:>8} {r.occurrences:>12} {r.seconds:>10.4f}"
        )
    for a, b, ratio in doubling_ratios(rows):
        lines.append(f"doubling {a} -> {b}: time ratio {ratio:.2f}")
    if len(rows) >= 2:
        lines.append(f"log-log slope over {len(rows)} points: {loglog_slope(rows):.3f}")
    lines.append(f"(medians over {reps} repetitions, one warmup)")
    return "\n".join(lines)
