"""Command-line front end.

Commands: run, trace, transform, dump-tables, check, bench, ingest-demo.
Exit codes: 0 answers found / check passed, 1 no answers / check failed,
2 any error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import bench as benchmod
from .bottomup import (
    OracleError,
    check_theorem1_conditions,
    diff_with_engine,
    iteration_log,
    least_model,
)
from .engine import Engine, EngineError, TraceConfig
from .indexing import IllegalModeError, transformed_text
from .program import (
    ProgramError,
    parse_program,
    parse_query,
    print_term,
    validate,
)
from .tables import format_store
from .terms import VarSource, functor_of

INGEST_PROGRAM = """
:- table_index(emp_data/4,[1+2,1]).
emp_data(FileName,EmpId,Name,Addr) :-
    data_records(FileName,read,emp(EmpId,Name,Addr)).
"""


def _load(paths, varsource):
    text = []
    for p in paths:
        with open(p, "r", encoding="utf-8") as fh:
            text.append(fh.read())
    program = parse_program("\n".join(text), varsource)
    diags = validate(program)
    errors = [d for d in diags if d.severity == "error"]
    for d in diags:
        if d.severity == "warning":
            print(str(d), file=sys.stderr)
    if errors:
        raise ProgramError("; ".join(d.message for d in errors))
    return program


def _trace_config(mode: str) -> TraceConfig:
    return TraceConfig(log=(mode == "log"), machines=(mode == "machines"),
                       events=(mode != "off"))


def _answer_text(ans) -> str:
    if not ans.bindings:
        return "true"
    return ", ".join(f"{name} = {print_term(val)}"
                     for name, val in ans.bindings.items())


def cmd_run(args) -> int:
    vs = VarSource()
    program = _load(args.programs, vs)
    query, names = parse_query(args.query, vs)
    printed = []

    def stream(ans):
        line = _answer_text(ans)
        printed.append(line)
        print(line)

    engine = Engine(
        program,
        vs,
        step_limit=args.step_limit,
        trace=_trace_config(args.trace),
        data_root=args.data_root,
        stream=stream if args.stream else None,
    )
    answers = engine.solve(query, names)
    if args.trace == "log":
        for line in engine.log_lines:
            print(line)
    elif args.trace == "machines":
        print("\n\n".join(engine.machine_blocks))
    if args.format == "records":
        qtext = print_term(query, {v.id: n for n, v in names.items()})
        for ans in answers:
            print(json.dumps({
                "query": qtext,
                "answer": print_term(ans.term),
                "ordinal": ans.ordinal + 1,
            }))
    else:
        if not args.stream:
            for ans in answers:
                print(_answer_text(ans))
        print("no")
    return 0 if answers else 1


def cmd_transform(args) -> int:
    vs = VarSource()
    program = _load(args.programs, vs)
    try:
        sys.stdout.write(transformed_text(program, vs))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def cmd_dump_tables(args) -> int:
    vs = VarSource()
    program = _load(args.programs, vs)
    query, names = parse_query(args.query, vs)
    engine = Engine(program, vs, step_limit=args.step_limit,
                    data_root=args.data_root)
    answers = engine.solve(query, names)
    print(format_store(engine.store))
    return 0 if answers else 1


def cmd_check(args) -> int:
    vs = VarSource()
    program = _load(args.programs, vs)
    if args.iterations:
        model = least_model(program)
        print(iteration_log(model))
        if not args.query:
            return 0
    if not args.query:
        print("error: check requires --query", file=sys.stderr)
        return 2
    query, _names = parse_query(args.query, vs)
    report = diff_with_engine(
        program, query,
        lambda prog: Engine(prog, vs, step_limit=args.step_limit),
    )
    t1 = check_theorem1_conditions(program, functor_of(query))
    print(f"theorem-conditions: reachable={t1.reachable_ok} bodies={t1.bodies_ok}"
          + (f" ({t1.witness})" if t1.witness else ""))
    if report.ok:
        print("PASS: evaluator agrees with the least-model oracle"
              + (" (tables cover the full model)" if report.model_checked else ""))
        return 0
    print(f"FAIL: {report.witness}")
    return 1


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    if any(s <= 0 for s in sizes) or sizes != sorted(sizes):
        print("error: --sizes must be positive and increasing", file=sys.stderr)
        return 2
    rows = benchmod.run_bench(sizes, reps=args.reps)
    print(benchmod.format_report(rows, args.reps))
    return 0


def cmd_ingest_demo(args) -> int:
    vs = VarSource()
    program = parse_program(INGEST_PROGRAM, vs)
    engine = Engine(program, vs, trace=TraceConfig(events=True),
                    data_root=args.data_root)
    total = 0
    for path in args.files:
        if not os.path.exists(os.path.join(args.data_root or "", path)):
            print(f"error: no such data file {path}", file=sys.stderr)
            return 2
        for round_no in (1, 2):
            query, names = parse_query(f"emp_data('{path}', Id, Name, Addr)", vs)
            answers = engine.solve(query, names)
            total += len(answers)
            print(f"{path} query {round_no}: {len(answers)} records")
    opens = [ev for ev in engine.events if ev[0] == "file-open"]
    print(f"file opens: {len(opens)}")
    return 0 if total else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tabhorn",
        description="Tabled Horn-clause evaluator with subsumptive call "
                    "abstraction and a bottom-up oracle.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, query_required=True):
        p.add_argument("programs", nargs="+", help="program files")
        p.add_argument("--query", required=query_required, help="goal to solve")
        p.add_argument("--step-limit", type=int, default=10 ** 8)
        p.add_argument("--data-root", default=os.environ.get("TABHORN_DATA_DIR"),
                       help="base directory for data_records files")

    p_run = sub.add_parser("run", help="solve a query")
    add_common(p_run)
    p_run.add_argument("--trace", choices=["off", "log", "machines"], default="off")
    p_run.add_argument("--stream", action="store_true",
                       help="print answers as they are found")
    p_run.add_argument("--format", choices=["text", "records"], default="text")
    p_run.set_defaults(func=cmd_run)

    p_trace = sub.add_parser("trace", help="run with tracing (default: log)")
    add_common(p_trace)
    p_trace.add_argument("--trace", choices=["off", "log", "machines"],
                         default="log")
    p_trace.add_argument("--stream", action="store_true")
    p_trace.add_argument("--format", choices=["text", "records"], default="text")
    p_trace.set_defaults(func=cmd_run)

    p_tr = sub.add_parser("transform", help="emit the tabled equivalent of "
                                            "every table_index predicate")
    p_tr.add_argument("programs", nargs="+")
    p_tr.set_defaults(func=cmd_transform)

    p_dump = sub.add_parser("dump-tables", help="solve, then dump the tables")
    add_common(p_dump)
    p_dump.set_defaults(func=cmd_dump_tables)

    p_check = sub.add_parser("check", help="differential check against the "
                                           "bottom-up oracle")
    p_check.add_argument("programs", nargs="+")
    p_check.add_argument("--query")
    p_check.add_argument("--step-limit", type=int, default=10 ** 8)
    p_check.add_argument("--iterations", action="store_true",
                         help="print the bottom-up iteration log")
    p_check.set_defaults(func=cmd_check)

    p_bench = sub.add_parser("bench", help="triangular-program benchmark")
    p_bench.add_argument("--sizes", default="10000,20000,100000",
                         help="comma-separated proposition-occurrence targets")
    p_bench.add_argument("--reps", type=int, default=3)
    p_bench.set_defaults(func=cmd_bench)

    p_ing = sub.add_parser("ingest-demo", help="demonstrate single-read "
                                               "file ingestion")
    p_ing.add_argument("files", nargs="+", help="files of emp/3 records")
    p_ing.add_argument("--data-root", default=os.environ.get("TABHORN_DATA_DIR"))
    p_ing.set_defaults(func=cmd_ingest_demo)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ProgramError, EngineError, IllegalModeError, OracleError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
