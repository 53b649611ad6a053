"""Shared test utilities: loading example programs and comparing traces
modulo variable naming."""

import os
import re

from tabhorn.engine import Engine, TraceConfig
from tabhorn.program import parse_program, parse_query
from tabhorn.terms import VarSource

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
PROGRAMS = os.path.join(ROOT, "programs")
GOLDEN = os.path.join(os.path.dirname(os.path.abspath(__file__)), "golden")

_VAR_TOKEN = re.compile(r"\b_?[A-Z][A-Za-z0-9_]*")

# Delimiters that never occur inside one printed term, machine, or
# suspension; variable numbering restarts after each.
_SEGMENT_SPLIT = re.compile(r"(; |, |:\[|\],\[)")


def normalize_vars(text: str) -> str:
    """Rename variable tokens to _N0.. in first-occurrence order, with the
    numbering scoped per printed item, so traces compare independently of
    fresh-variable identity."""
    out_lines = []
    for line in text.splitlines():
        prefix = ""
        if line.startswith(("S:", "T:")):
            prefix, line = line[:2], line[2:]
        parts = _SEGMENT_SPLIT.split(line)
        normed = []
        for part in parts:
            if _SEGMENT_SPLIT.fullmatch(part):
                normed.append(part)
                continue
            mapping = {}

            def sub(m):
                tok = m.group(0)
                if tok not in mapping:
                    mapping[tok] = f"_N{len(mapping)}"
                return mapping[tok]

            normed.append(_VAR_TOKEN.sub(sub, part))
        out_lines.append(prefix + "".join(normed))
    return "\n".join(out_lines)


def program_path(name: str) -> str:
    return os.path.join(PROGRAMS, f"{name}.pl")


def load_engine(name: str, trace: TraceConfig = None, **kwargs):
    vs = VarSource()
    with open(program_path(name), "r", encoding="utf-8") as fh:
        prog = parse_program(fh.read(), vs)
    return Engine(prog, vs, trace=trace, **kwargs), prog, vs


def load_engine_text(text: str, trace: TraceConfig = None, **kwargs):
    vs = VarSource()
    prog = parse_program(text, vs)
    return Engine(prog, vs, trace=trace, **kwargs), prog, vs


def solve(engine, vs, query_text: str):
    query, names = parse_query(query_text, vs)
    return engine.solve(query, names)


def golden_text(name: str) -> str:
    with open(os.path.join(GOLDEN, name), "r", encoding="utf-8") as fh:
        return fh.read().rstrip("\n")


_LOG_LINE = re.compile(r"^(\d+)( *)(.*?)(?:  +(\S.*))?$")


def parse_log_line(line: str):
    """(number, depth, resolvent, annotation) of one resolution-log line,
    with the resolvent variable-normalized."""
    m = _LOG_LINE.match(line.rstrip())
    assert m, f"unparseable log line: {line!r}"
    number, indent, resolvent, annotation = m.groups()
    depth = len(indent) // 2
    return (int(number), depth, normalize_vars(resolvent), annotation or "")


def compare_logs(mine: list, golden: list):
    assert len(mine) == len(golden), (mine, golden)
    for a, b in zip(mine, golden):
        assert parse_log_line(a) == parse_log_line(b), (a, b)


def derived_clause_events(engine, entry):
    """Unit-resolution view of an evaluation over ``<-``/2 rules: initial
    clauses as their machines start, body-shortening answer consumptions,
    and proven propositions, in engine order."""
    from tabhorn.program import print_term
    from tabhorn.terms import Struct

    def body_text(t):
        return print_term(t, {}, 1000)

    lines = []
    for ev in engine.events:
        if ev[0] == "turn":
            origin = ev[1]
            if (
                origin
                and origin[0] == "clause"
                and origin[3] is not None
                and type(origin[3]) is Struct
                and origin[3].functor == "<-"
            ):
                head, body = origin[3].args
                lines.append(f"{print_term(head)} <- {body_text(body)}")
        elif ev[0] == "new-answer" and ev[1] is entry:
            lines.append(print_term(ev[2].args[0]))
        elif ev[0] == "fork-answer" and ev[1] is entry and ev[3]:
            head = ev[2]
            rest = ev[3]
            lines.append(
                f"{print_term(head.args[0])} <- {body_text(rest[0].args[0])}"
            )
    return lines
