"""Evaluator behavior: answers, builtins, dispatch, errors, determinism."""

import os

import pytest

from helpers import load_engine, load_engine_text, program_path, solve
from tabhorn.engine import (
    Engine,
    EngineError,
    ExistenceError,
    InstantiationError,
    StepLimitError,
    TableErrorCall,
    TraceConfig,
)
from tabhorn.indexing import IllegalModeError
from tabhorn.program import parse_program, parse_query, print_term
from tabhorn.terms import Struct, VarSource


def answer_terms(answers):
    return [print_term(a.term) for a in answers]


def test_variant_tabled_reachability():
    eng, _, vs = load_engine("reach_variant")
    assert answer_terms(solve(eng, vs, "p(a,A)")) == ["p(a,b)", "p(a,c)"]


def test_bottom_up_reachability():
    eng, _, vs = load_engine("reach_bottomup")
    answers = solve(eng, vs, "p(a,A)")
    assert [print_term(a.bindings["A"]) for a in answers] == ["b", "c"]
    # the abstracted table holds the whole relation
    assert len(eng.store.entries[0].answers) == 13


def test_join_program_full_tables():
    eng, _, vs = load_engine("reach_join")
    answers = solve(eng, vs, "p(a,X)")
    assert answer_terms(answers) == ["p(a,b)", "p(a,c)"]
    p_entry = eng.store.entries[0]
    assert answer_terms_list(p_entry.answers) == [
        "p(a,b)", "p(e,a)", "p(d,e)", "p(b,c)", "p(c,b)", "p(a,c)", "p(e,b)",
        "p(d,a)", "p(b,b)", "p(c,c)", "p(e,c)", "p(d,b)", "p(d,c)",
    ]


def answer_terms_list(terms):
    return [print_term(t) for t in terms]


def test_tables_persist_across_queries():
    eng, _, vs = load_engine("reach_bottomup", TraceConfig(events=True))
    solve(eng, vs, "p(a,A)")
    tables_before = len(eng.store.entries)
    answers = solve(eng, vs, "p(d,A)")
    assert {print_term(a.bindings["A"]) for a in answers} == {"e", "a", "b", "c"}
    assert len(eng.store.entries) == tables_before  # no new table


def scan_counts(events):
    counts = {}
    for ev in events:
        if ev[0] == "builtin-scan":
            counts[ev[1]] = counts.get(ev[1], 0) + 1
    return counts


def test_corpus_single_tokenization():
    eng, prog, vs = load_engine("corpus_share", TraceConfig(events=True))
    a1 = solve(eng, vs, "share('the cat', S, W)")
    assert {(print_term(a.bindings["S"]), print_term(a.bindings["W"]))
            for a in a1} == {
        ("'the cat sat on the mat'", "the"),
        ("'the cat sat on the mat'", "cat"),
        ("'the dog chased the cat'", "the"),
        ("'the dog chased the cat'", "cat"),
    }
    counts = scan_counts(eng.events)
    corpus = ["the cat sat on the mat", "a dog ate my homework",
              "the dog chased the cat"]
    for sent in corpus:
        assert counts[sent] == 1
    # a second query re-tokenizes only its own input sentence
    solve(eng, vs, "share('my dog', S, W)")
    counts = scan_counts(eng.events)
    for sent in corpus:
        assert counts[sent] == 1


def test_corpus_books_per_book_tables():
    eng, _, vs = load_engine("corpus_books", TraceConfig(events=True))
    solve(eng, vs, "share('the cat', isbn1, S)")
    counts = scan_counts(eng.events)
    assert counts.get("the cat sat on the mat") == 1
    assert "a dog ate my homework" not in counts  # other book untouched
    solve(eng, vs, "share('my dog', isbn2, S)")
    counts = scan_counts(eng.events)
    assert counts.get("a dog ate my homework") == 1
    assert counts.get("the cat sat on the mat") == 1


def test_props_proposition_order():
    eng, _, vs = load_engine("props")
    answers = solve(eng, vs, "interpAtom(p)")
    assert answer_terms(answers) == ["interpAtom(p)"]
    entry = next(e for e in eng.store.entries if e.pred == ("interpAtom", 1))
    assert [print_term(a.args[0]) for a in entry.answers] == \
        ["s", "t", "r", "u", "q", "p"]


def test_tri_meta_small():
    eng, _, vs = load_engine("tri_meta")
    answers = solve(eng, vs, "interp_atom(p1)")
    assert len(answers) == 1
    sub = next(e for e in eng.store.entries if e.pred == ("interp_atoms", 1))
    assert [print_term(a.args[0]) for a in sub.answers] == \
        ["p5", "p4", "p3", "p2", "p1"]


def test_multi_index_dispatch():
    eng, _, vs = load_engine("multi_index")
    answers = solve(eng, vs, "p(a,B,C,D)")
    assert len(answers) == 3
    answers = solve(eng, vs, "p(A,B,C,d)")
    assert {print_term(a.bindings["A"]) for a in answers} == {"a", "b"}


def test_multi_index_illegal_mode():
    eng, _, vs = load_engine("multi_index")
    with pytest.raises(IllegalModeError):
        solve(eng, vs, "p(A,B,C,D)")


def emp_file(tmp_path, name, n, start=0):
    path = tmp_path / name
    lines = [f"emp({i},n{i},addr{i})." for i in range(start, start + n)]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def test_data_records_single_open(tmp_path):
    f1 = emp_file(tmp_path, "emps1.pl", 10)
    eng, _, vs = load_engine("emp_ingest", TraceConfig(events=True))
    a1 = solve(eng, vs, f"emp_data('{f1}', Id, N, A)")
    a2 = solve(eng, vs, f"emp_data('{f1}', 3, N, A)")
    assert len(a1) == 10 and len(a2) == 1
    opens = [ev for ev in eng.events if ev[0] == "file-open"]
    assert len(opens) == 1


def test_data_records_two_files_independent(tmp_path):
    f1 = emp_file(tmp_path, "a.pl", 5)
    f2 = emp_file(tmp_path, "b.pl", 7, start=100)
    eng, _, vs = load_engine("emp_ingest", TraceConfig(events=True))
    a1 = solve(eng, vs, f"emp_data('{f1}', Id, N, A)")
    a2 = solve(eng, vs, f"emp_data('{f2}', Id, N, A)")
    assert len(a1) == 5 and len(a2) == 7
    opens = [ev[1] for ev in eng.events if ev[0] == "file-open"]
    assert opens == [f1, f2]
    preds = [e.goal.args[0] for e in eng.store.entries]
    assert preds == [f1, f2]


def test_data_records_missing_file():
    eng, _, vs = load_engine("emp_ingest")
    with pytest.raises(EngineError):
        solve(eng, vs, "emp_data('no_such_file.pl', Id, N, A)")


def test_data_records_csv(tmp_path):
    path = tmp_path / "rows.csv"
    path.write_text("1,alice\n2,bob\n")
    eng, _, vs = load_engine_text(
        "rows(F,Id,Name) :- data_records(F,csv(row),row(Id,Name)).")
    answers = solve(eng, vs, f"rows('{path}', Id, Name)")
    assert [(a.bindings["Id"], print_term(a.bindings["Name"]))
            for a in answers] == [(1, "alice"), (2, "bob")]


def test_scan_builtin():
    eng, _, vs = load_engine_text("words(S,L) :- scan(S,L).")
    answers = solve(eng, vs, "words('b c b', L)")
    assert print_term(answers[0].bindings["L"]) == "[b,c,b]"


def test_scan_requires_bound_atom():
    eng, _, vs = load_engine_text("w(L) :- scan(X,L).")
    with pytest.raises(InstantiationError):
        solve(eng, vs, "w(L)")


def test_unify_builtin_and_true():
    eng, _, vs = load_engine_text("eq(X,Y) :- true, X = Y.")
    answers = solve(eng, vs, "eq(a,Z)")
    assert print_term(answers[0].bindings["Z"]) == "a"
    assert solve(eng, vs, "eq(a,b)") == []


def test_cut_prunes_later_clauses():
    text = """
first(X) :- !, X = one.
first(two).
both(X) :- X = one.
both(two).
"""
    eng, _, vs = load_engine_text(text)
    assert [print_term(a.bindings["X"]) for a in solve(eng, vs, "first(X)")] \
        == ["one"]
    assert [print_term(a.bindings["X"]) for a in solve(eng, vs, "both(X)")] \
        == ["one", "two"]


def test_if_then_else():
    text = "pick(X,Y) :- (nonvar(X) -> Y = bound ; Y = free)."
    eng, _, vs = load_engine_text(text)
    assert print_term(solve(eng, vs, "pick(a,Y)")[0].bindings["Y"]) == "bound"
    assert print_term(solve(eng, vs, "pick(_,Y)")[0].bindings["Y"]) == "free"


def test_unsupported_condition():
    eng, _, vs = load_engine_text("odd(X) :- (q(X) -> true ; true).\nq(a).")
    with pytest.raises(EngineError):
        solve(eng, vs, "odd(a)")


def test_disjunction_forks_both():
    eng, _, vs = load_engine_text("d(X) :- (X = l ; X = r).")
    assert [print_term(a.bindings["X"]) for a in solve(eng, vs, "d(X)")] \
        == ["l", "r"]


def test_table_error_builtin():
    eng, _, vs = load_engine_text("boom :- table_error('broken mode').")
    with pytest.raises(TableErrorCall):
        solve(eng, vs, "boom")


def test_existence_error():
    eng, _, vs = load_engine_text("p(X) :- missing(X).")
    with pytest.raises(ExistenceError):
        solve(eng, vs, "p(X)")


def test_tabled_predicate_without_clauses_is_empty():
    eng, _, vs = load_engine_text(":- table q/1.\np(X) :- q(X).\np(a).")
    assert answer_terms(solve(eng, vs, "p(X)")) == ["p(a)"]


def test_step_limit():
    text = ":- table_index(n/1,[0]).\nn(z).\nn(s(X)) :- n(X)."
    eng, _, vs = load_engine_text(text)
    eng.step_limit = 500
    with pytest.raises(StepLimitError):
        solve(eng, vs, "n(X)")


def test_step_single_action():
    eng, _, vs = load_engine("reach_join")
    query, names = parse_query("p(a,X)", vs)
    eng._query_goal = query
    eng._query_names = names
    from tabhorn.engine import Machine, QUERY_SINK
    eng._push_block([Machine(query, (query,), QUERY_SINK,
                             origin=("query",), root=True)])
    assert eng.step() is True
    assert len(eng.store.entries) == 1  # entry created, query suspended
    assert len(eng.stack) == 2  # one machine per rule
    assert len(eng.store.entries[0].suspensions) == 1


def test_determinism_trace_bytes():
    def run_once():
        eng, _, vs = load_engine("reach_join", TraceConfig(machines=True))
        solve(eng, vs, "p(a,X)")
        return "\n\n".join(eng.machine_blocks)

    assert run_once() == run_once()


def test_streaming_answers():
    got = []
    vs = VarSource()
    with open(program_path("reach_bottomup")) as fh:
        prog = parse_program(fh.read(), vs)
    eng = Engine(prog, vs, stream=got.append)
    query, names = parse_query("p(a,A)", vs)
    answers = eng.solve(query, names)
    assert [print_term(a.term) for a in got] == ["p(a,b)", "p(a,c)"]
    assert [print_term(a.term) for a in answers] == ["p(a,b)", "p(a,c)"]


def test_meta_variable_body_goal():
    eng, _, vs = load_engine_text("call_it(G) :- G.\nq(a).")
    answers = solve(eng, vs, "call_it(q(X))")
    assert len(answers) == 1


def test_mixed_policies_coexist():
    # a variant table and a subsumptive table in one program
    eng, _, vs = load_engine("tri_meta")
    solve(eng, vs, "interp_atom(p1)")
    policies = {e.pred: e.policy for e in eng.store.entries}
    assert policies[("interp_atom", 1)] == "variant"
    assert policies[("interp_atoms", 1)] == "subsumptive"
