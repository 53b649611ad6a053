"""The least-model oracle: naive and semi-naive iteration, theorem
conditions, and the differential check against the evaluator."""

import random

import pytest

from helpers import load_engine, program_path
from tabhorn.bottomup import (
    OracleError,
    check_theorem1_conditions,
    diff_with_engine,
    iteration_log,
    least_model,
    least_model_seminaive,
)
from tabhorn.engine import Engine
from tabhorn.program import parse_program, parse_query, print_term
from tabhorn.terms import Struct, VarSource

REACH = """
p(X,Y) :- e(X,Y).
p(X,Y) :- p(X,Z),e(Z,Y).
e(a,b).  e(b,c).
e(e,a).  e(c,b).
e(d,e).
"""


def facts(*texts):
    out = set()
    for t in texts:
        term, _ = parse_query(t)
        out.add(term)
    return out


def test_reach_iteration_tags():
    model = least_model(parse_program(REACH))
    tiers = model.by_iteration()
    assert tiers[0] == facts("e(a,b)", "e(b,c)", "e(e,a)", "e(c,b)", "e(d,e)")
    assert tiers[1] == facts("p(a,b)", "p(e,a)", "p(d,e)", "p(b,c)", "p(c,b)")
    assert tiers[2] == facts("p(a,c)", "p(e,b)", "p(d,a)", "p(b,b)", "p(c,c)")
    assert tiers[3] == facts("p(e,c)", "p(d,b)")
    assert tiers[4] == facts("p(d,c)")
    assert len(tiers) == 5


def props_rules():
    with open(program_path("props")) as fh:
        prog = parse_program(fh.read())
    from tabhorn.program import Program

    return Program(
        clauses=[c for c in prog.clauses if c.pred == ("<-", 2)], directives=[]
    )


def test_props_iteration_tags():
    model = least_model(props_rules())
    tiers = model.by_iteration()
    assert tiers == [{"s", "t"}, {"r"}, {"u"}, {"q"}, {"p"}]


def test_empty_program():
    model = least_model(parse_program("p(X) :- q(X)."))
    assert model.facts == set()
    assert model.by_iteration() == [set()]


def test_seminaive_agrees_with_naive():
    for text in (REACH, "a(x). b(Y) :- a(Y). c(Y) :- b(Y), a(Y)."):
        prog = parse_program(text)
        naive = least_model(prog)
        semi = least_model_seminaive(prog)
        assert naive.facts == semi.facts
        assert naive.iteration_tag == semi.iteration_tag
    semi = least_model_seminaive(props_rules())
    assert semi.by_iteration() == [{"s", "t"}, {"r"}, {"u"}, {"q"}, {"p"}]


def test_seminaive_chain_deltas():
    prog = parse_program("b(X) :- a(X). c(X) :- b(X). a(k).")
    model = least_model_seminaive(prog)
    assert model.by_iteration() == [{Struct("a", ("k",))},
                                    {Struct("b", ("k",))},
                                    {Struct("c", ("k",))}]


def test_random_seminaive_agreement():
    rng = random.Random(5)
    for _ in range(30):
        prog = random_datalog(rng)
        naive = least_model(prog)
        semi = least_model_seminaive(prog)
        assert naive.facts == semi.facts
        assert naive.iteration_tag == semi.iteration_tag


def random_datalog(rng, preds=None, nconsts=6, nrules=10, directives=False):
    names = preds or [f"p{i}" for i in range(rng.randint(2, 5))]
    arity = {n: rng.randint(1, 2) for n in names}
    consts = [f"c{i}" for i in range(rng.randint(2, nconsts))]
    lines = []
    for n in names:
        for _ in range(rng.randint(1, 3)):
            args = ",".join(rng.choice(consts) for _ in range(arity[n]))
            lines.append(f"{n}({args}).")
    varnames = ["X", "Y", "Z"]
    for _ in range(rng.randint(1, nrules)):
        head = rng.choice(names)
        body = [rng.choice(names) for _ in range(rng.randint(1, 2))]
        bvars = []
        btexts = []
        for b in body:
            args = [rng.choice(varnames + consts) for _ in range(arity[b])]
            bvars.extend(a for a in args if a in varnames)
            btexts.append(f"{b}({','.join(args)})")
        if not bvars:
            bvars = consts[:1]
        hargs = ",".join(rng.choice(bvars) for _ in range(arity[head]))
        lines.append(f"{head}({hargs}) :- {', '.join(btexts)}.")
    if directives:
        for n in names:
            lines.insert(0, f":- table_index({n}/{arity[n]},[0]).")
    return parse_program("\n".join(lines))


def test_oracle_idempotent():
    prog = parse_program(REACH)
    model = least_model(prog)
    extended = parse_program(
        REACH + "\n".join(print_term(f) + "." for f in model.facts))
    assert least_model(extended).facts == model.facts


def test_range_restriction_enforced():
    with pytest.raises(OracleError):
        least_model(parse_program("p(X) :- q(a).\nq(a)."))


def test_infinite_model_guard():
    with pytest.raises(OracleError):
        least_model(parse_program("n(z). n(s(X)) :- n(X)."), iteration_cap=50)


def test_theorem_conditions_reach():
    report = check_theorem1_conditions(parse_program(REACH), ("p", 2))
    assert report.reachable_ok and report.bodies_ok


def test_theorem_conditions_unreachable():
    prog = parse_program("p(X) :- q(X).\nr(X) :- q(X),p(X).\nq(a).\nq(b).")
    report = check_theorem1_conditions(prog, ("p", 1))
    assert not report.reachable_ok
    assert "r/1" in report.witness


def test_theorem_conditions_unsatisfiable_body():
    prog = parse_program("p(X) :- q(X),r(X),s(X).\nq(a).\nr(b).\ns(c).")
    report = check_theorem1_conditions(prog, ("p", 1))
    assert report.reachable_ok and not report.bodies_ok
    assert "no true instance" in report.witness


def engine_factory(prog):
    return Engine(prog, VarSource(10_000_000))


def test_diff_reach_answers():
    text = ":- table p/2.\n" + REACH
    prog = parse_program(text)
    query, _ = parse_query("p(a,X)", VarSource(500))
    report = diff_with_engine(prog, query, engine_factory)
    assert report.answers_equal
    assert not report.model_checked  # variant tabling is not full abstraction


def test_diff_join_full_model():
    with open(program_path("reach_join")) as fh:
        prog = parse_program(fh.read())
    query, _ = parse_query("p(X,Y)", VarSource(500))
    report = diff_with_engine(prog, query, engine_factory)
    assert report.ok and report.model_checked and report.model_equal
    # thirteen p facts on both sides
    model = least_model(prog)
    assert sum(1 for f in model.facts if f.functor == "p") == 13


def test_diff_skips_model_check_when_unreachable():
    text = (":- table_index(p/1,[0]).\n:- table_index(q/1,[0]).\n"
            ":- table_index(r/1,[0]).\n"
            "p(X) :- q(X).\nr(X) :- q(X),p(X).\nq(a).\nq(b).")
    prog = parse_program(text)
    query, _ = parse_query("p(X)", VarSource(500))
    report = diff_with_engine(prog, query, engine_factory)
    assert report.answers_equal
    assert not report.model_checked


def test_iteration_log_format():
    model = least_model(props_rules())
    text = iteration_log(model)
    lines = text.splitlines()
    assert lines[0] == "Iteration 0: s, t"
    assert lines[4] == "Iteration 4: p"
