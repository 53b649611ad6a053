"""Independent least-model evaluator used as a differential-testing oracle.

Naive and semi-naive bottom-up iteration over rule instances, grounded by
nested joins against the current fact set.  Deliberately simple: this side
of any comparison must be trusted, so correctness beats speed throughout.

Propositional programs written as ``Head <- Body`` facts are evaluated
directly by reading each such fact as a rule (``Body = true`` makes it a
fact), independently of the meta-interpreters the evaluator runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .program import Clause, Program, flatten_comma, print_term
from .terms import (
    Struct,
    Term,
    Var,
    apply_subst,
    is_ground,
    term_vars,
    unify,
)


class OracleError(Exception):
    pass


@dataclass
class FactSet:
    facts: set = field(default_factory=set)
    iteration_tag: dict = field(default_factory=dict)

    def by_iteration(self) -> list:
        """Fact sets per iteration index, 0-based."""
        if not self.facts:
            return [set()]
        top = max(self.iteration_tag.values())
        out = [set() for _ in range(top + 1)]
        for f, i in self.iteration_tag.items():
            out[i].add(f)
        return out


def _as_rules(program: Program) -> list:
    """Clauses of the program, with ``H <- B`` facts read as rules."""
    rules = []
    for c in program.clauses:
        head = c.head
        if (
            not c.body
            and type(head) is Struct
            and head.functor == "<-"
            and len(head.args) == 2
        ):
            h, b = head.args
            body = [] if b == "true" else flatten_comma(b)
            rules.append(Clause(h, body))
        else:
            rules.append(c)
    return rules


def _check_range_restricted(rules) -> None:
    for r in rules:
        head_vars = {v.id for v in term_vars(r.head)}
        body_vars = set()
        for g in r.body:
            body_vars |= {v.id for v in term_vars(g)}
        if not head_vars <= body_vars:
            raise OracleError(
                f"rule not range-restricted: {print_term(r.head)} has head "
                "variables that never occur in its body"
            )


def _join_instances(body, facts):
    """All substitutions grounding ``body`` against ``facts``, by nested
    joins left to right."""
    subs = [{}]
    for goal in body:
        nxt = []
        for s in subs:
            g = apply_subst(goal, s)
            for f in facts:
                theta = unify(g, f, s)
                if theta is not None:
                    nxt.append(theta)
        subs = nxt
        if not subs:
            break
    return subs


def least_model(program: Program, iteration_cap: int = 10 ** 5) -> FactSet:
    """The least Herbrand model with iteration tags from naive iteration.

    A fact's tag is the first iteration at which it becomes derivable using
    facts of strictly earlier iterations; program facts are iteration 0.
    """
    rules = _as_rules(program)
    _check_range_restricted(rules)
    out = FactSet()
    for r in rules:
        if not r.body:
            if not is_ground(r.head):
                raise OracleError(
                    f"non-ground fact {print_term(r.head)} has infinite least model"
                )
            if r.head not in out.facts:
                out.facts.add(r.head)
                out.iteration_tag[r.head] = 0
    iteration = 0
    while True:
        iteration += 1
        if iteration > iteration_cap:
            raise OracleError(f"iteration cap {iteration_cap} exceeded")
        new = set()
        for r in rules:
            if not r.body:
                continue
            for s in _join_instances(r.body, out.facts):
                h = apply_subst(r.head, s)
                if h not in out.facts:
                    new.add(h)
        if not new:
            return out
        for f in new:
            out.facts.add(f)
            out.iteration_tag[f] = iteration


def seminaive_step(program: Program, total: FactSet, delta: FactSet) -> FactSet:
    """One semi-naive round: facts derivable by instances using at least one
    delta fact, minus what is already known."""
    rules = _as_rules(program)
    new = FactSet()
    for r in rules:
        if not r.body:
            continue
        n = len(r.body)
        for pivot in range(n):
            # pivot literal matches a delta fact; literals before it join
            # against older facts only, avoiding rederivation
            older = total.facts - delta.facts
            subs = _join_instances(r.body[:pivot], older)
            pivoted = []
            for s in subs:
                g = apply_subst(r.body[pivot], s)
                for f in delta.facts:
                    theta = unify(g, f, s)
                    if theta is not None:
                        pivoted.append(theta)
            for s in pivoted:
                for s2 in _join_instances(r.body[pivot + 1:], total.facts):
                    merged = dict(s)
                    ok = True
                    for k, v in s2.items():
                        if k in merged and merged[k] != v:
                            ok = False
                            break
                        merged[k] = v
                    if not ok:
                        continue
                    h = apply_subst(r.head, merged)
                    if is_ground(h) and h not in total.facts:
                        new.facts.add(h)
    return new


def least_model_seminaive(program: Program, iteration_cap: int = 10 ** 5) -> FactSet:
    """Least model via semi-naive iteration; agrees with ``least_model`` on
    both the fact set and the iteration tags."""
    rules = _as_rules(program)
    _check_range_restricted(rules)
    out = FactSet()
    delta = FactSet()
    for r in rules:
        if not r.body:
            if r.head not in out.facts:
                out.facts.add(r.head)
                out.iteration_tag[r.head] = 0
                delta.facts.add(r.head)
    iteration = 0
    while delta.facts:
        iteration += 1
        if iteration > iteration_cap:
            raise OracleError(f"iteration cap {iteration_cap} exceeded")
        new = seminaive_step(program, out, delta)
        for f in new.facts:
            out.facts.add(f)
            out.iteration_tag[f] = iteration
        delta = new
    return out


# ---------------------------------------------------------------------------
# Conditions under which fully-abstracted evaluation covers the least model

@dataclass
class Theorem1Report:
    reachable_ok: bool
    bodies_ok: bool
    witness: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.reachable_ok and self.bodies_ok


def _pred_of(t: Term):
    if type(t) is Struct:
        return (t.functor, len(t.args))
    if type(t) is str:
        return (t, 0)
    return None


def check_theorem1_conditions(program: Program, query_pred,
                              model: Optional[FactSet] = None) -> Theorem1Report:
    """Checks that (a) every predicate is reachable from the query predicate
    in the call graph and (b) every rule body has a true instance in the
    least model.  When both hold, fully-abstracted tabled evaluation of the
    query predicate computes exactly the least model."""
    rules = _as_rules(program)
    graph: dict = {}
    preds = set()
    for r in rules:
        hp = _pred_of(r.head)
        preds.add(hp)
        graph.setdefault(hp, set())
        for g in r.body:
            gp = _pred_of(g)
            if gp is not None:
                preds.add(gp)
                graph[hp].add(gp)
    reached = set()
    frontier = [query_pred]
    while frontier:
        p = frontier.pop()
        if p in reached:
            continue
        reached.add(p)
        frontier.extend(graph.get(p, ()))
    unreachable = sorted(preds - reached)
    reachable_ok = not unreachable
    witness = None
    if not reachable_ok:
        name, arity = unreachable[0]
        witness = f"predicate {name}/{arity} unreachable from {query_pred[0]}/{query_pred[1]}"

    if model is None:
        model = least_model(program)
    bodies_ok = True
    for r in rules:
        if not r.body:
            continue
        if not _join_instances(r.body, model.facts):
            bodies_ok = False
            if witness is None:
                body = ",".join(print_term(g) for g in r.body)
                witness = f"rule body {body} has no true instance in the least model"
            break
    return Theorem1Report(reachable_ok, bodies_ok, witness)


# ---------------------------------------------------------------------------
# Differential comparison with the evaluator

@dataclass
class DiffReport:
    answers_equal: bool
    model_checked: bool
    model_equal: bool
    witness: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.answers_equal and (not self.model_checked or self.model_equal)


def _fully_abstracted(program: Program, query: Term) -> bool:
    """True when every program predicate sits behind a table_index plan
    with no bound positions and the query itself is fully open, so all
    table answers together should rebuild the least model."""
    from .indexing import bound_positions
    from .program import TableIndexDecl

    plans = {}
    for d in program.directives:
        if isinstance(d, TableIndexDecl):
            plans[d.pred] = bound_positions(d.specs)
    heads = {_pred_of(r.head) for r in _as_rules(program)}
    for pred in heads:
        if plans.get(pred) != frozenset():
            return False
    qvars = term_vars(query)
    qargs = query.args if type(query) is Struct else ()
    return len(qvars) == len(qargs) == len({v.id for v in qvars})


def diff_with_engine(program: Program, query: Term, engine_factory) -> DiffReport:
    """Compare evaluator answers against the least model.

    ``engine_factory`` builds a fresh engine for the program (kept abstract
    so this module stays independent of the evaluator).  Two checks:

    * the evaluator's answers for the query must equal the least-model facts
      unifying with it, always;
    * when the program runs fully abstracted and the theorem conditions hold
      for the query predicate, the union of all table answers must equal the
      entire least model.
    """
    oracle_program = Program(clauses=list(program.clauses), directives=[])
    model = least_model(oracle_program)
    engine = engine_factory(program)
    answers = engine.solve(query)
    got = {a.term for a in answers}
    want = set()
    for f in model.facts:
        if _pred_of(f) == _pred_of(query) and unify(query, f) is not None:
            want.add(f)
    witness = None
    answers_equal = got == want
    if not answers_equal:
        missing = want - got
        extra = got - want
        sample = next(iter(missing or extra))
        kind = "missing" if missing else "extra"
        witness = f"{kind} answer {print_term(sample)}"

    report = check_theorem1_conditions(program, _pred_of(query), model)
    model_checked = report.ok and _fully_abstracted(program, query)
    model_equal = True
    if model_checked:
        table_union = set()
        for entry in engine.store.entries:
            for a in entry.answers:
                if is_ground(a):
                    table_union.add(a)
        model_equal = table_union == model.facts
        if not model_equal and witness is None:
            missing = model.facts - table_union
            extra = table_union - model.facts
            sample = next(iter(missing or extra))
            kind = "missing from tables" if missing else "extra in tables"
            witness = f"{kind}: {print_term(sample)}"
    return DiffReport(answers_equal, model_checked, model_equal, witness)


def iteration_log(model: FactSet, order_hint: Optional[list] = None) -> str:
    """Render per-iteration fact sets, one line per iteration."""
    lines = []
    for i, facts in enumerate(model.by_iteration()):
        ordered = sorted(facts, key=print_term)
        if order_hint:
            ordered = [f for f in order_hint if f in facts]
            ordered += sorted(facts - set(ordered), key=print_term)
        lines.append(f"Iteration {i}: " + ", ".join(print_term(f) for f in ordered))
    return "\n".join(lines)
