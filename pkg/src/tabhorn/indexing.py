"""Compile table_index declarations into executable plans.

A declaration lists index sets over argument positions.  The compiler
derives three things:

* the bound positions of the abstracted call (intersection of all sets;
  the ``0`` marker forces full abstraction),
* a minimum set of argument permutations such that every index set is a
  prefix of one permutation (tries index on argument prefixes), via a
  matching-based minimum chain cover of the sets under inclusion,
* a mode-dispatch list: a call routes to the first permutation whose
  leading position is bound, in declaration order; a call matching no test
  is an illegal mode.
"""

from __future__ import annotations

from dataclasses import dataclass

from .program import ZERO, Clause, TableIndexDecl, comma_join, print_program, Program
from .terms import Struct, Term, Var, VarSource, walk


class IllegalModeError(Exception):
    def __init__(self, pred):
        self.pred = pred
        super().__init__(f"Illegal Mode in call to {pred[0]}/{pred[1]}")


def bound_positions(specs) -> frozenset:
    """Positions that stay bound in the abstracted call: the intersection
    of all index sets, empty as soon as the 0 marker appears."""
    result = None
    for s in specs:
        if s == ZERO:
            return frozenset()
        result = frozenset(s) if result is None else result & frozenset(s)
    return result if result is not None else frozenset()


def _chain_cover(sets: list) -> list:
    """Partition ``sets`` (as frozensets, unique) into a minimum number of
    chains under strict inclusion.

    Standard reduction: maximum bipartite matching on the strict-subset
    DAG; unmatched-successor elements start chains.
    """
    n = len(sets)
    succ = [
        [j for j in range(n) if i != j and sets[i] < sets[j]] for i in range(n)
    ]
    match_right = [-1] * n  # element j's predecessor in its chain
    match_left = [-1] * n  # element i's successor in its chain

    def augment(i, seen):
        for j in succ[i]:
            if seen[j]:
                continue
            seen[j] = True
            if match_right[j] == -1 or augment(match_right[j], seen):
                match_right[j] = i
                match_left[i] = j
                return True
        return False

    for i in range(n):
        augment(i, [False] * n)

    chains = []
    for i in range(n):
        if match_right[i] == -1:  # chain start
            chain = [i]
            while match_left[chain[-1]] != -1:
                chain.append(match_left[chain[-1]])
            chains.append([sets[k] for k in chain])
    return chains


@dataclass(frozen=True)
class IndexPlan:
    pred: tuple  # (name, arity)
    specs: tuple  # declared specs, in order (tuples of positions; ZERO)
    bound: frozenset  # positions kept in the abstracted call
    permutations: tuple  # tuple of position tuples, each a permutation of 1..arity
    assignment: dict  # frozenset(index set) -> permutation ordinal
    dispatch: tuple  # ((test_position | None, permutation ordinal), ...)

    @property
    def arity(self) -> int:
        return self.pred[1]


def permutation_cover(specs, arity: int):
    """Minimal permutations covering all index sets as prefixes.

    Within a permutation, each chain element contributes its new positions
    in ascending order; unconstrained trailing positions follow ascending.
    Returns (permutations, assignment).
    """
    unique = []
    for s in specs:
        if s == ZERO:
            continue
        fs = frozenset(s)
        if fs not in unique:
            unique.append(fs)
    if not unique:
        identity = tuple(range(1, arity + 1))
        return [identity], {}
    chains = _chain_cover(unique)
    permutations = []
    assignment = {}
    for chain in chains:
        chain.sort(key=len)
        order = []
        seen = set()
        for s in chain:
            order.extend(sorted(s - seen))
            seen |= s
        order.extend(sorted(set(range(1, arity + 1)) - seen))
        pid = len(permutations)
        permutations.append(tuple(order))
        for s in chain:
            assignment[s] = pid
    return permutations, assignment


def build_dispatch(specs, assignment, permutations):
    """Dispatch tests in declaration order, collapsed per permutation.

    Each permutation is tested by 'its first position is bound'; the 0
    marker contributes an always-true catch-all routing to the first
    permutation.
    """
    dispatch = []
    routed = set()
    for s in specs:
        if s == ZERO:
            dispatch.append((None, 0))
            routed.add(None)
            continue
        pid = assignment[frozenset(s)]
        if pid in routed:
            continue
        routed.add(pid)
        dispatch.append((permutations[pid][0], pid))
    return tuple(dispatch)


def compile_plan(decl: TableIndexDecl) -> IndexPlan:
    permutations, assignment = permutation_cover(decl.specs, decl.pred[1])
    dispatch = build_dispatch(decl.specs, assignment, permutations)
    return IndexPlan(
        pred=decl.pred,
        specs=tuple(decl.specs),
        bound=bound_positions(decl.specs),
        permutations=tuple(permutations),
        assignment=assignment,
        dispatch=dispatch,
    )


def route_call(goal: Term, plan: IndexPlan, bindings=None) -> int:
    """Permutation ordinal serving this call, per the dispatch tests."""
    args = goal.args if type(goal) is Struct else ()
    for test_pos, pid in plan.dispatch:
        if test_pos is None:
            return pid
        arg = args[test_pos - 1]
        if bindings is not None:
            arg = walk(arg, bindings)
        if type(arg) is not Var:
            return pid
    raise IllegalModeError(plan.pred)


def abstract_call(goal: Term, plan: IndexPlan, source: VarSource):
    """Abstract a call: keep arguments at bound positions, replace all
    others with distinct fresh variables.

    Returns (abstracted goal, residual) where residual pairs each fresh
    variable with the argument it replaced; unifying them filters the
    general table's answers back to the original call.
    """
    route_call(goal, plan)  # raises on illegal mode
    args = goal.args if type(goal) is Struct else ()
    new_args = []
    residual = []
    for pos in range(1, plan.arity + 1):
        arg = args[pos - 1]
        if pos in plan.bound:
            if type(arg) is Var:
                raise IllegalModeError(plan.pred)
            new_args.append(arg)
        else:
            v = source.fresh()
            residual.append((v, arg))
            new_args.append(v)
    abstracted = Struct(plan.pred[0], new_args) if new_args else goal
    return abstracted, residual


# ---------------------------------------------------------------------------
# source transformation

def _perm_pred_name(pred: tuple, perm) -> str:
    if pred[1] <= 9:
        return pred[0] + "".join(map(str, perm))
    return pred[0] + "_" + "_".join(map(str, perm))


def emit_transformed(plan: IndexPlan, clauses, source: VarSource) -> Program:
    """The equivalent tabled program for one plan: a dispatch predicate,
    one subsumptive permutation predicate per covering permutation
    (secondary permutations delegate to the first), and a base predicate
    holding the original clauses."""
    name, arity = plan.pred
    base_name = name + "_base"
    perm_names = [_perm_pred_name(plan.pred, p) for p in plan.permutations]
    prog = Program()

    from .program import TableDecl  # local import to avoid cycle noise

    prog.directives.append(
        TableDecl([(pn, arity) for pn in perm_names], "subsumptive")
    )

    # dispatch clause: p(A1..An) :- test1 -> call1 ; ... ; fallback.
    head_vars = [source.fresh() for _ in range(arity)]
    branches = []
    catch_all = None
    for test_pos, pid in plan.dispatch:
        perm = plan.permutations[pid]
        call = Struct(perm_names[pid], [head_vars[p - 1] for p in perm]) \
            if arity else perm_names[pid]
        if test_pos is None:
            catch_all = call
        else:
            branches.append((Struct("nonvar", (head_vars[test_pos - 1],)), call))
    if catch_all is None:
        catch_all = Struct(
            "table_error", (f"Illegal Mode in call to {name}/{arity}",)
        )
    dispatch_body: Term = catch_all
    for cond, call in reversed(branches):
        dispatch_body = Struct(";", (Struct("->", (cond, call)), dispatch_body))
    dispatch_head = Struct(name, head_vars) if arity else name
    prog.clauses.append(Clause(dispatch_head, [dispatch_body]))

    # permutation predicates
    for pid, perm in enumerate(plan.permutations):
        pvars = [source.fresh() for _ in range(arity)]
        phead = Struct(perm_names[pid], pvars) if arity else perm_names[pid]
        # var checks listed in original-argument order, as the dispatch
        # call site binds them
        inv = {p: i for i, p in enumerate(perm)}  # original pos -> arg slot
        checks = [Struct("var", (pvars[inv[pos]],)) for pos in range(1, arity + 1)]
        if pid == 0:
            open_call = (
                Struct(base_name, [pvars[inv[pos]] for pos in range(1, arity + 1)])
                if arity
                else base_name
            )
        else:
            first = plan.permutations[0]
            open_call = (
                Struct(perm_names[0], [pvars[inv[pos]] for pos in first])
                if arity
                else perm_names[0]
            )
        fresh = [source.fresh() for _ in range(arity)]
        self_call = Struct(perm_names[pid], fresh) if arity else perm_names[pid]
        eqs = [Struct("=", (fresh[i], pvars[i])) for i in range(arity)]
        else_branch = comma_join([self_call] + eqs) if arity else self_call
        cond = comma_join(checks) if checks else "true"
        body = Struct(";", (Struct("->", (cond, open_call)), else_branch))
        prog.clauses.append(Clause(phead, [body]))

    # base predicate: the original clauses, renamed
    for c in clauses:
        if arity:
            assert type(c.head) is Struct
            prog.clauses.append(Clause(Struct(base_name, c.head.args), list(c.body)))
        else:
            prog.clauses.append(Clause(base_name, list(c.body)))
    return prog


def transform_program(prog: Program, source: VarSource) -> Program:
    """Apply emit_transformed to every table_index predicate; everything
    else passes through untouched."""
    plans = {}
    for d in prog.directives:
        if isinstance(d, TableIndexDecl):
            plans[d.pred] = compile_plan(d)
    if not plans:
        raise ValueError("nothing to transform: no table_index directives")
    index = prog.clause_index()
    out = Program()
    for d in prog.directives:
        if not isinstance(d, TableIndexDecl):
            out.directives.append(d)
    for pred, plan in plans.items():
        sub = emit_transformed(plan, index.get(pred, []), source)
        out.extend(sub)
    for c in prog.clauses:
        if c.pred not in plans:
            out.clauses.append(c)
    return out


def transformed_text(prog: Program, source: VarSource) -> str:
    return print_program(transform_program(prog, source))
