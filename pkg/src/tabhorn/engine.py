"""The multiple-machine evaluator.

Evaluation state is a set of machines ``H <- B1,...,Bk``: a machine about to
call B1, then B2..Bk, and finally return the instance H as an answer.  A
machine calling a tabled goal suspends on the goal's table entry (creating it,
and forking one producer machine per clause, if absent); a machine whose body
empties appends its head instance to its entry's answer list; a machine that
fails disappears.  Suspended consumers are woken by forking one copy per
unconsumed unifying answer.

The scheduling discipline is deterministic and fixes every trace byte:

* Runnable machines live on a stack; a forked block is pushed so its first
  machine runs first (clause order / answer order).
* A suspension is *pending* while its cursor trails its entry's answer list.
  Waking is preferred over running machines, but a pending suspension is held
  back while some stacked machine is still working toward the same table: a
  machine about to return an answer to entry E blocks E outright, and a
  machine whose next call (tracing through non-tabled predicates) would hit
  E blocks E's already-suspended consumers.
* A suspension registered against an entry that already holds answers is
  *born pending*: it catches up at once, newest first; only direct work
  toward its entry defers it.
* Consumers that gain answers by later insertions are woken in phases: a
  phase freezes the set of pending consumers and serves them newest
  registration first, stalling while the member at hand is blocked;
  consumers pended during a phase wait for the next one.  Each pick consumes
  every pending answer at once, forking one machine per unifying answer.
* The top-level query's own suspension never participates: its answers are
  read off the finished table (or streamed on request).

Picks push their forks immediately, so across one wake phase the forks of
older consumers land nearer the stack top and run first.  Machines carry
fully substituted terms; forking applies the unifier to the continuation,
so there is no shared binding environment to undo.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .indexing import IllegalModeError, IndexPlan, abstract_call, compile_plan, route_call
from .program import (
    BUILTIN_PREDS,
    Clause,
    Program,
    TableDecl,
    TableIndexDecl,
    canonical_names,
    flatten_comma,
    parse_program,
    print_item,
    print_term,
)
from .tables import (
    Suspension,
    TableEntry,
    TableStore,
    format_store,
    insert_answer,
    pending_answers,
    register_suspension,
)
from .terms import (
    Struct,
    Term,
    Var,
    VarSource,
    apply_subst,
    flatten_tokens,
    functor_of,
    is_ground,
    rename_term,
    term_vars,
    unify,
    unify_into,
    walk,
)


class EngineError(Exception):
    """Base class for evaluation errors (exit code 2 in the CLI)."""


class ExistenceError(EngineError):
    def __init__(self, pred):
        super().__init__(f"undefined predicate {pred[0]}/{pred[1]}")


class InstantiationError(EngineError):
    pass


class StepLimitError(EngineError):
    pass


class TableErrorCall(EngineError):
    """Raised by the table_error/1 builtin."""


QUERY_SINK = object()  # answer target of the top-level query


class Machine:
    __slots__ = ("head", "body", "target", "origin", "group", "depth", "line",
                 "root", "block_d", "block_t")

    def __init__(self, head, body, target, origin=None, group=None, depth=0,
                 root=False):
        self.head = head
        self.body = body  # tuple of goals, fully substituted
        self.target = target  # TableEntry | QUERY_SINK
        self.origin = origin
        self.group = group  # cut scope id
        self.depth = depth
        self.line = 0
        self.root = root
        self.block_d = ()
        self.block_t = ()


def format_machine_state(m: Machine) -> str:
    items = ([] if m.root or m.head is None else [m.head]) + list(m.body)
    names = canonical_names(items)
    body = ",".join(print_term(g, names, 999) for g in m.body)
    if m.root or m.head is None:
        return f"<-{body}"
    return f"{print_term(m.head, names, 1199)}<-{body}"


def _ordinal_word(n: int) -> str:
    if 10 <= n % 100 <= 20:
        suffix = "th"
    else:
        suffix = {1: "st", 2: "nd", 3: "rd"}.get(n % 10, "th")
    return f"{n}{suffix}"


@dataclass
class Answer:
    term: Term
    bindings: dict  # variable name -> Term
    ordinal: int


@dataclass
class TraceConfig:
    log: bool = False
    machines: bool = False
    events: bool = False


class Engine:
    """One evaluation context: a program plus its persistent table store.

    Repeated ``solve`` calls share the store, so tables built for one query
    directly serve later ones.
    """

    def __init__(self, program: Program, varsource: Optional[VarSource] = None,
                 step_limit: int = 10 ** 8, trace: Optional[TraceConfig] = None,
                 data_root: Optional[str] = None,
                 stream: Optional[Callable[[Answer], None]] = None):
        self.program = program
        self.vs = varsource or VarSource(1_000_000)
        self.clauses = program.clause_index()
        self.step_limit = step_limit
        self.data_root = data_root
        self.stream = stream
        self.trace = trace or TraceConfig()
        need_events = self.trace.events or self.trace.log or self.trace.machines
        self.events: Optional[list] = [] if need_events else None
        self.log_lines: list = []
        self.machine_blocks: list = []

        self.policies: dict = {}
        for d in program.directives:
            if isinstance(d, TableDecl):
                for pred in d.preds:
                    self.policies[pred] = d.policy
            elif isinstance(d, TableIndexDecl):
                self.policies[d.pred] = compile_plan(d)

        self.store = TableStore()
        self.stack: list = []
        self.born_pends: list = []  # registration order; serviced newest first
        self.pend_pool: list = []  # insert-pended, awaiting the next phase
        self.pool_preds: dict = {}  # pred -> count of pooled suspensions
        self.phase_members: list = []  # frozen, newest registration first
        self.phase_idx = 0
        self.phase_horizons: dict = {}  # entry ordinal -> answer count at start
        self.block_d: dict = {}
        self.block_t: dict = {}
        self.reach = self._compute_reach()
        self.steps = 0
        self._reg_counter = 0
        self._group_counter = 0
        self._wake_phase = 0
        self._last_was_pick = False
        self._last_key = None
        self._log_next = 1
        self._query_goal: Optional[Term] = None
        self._query_names: dict = {}
        self._query_susp: Optional[Suspension] = None
        self._query_returns: list = []

    # -- static analysis ----------------------------------------------------

    def _body_preds(self, goals):
        preds = []
        stack = list(goals)
        while stack:
            g = stack.pop()
            if type(g) is Struct and g.functor in (",", ";", "->") and len(g.args) == 2:
                stack.extend(g.args)
                continue
            if type(g) is Var or type(g) is int:
                continue
            pred = functor_of(g)
            if pred not in BUILTIN_PREDS:
                preds.append(pred)
        return preds

    def _compute_reach(self) -> dict:
        """reach[p]: tabled predicates a call to p can hit without passing
        through another table (closure over non-tabled clause bodies)."""
        preds = set(self.clauses) | set(self.policies)
        reach = {p: ({p} if p in self.policies else set()) for p in preds}
        changed = True
        while changed:
            changed = False
            for p in preds:
                if p in self.policies:
                    continue
                acc = reach[p]
                before = len(acc)
                for c in self.clauses.get(p, ()):
                    for q in self._body_preds(c.body):
                        acc |= reach.get(q, set())
                if len(acc) != before:
                    changed = True
        return reach

    def _machine_blocks(self, m: Machine):
        """(direct, transitive) predicate block sets contributed by m while
        it sits on the stack."""
        if not m.body:
            if isinstance(m.target, TableEntry):
                pred = m.target.pred
                return (pred,), (pred,)
            return (), ()
        direct = []
        trans = set()
        for pred in self._body_preds((m.body[0],)):
            if pred in self.policies:
                direct.append(pred)
                trans.add(pred)
            else:
                trans |= self.reach.get(pred, set())
        return tuple(direct), tuple(trans)

    # -- stack bookkeeping ----------------------------------------------------

    def _push_block(self, machines):
        for m in machines:
            m.block_d, m.block_t = self._machine_blocks(m)
        for m in reversed(machines):
            self.stack.append(m)
            for p in m.block_d:
                self.block_d[p] = self.block_d.get(p, 0) + 1
            for p in m.block_t:
                self.block_t[p] = self.block_t.get(p, 0) + 1

    def _unblock(self, m: Machine):
        for p in m.block_d:
            self.block_d[p] -= 1
        for p in m.block_t:
            self.block_t[p] -= 1

    # -- tracing ---------------------------------------------------------------

    def _event(self, *ev):
        if self.events is not None:
            self.events.append(ev)

    def _snapshot(self) -> str:
        items = "; ".join(format_machine_state(m) for m in reversed(self.stack))
        s_line = f"S: {items}" if items else "S:"
        return s_line + "\n" + format_store(self.store)

    def _boundary(self, key, pre_snapshot):
        if self.trace.machines and key != self._last_key:
            self.machine_blocks.append(pre_snapshot)
        self._last_key = key

    def _display_names(self, items) -> dict:
        names = canonical_names(items)
        for name, var in self._query_names.items():
            if var.id in names:
                names[var.id] = name
        return names

    def _emit_log(self, m: Machine, outcome: Optional[str]):
        names = self._display_names(m.body)
        body = ",".join(print_term(g, names, 999) for g in m.body)
        text = body if m.body else "()"
        if not m.body:
            goal = None
            if isinstance(m.target, TableEntry):
                goal = m.target.goal
            elif m.target is QUERY_SINK:
                goal = self._query_goal
            if goal is not None:
                binding = self._binding_text(goal, m.head)
                if binding:
                    text = f"() {binding}"
        prov = self._provenance(m)
        parts = [p for p in (prov, outcome) if p]
        prefix = f"{m.line}{'  ' * m.depth} {text}"
        line = f"{prefix:<24}{', '.join(parts)}" if parts else prefix
        self.log_lines.append(line.rstrip())

    def _binding_text(self, goal, instance) -> str:
        theta = unify(goal, instance)
        if theta is None:
            return ""
        names = {v.id: self._display_name(v) for v in term_vars(goal)}
        parts = []
        for v in term_vars(goal):
            val = apply_subst(v, theta)
            if val != v:
                parts.append(f"{names[v.id]}={print_term(val, names)}")
        return ",".join(parts)

    def _display_name(self, v: Var) -> str:
        for name, qv in self._query_names.items():
            if qv.id == v.id:
                return name
        return f"_G{v.id}"

    def _provenance(self, m: Machine) -> Optional[str]:
        o = m.origin
        if not o:
            return None
        if o[0] == "clause":
            _, parent_line, idx, head_inst, is_fact = o
            if is_fact and head_inst is not None:
                return f"resolve {parent_line} with fact {print_item(head_inst)}"
            return f"resolve {parent_line} with {_ordinal_word(idx + 1)} rule"
        if o[0] == "answer":
            _, parent_line, ans = o
            return f"resolve {parent_line} with answer {print_item(ans)} from table"
        return None

    # -- the scheduler -----------------------------------------------------------

    def _bump(self):
        self.steps += 1
        if self.steps > self.step_limit:
            raise StepLimitError(f"step limit {self.step_limit} exceeded")

    def _pend(self, entry: TableEntry, susp: Suspension, born: bool):
        if susp.pended:
            return
        if susp.target is QUERY_SINK and susp.head is None and self.stream is None:
            return  # the top-level query waits for quiescence
        susp.pended = True
        if born:
            self.born_pends.append(susp)
        else:
            self.pend_pool.append(susp)
            pred = susp.entry.pred
            self.pool_preds[pred] = self.pool_preds.get(pred, 0) + 1

    def _unpool(self, susp: Suspension):
        self.pool_preds[susp.entry.pred] -= 1

    def _pick(self):
        """Next suspension to wake, or None (run a machine instead).

        Born catch-ups first, newest registration first, held back only by
        direct work toward their entry.  Then the active wake phase, whose
        frozen members are served newest first and stall while blocked.
        A new phase starts once some pooled consumer is unblocked.
        """
        for i in range(len(self.born_pends) - 1, -1, -1):
            susp = self.born_pends[i]
            if self.block_d.get(susp.entry.pred, 0) == 0:
                del self.born_pends[i]
                return susp, None
        if self.phase_idx < len(self.phase_members):
            susp = self.phase_members[self.phase_idx]
            pred = susp.entry.pred
            if self.block_d.get(pred, 0) > 0 or self.block_t.get(pred, 0) > 0:
                return None  # phase stalls; machines run
            self.phase_idx += 1
            return susp, self.phase_horizons.get(susp.entry.ordinal)
        if self.pend_pool:
            for pred, count in self.pool_preds.items():
                if count > 0 and self.block_d.get(pred, 0) == 0 \
                        and self.block_t.get(pred, 0) == 0:
                    break
            else:
                return None
            members = sorted(self.pend_pool, key=lambda s: -s.reg_id)
            for s in members:
                self._unpool(s)
            self.pend_pool = []
            self.phase_members = members
            self.phase_idx = 0
            self.phase_horizons = {
                s.entry.ordinal: len(s.entry.answers) for s in members
            }
            return self._pick()
        return None

    def _wake(self, susp: Suspension, horizon=None):
        entry: TableEntry = susp.entry
        susp.pended = False
        matches = pending_answers(entry, susp, horizon)
        if susp.target is QUERY_SINK and susp.head is None:
            if self.stream is not None:
                for ordinal, theta in matches:
                    self.stream(self._answer_record(ordinal, theta))
        else:
            forks = []
            for ordinal, theta in matches:
                ans = entry.answers[ordinal]
                head = apply_subst(susp.head, theta) if susp.head is not None else None
                body = tuple(apply_subst(g, theta) for g in susp.rest)
                self._event("fork-answer", entry, susp.head, susp.rest, ans)
                forks.append(Machine(head, body, susp.target,
                                     origin=("answer", susp.line_no, ans),
                                     depth=susp.depth + 1))
            self._push_block(forks)
        if susp.cursor < len(entry.answers):
            self._pend(entry, susp, born=False)

    def step(self) -> bool:
        """Perform exactly one scheduling action; False at quiescence."""
        picked = self._pick()
        if picked is not None:
            self._bump()
            if not self._last_was_pick:
                self._wake_phase += 1
            self._last_was_pick = True
            pre = self._snapshot() if self.trace.machines else None
            self._boundary(("wake", self._wake_phase), pre)
            self._wake(*picked)
            return True
        if self.stack:
            self._bump()
            self._last_was_pick = False
            pre = self._snapshot() if self.trace.machines else None
            m = self.stack.pop()
            self._unblock(m)
            key = self._turn(m)
            self._boundary(key, pre)
            return True
        return False

    def _run(self):
        while self.step():
            pass
        if self.trace.machines:
            self.machine_blocks.append(self._snapshot())

    # -- one machine turn -----------------------------------------------------------

    def _turn(self, m: Machine):
        if self.trace.log:
            m.line = self._log_next
            self._log_next += 1
        if self.events is not None:
            self._event("turn", m.origin, m.head, m.body)
        bindings: dict = {}
        body = list(m.body)
        i = 0
        outcome = None
        key = ("fail",)
        while True:
            if i >= len(body):
                key, outcome = self._return_answer(m, bindings)
                break
            g = apply_subst(body[i], bindings) if bindings else body[i]
            if type(g) is Var:
                raise InstantiationError("unbound goal in clause body")
            if type(g) is int:
                raise EngineError(f"cannot call integer {g}")
            pred = functor_of(g)
            if pred == ("true", 0):
                i += 1
                continue
            if pred == ("!", 0):
                self._cut(m)
                i += 1
                continue
            if pred == ("=", 2):
                if unify_into(g.args[0], g.args[1], bindings):
                    i += 1
                    continue
                break
            if pred == ("var", 1):
                if type(walk(g.args[0], bindings)) is Var:
                    i += 1
                    continue
                break
            if pred == ("nonvar", 1):
                if type(walk(g.args[0], bindings)) is not Var:
                    i += 1
                    continue
                break
            if pred == (";", 2):
                left, right = g.args
                if type(left) is Struct and left.functor == "->" and len(left.args) == 2:
                    cond, then = left.args
                    trial = dict(bindings)
                    if self._eval_condition(cond, trial):
                        bindings = trial
                        body[i:i + 1] = flatten_comma(then)
                    else:
                        body[i:i + 1] = flatten_comma(right)
                    continue
                key = self._fork_disjunction(m, g, bindings, body[i + 1:])
                break
            if pred == ("->", 2):
                cond, then = g.args
                trial = dict(bindings)
                if self._eval_condition(cond, trial):
                    bindings = trial
                    body[i:i + 1] = flatten_comma(then)
                    continue
                break
            if pred == ("scan", 2):
                if not self._builtin_scan(g, bindings):
                    break
                i += 1
                continue
            if pred == ("table_error", 1):
                self._event("illegal-mode", walk(g.args[0], bindings))
                raise TableErrorCall(print_term(walk(g.args[0], bindings)))
            if pred == ("data_records", 3):
                key = self._builtin_data_records(m, g, bindings, body[i + 1:])
                break
            key, outcome = self._call_user(m, g, pred, bindings, body[i + 1:])
            break
        if self.trace.log:
            self._emit_log(m, outcome)
        return key

    def _eval_condition(self, cond: Term, bindings: dict) -> bool:
        """If-then-else conditions are restricted to conjunctions of
        true/0, var/1, nonvar/1 and =/2 (all the generated code needs)."""
        for g in flatten_comma(cond):
            g = apply_subst(g, bindings)
            pred = functor_of(g) if type(g) in (Struct, str) else None
            if pred == ("true", 0):
                continue
            if pred == ("var", 1):
                if type(walk(g.args[0], bindings)) is not Var:
                    return False
                continue
            if pred == ("nonvar", 1):
                if type(walk(g.args[0], bindings)) is Var:
                    return False
                continue
            if pred == ("=", 2):
                if not unify_into(g.args[0], g.args[1], bindings):
                    return False
                continue
            raise EngineError(
                f"unsupported if-then-else condition {print_item(g)}"
            )
        return True

    def _cut(self, m: Machine):
        if m.group is None:
            return
        survivors = []
        for x in self.stack:
            if x.group == m.group:
                self._unblock(x)
            else:
                survivors.append(x)
        self.stack = survivors

    def _fork_disjunction(self, m, g, bindings, rest):
        forks = []
        for branch in g.args:
            body = tuple(apply_subst(x, bindings)
                         for x in flatten_comma(branch) + list(rest))
            head = apply_subst(m.head, bindings) if m.head is not None else None
            forks.append(Machine(head, body, m.target, origin=m.origin,
                                 group=m.group, depth=m.depth))
        self._push_block(forks)
        return ("sld", (";", 2))

    def _builtin_scan(self, g, bindings) -> bool:
        text = walk(g.args[0], bindings)
        if type(text) is Var:
            raise InstantiationError("scan/2: first argument must be bound")
        if type(text) is not str:
            raise EngineError("scan/2: first argument must be an atom")
        self._event("builtin-scan", text)
        lst: Term = "[]"
        for w in reversed(text.split()):
            lst = Struct(".", (w, lst))
        return unify_into(g.args[1], lst, bindings)

    def _read_records(self, filename: str, fmt: Term) -> list:
        import os

        path = filename
        if self.data_root and not os.path.isabs(path):
            path = os.path.join(self.data_root, path)
        self._event("file-open", filename)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise EngineError(f"cannot read data file {filename}: {exc}") from exc
        if fmt == "read":
            prog = parse_program(text, self.vs)
            if any(c.body for c in prog.clauses) or prog.directives:
                raise EngineError(f"data file {filename} must contain plain facts")
            return [c.head for c in prog.clauses]
        if type(fmt) is Struct and fmt.functor == "csv" and len(fmt.args) == 1:
            functor = fmt.args[0]
            if type(functor) is not str:
                raise EngineError("csv/1 format argument must be an atom")
            records = []
            for line in text.splitlines():
                if not line.strip():
                    continue
                fields = [int(f) if f.strip().lstrip("-").isdigit() else f.strip()
                          for f in line.split(",")]
                records.append(Struct(functor, fields))
            return records
        raise EngineError(f"unknown data_records format {print_item(fmt)}")

    def _builtin_data_records(self, m, g, bindings, rest):
        fname = walk(g.args[0], bindings)
        fmt = apply_subst(g.args[1], bindings)
        if type(fname) is Var or not is_ground(fmt):
            raise InstantiationError(
                "data_records/3: file name and format must be bound")
        if type(fname) is not str:
            raise EngineError("data_records/3: file name must be an atom")
        records = self._read_records(fname, fmt)
        forks = []
        for rec in records:
            trial = dict(bindings)
            if not unify_into(g.args[2], rec, trial):
                continue
            head = apply_subst(m.head, trial) if m.head is not None else None
            body = tuple(apply_subst(x, trial) for x in rest)
            forks.append(Machine(head, body, m.target, origin=m.origin,
                                 depth=m.depth))
        self._push_block(forks)
        return ("sld", ("data_records", 3))

    # -- user predicate dispatch -------------------------------------------------------

    def _call_user(self, m, g, pred, bindings, rest):
        policy = self.policies.get(pred)
        if policy is None and pred not in self.clauses:
            raise ExistenceError(pred)
        goal = apply_subst(g, bindings)
        if policy is None:
            return self._sld_call(m, goal, pred, bindings, rest), None
        head = apply_subst(m.head, bindings) if m.head is not None else None
        rest_t = tuple(apply_subst(x, bindings) for x in rest)
        if isinstance(policy, IndexPlan):
            abstracted, _ = abstract_call(goal, policy, self.vs)
            entry, is_new = self.store.lookup_or_insert(
                abstracted, "subsumptive", policy)
        elif policy == "subsumptive":
            entry, is_new = self.store.lookup_or_insert(goal, "subsumptive")
        else:
            entry, is_new = self.store.lookup_or_insert(goal, "variant")
        susp = Suspension(goal=goal, head=None if m.root else head, rest=rest_t,
                          target=m.target)
        susp.reg_id = self._reg_counter
        self._reg_counter += 1
        susp.entry = entry
        susp.line_no = m.line
        susp.depth = m.depth
        register_suspension(entry, susp)
        self._event("suspend", entry, susp)
        if m.root:
            self._query_susp = susp
        if is_new:
            self._event("new-table", entry)
            self._fork_producers(entry, m.line, m.depth)
            return ("new", entry.ordinal), \
                f"add query {self._query_style(entry.goal)} to table"
        if entry.answers:
            self._pend(entry, susp, born=True)
        return ("susp", entry.ordinal), None

    def _query_style(self, goal: Term) -> str:
        names = {v.id: "?" for v in term_vars(goal)}
        return print_term(goal, names)

    def _fork_producers(self, entry: TableEntry, parent_line: int = 0,
                        parent_depth: int = 0):
        forks = []
        for idx, clause in enumerate(self.clauses.get(entry.pred, ())):
            nh, nb = self._rename_clause(clause)
            trial: dict = {}
            if not unify_into(nh, entry.goal, trial):
                continue
            head = apply_subst(nh, trial)
            body = tuple(apply_subst(x, trial) for x in nb)
            origin = None
            if self.events is not None:
                origin = ("clause", parent_line, idx,
                          head if not clause.body else None, not clause.body)
            forks.append(Machine(head, body, entry, origin=origin,
                                 depth=parent_depth + 1))
        self._push_block(forks)

    def _sld_call(self, m, goal, pred, bindings, rest):
        group = self._group_counter = self._group_counter + 1
        need_origin = self.events is not None
        forks = []
        for idx, clause in enumerate(self.clauses.get(pred, ())):
            nh, nb = self._rename_clause(clause)
            trial = dict(bindings)
            if not unify_into(goal, nh, trial):
                continue
            head = apply_subst(m.head, trial) if m.head is not None else None
            body = tuple(apply_subst(x, trial) for x in list(nb) + list(rest))
            origin = None
            if need_origin:
                origin = ("clause", m.line, idx, apply_subst(nh, trial),
                          not clause.body)
            forks.append(Machine(head, body, m.target, origin=origin,
                                 group=group, depth=m.depth + 1))
        self._push_block(forks)
        return ("sld", pred)

    def _rename_clause(self, clause: Clause):
        mapping: dict = {}
        nh = rename_term(clause.head, mapping, self.vs)
        nb = [rename_term(g, mapping, self.vs) for g in clause.body]
        return nh, nb

    # -- answers -------------------------------------------------------------------------

    def _return_answer(self, m: Machine, bindings):
        head = apply_subst(m.head, bindings) if m.head is not None else None
        if m.target is QUERY_SINK:
            self._query_returns.append(head)
            return ("ret", "query"), None
        entry: TableEntry = m.target
        if insert_answer(entry, head):
            self._event("new-answer", entry, head)
            n = len(entry.answers)
            for susp in entry.suspensions:
                if not susp.pended and susp.cursor < n:
                    self._pend(entry, susp, born=False)
            return ("ret", entry.ordinal), \
                f"add answer {print_item(head)} to table"
        self._event("duplicate-answer", entry, head)
        return ("ret", entry.ordinal), f"{print_item(head)} in table, don't add"

    def _answer_record(self, ordinal, theta) -> Answer:
        bindings = {}
        for name, var in self._query_names.items():
            val = apply_subst(var, theta)
            if val != var:
                bindings[name] = val
        return Answer(apply_subst(self._query_goal, theta), bindings, ordinal)

    # -- public API -------------------------------------------------------------------------

    def solve(self, query: Term, names: Optional[dict] = None) -> list:
        """Evaluate one query to quiescence; answers come back in table order."""
        self._query_goal = query
        self._query_names = names or {}
        self._query_susp = None
        self._query_returns = []
        root = Machine(query, (query,), QUERY_SINK, origin=("query",), root=True)
        self._push_block([root])
        self._run()
        out = []
        if self._query_susp is not None:
            entry = self._query_susp.entry
            for ordinal, ans in self._matching_answers(entry, query):
                theta = unify(query, self._rename_answer(ans))
                if theta is not None:
                    out.append(self._answer_record(ordinal, theta))
        else:
            for k, inst in enumerate(self._query_returns):
                theta = unify(query, self._rename_answer(inst))
                if theta is not None:
                    out.append(self._answer_record(k, theta))
        return out

    def _rename_answer(self, ans: Term) -> Term:
        if is_ground(ans):
            return ans
        return rename_term(ans, {}, self.vs)

    def _matching_answers(self, entry: TableEntry, query: Term):
        """Candidate (ordinal, answer) pairs in insertion order; descends the
        dispatch permutation's trie over the query's ground prefix when the
        entry has an index plan."""
        if entry.plan is not None and type(query) is Struct:
            try:
                pid = route_call(query, entry.plan)
            except IllegalModeError:
                pid = None
            if pid is not None:
                perm = entry.plan.permutations[pid]
                numbering: dict = {}
                toks: list = []
                for pos in perm:
                    arg = query.args[pos - 1]
                    if not is_ground(arg):
                        break
                    toks.extend(flatten_tokens(arg, numbering))
                ordinals = entry.answer_tries[pid].prefix_ordinals(toks)
                return [(o, entry.answers[o]) for o in ordinals]
        return list(enumerate(entry.answers))
