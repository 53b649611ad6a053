"""The global table of subgoals.

Each entry holds one (possibly abstracted) generating goal, its
insertion-ordered and variant-deduplicated answer list, per-permutation
answer tries for prefix lookup, and the suspensions waiting on it.  All
mutation happens on the evaluator's thread; the structures here are plain
data with no locking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from .program import canonical_names, print_term
from .terms import (
    Struct,
    Term,
    Var,
    flatten_tokens,
    functor_of,
    is_ground,
    subsumes,
    unify,
    variant_key,
)


class Trie:
    """Token trie over flattened term sequences.

    Every node stores the ordinals of all answers passing through it, in
    insertion order, so a bound-prefix lookup enumerates exactly the
    answers whose permuted arguments start with that prefix, preserving
    table order, with constant-time descent per token.
    """

    __slots__ = ("children", "ordinals")

    def __init__(self):
        self.children: dict = {}
        self.ordinals: list = []

    def insert(self, tokens, ordinal: int) -> None:
        node = self
        node.ordinals.append(ordinal)
        for tok in tokens:
            nxt = node.children.get(tok)
            if nxt is None:
                nxt = node.children[tok] = Trie()
            node = nxt
            node.ordinals.append(ordinal)

    def contains(self, tokens) -> bool:
        node = self
        for tok in tokens:
            node = node.children.get(tok)
            if node is None:
                return False
        return True

    def prefix_ordinals(self, prefix_tokens) -> list:
        """Ordinals of entries whose token sequence starts with the given
        ground prefix, in insertion order."""
        node = self
        for tok in prefix_tokens:
            node = node.children.get(tok)
            if node is None:
                return []
        return node.ordinals


@dataclass
class Suspension:
    """A consumer paused on a table entry.

    ``goal`` is the original, unabstracted call; ``head``/``rest`` are the
    continuation (answer template and remaining goals); ``cursor`` counts
    answers already scanned, unifying or not.
    """

    goal: Term
    head: Optional[Term]
    rest: tuple
    target: object  # where the continuation returns answers
    cursor: int = 0
    reg_id: int = 0
    pended: bool = False  # currently queued for waking
    entry: object = None  # owning TableEntry
    line_no: int = 0  # trace line of the suspending machine
    depth: int = 0


class TableEntry:
    __slots__ = (
        "ordinal",
        "goal",
        "pred",
        "policy",
        "plan",
        "answers",
        "dedup",
        "answer_tries",
        "suspensions",
    )

    def __init__(self, ordinal, goal, policy, plan=None):
        self.ordinal = ordinal
        self.goal = goal
        self.pred = functor_of(goal)
        self.policy = policy
        self.plan = plan
        self.answers: list = []
        self.dedup = Trie()
        self.answer_tries: dict = {}
        if plan is not None:
            for pid in range(len(plan.permutations)):
                self.answer_tries[pid] = Trie()
        self.suspensions: list = []

    def __repr__(self):
        return f"<entry {print_term(self.goal)} ({len(self.answers)} answers)>"


def answer_tokens(entry: TableEntry, ans: Term, pid: int) -> list:
    """Flattened tokens of an answer's arguments in permutation order."""
    perm = entry.plan.permutations[pid]
    args = ans.args if type(ans) is Struct else ()
    numbering: dict = {}
    toks: list = []
    for pos in perm:
        toks.extend(flatten_tokens(args[pos - 1], numbering))
    return toks


def insert_answer(entry: TableEntry, ans: Term) -> bool:
    """Append an answer unless a variant is already present.

    Returns True iff the answer is new; new answers are indexed in every
    permutation trie.
    """
    key = list(flatten_tokens(ans))
    if entry.dedup.contains(key):
        return False
    ordinal = len(entry.answers)
    entry.dedup.insert(key, ordinal)
    entry.answers.append(ans)
    for pid, trie in entry.answer_tries.items():
        trie.insert(answer_tokens(entry, ans, pid), ordinal)
    return True


def register_suspension(entry: TableEntry, susp: Suspension) -> int:
    entry.suspensions.append(susp)
    return len(entry.suspensions) - 1


def pending_answers(entry: TableEntry, susp: Suspension, horizon=None):
    """Unconsumed answers that unify with the suspension's goal, in
    insertion order, as (ordinal, unifier) pairs.

    The cursor advances over every scanned answer, unifying or not, up to
    ``horizon`` (default: the whole answer list).
    """
    out = []
    answers = entry.answers
    end = len(answers) if horizon is None else min(horizon, len(answers))
    goal = susp.goal
    for i in range(susp.cursor, end):
        theta = unify(goal, answers[i])
        if theta is not None:
            out.append((i, theta))
    susp.cursor = end
    return out


def indexed_lookup(entry: TableEntry, pid: int, prefix_values) -> Iterator[Term]:
    """Answers whose permuted arguments start with the given ground values,
    in insertion order, via the permutation's trie."""
    numbering: dict = {}
    toks: list = []
    for v in prefix_values:
        if not is_ground(v):
            raise ValueError("indexed_lookup requires a ground prefix")
        toks.extend(flatten_tokens(v, numbering))
    trie = entry.answer_tries[pid]
    answers = entry.answers
    for ordinal in trie.prefix_ordinals(toks):
        yield answers[ordinal]


class TableStore:
    """All table entries of one evaluation, in creation order."""

    def __init__(self):
        self.entries: list = []
        self.by_variant: dict = {}  # variant_key(goal) -> entry
        self.by_pred: dict = {}  # pred -> [entry, ...] creation order

    def find_variant(self, goal: Term) -> Optional[TableEntry]:
        return self.by_variant.get(variant_key(goal))

    def find_subsuming(self, goal: Term) -> Optional[TableEntry]:
        for entry in self.by_pred.get(functor_of(goal), ()):
            if subsumes(entry.goal, goal) is not None:
                return entry
        return None

    def create(self, goal: Term, policy: str, plan=None) -> TableEntry:
        entry = TableEntry(len(self.entries), goal, policy, plan)
        self.entries.append(entry)
        self.by_variant[variant_key(goal)] = entry
        self.by_pred.setdefault(entry.pred, []).append(entry)
        return entry

    def lookup_or_insert(self, goal: Term, policy: str, plan=None):
        """(entry, is_new) for a call goal under the given policy.

        Variant policy reuses an entry whose goal is a variant of the call;
        subsumptive policy reuses the first (creation order) entry whose
        goal subsumes the call.  Goals arriving here under a table_index
        plan are already abstracted, so the variant fast path applies.
        """
        if policy == "variant" or plan is not None:
            entry = self.find_variant(goal)
            if entry is not None:
                return entry, False
        else:
            entry = self.find_subsuming(goal)
            if entry is not None:
                return entry, False
        return self.create(goal, policy, plan), True


# ---------------------------------------------------------------------------
# rendering (the T: section of machine traces and the dump-tables command)

def format_machine(head: Optional[Term], body, names=None) -> str:
    if names is None:
        items = ([head] if head is not None else []) + list(body)
        names = canonical_names(items)
    body_text = ",".join(print_term(g, names, 999) for g in body)
    head_text = print_term(head, names, 1199) if head is not None else ""
    return f"{head_text}<-{body_text}"


def format_suspension(susp: Suspension) -> str:
    body = (susp.goal,) + susp.rest
    return f"{format_machine(susp.head, body)}:{susp.cursor}"


def format_entry(entry: TableEntry) -> str:
    goal = print_term(entry.goal, canonical_names([entry.goal]))
    answers = ",".join(
        print_term(a, canonical_names([a]), 999) for a in entry.answers
    )
    susps = ", ".join(format_suspension(s) for s in entry.suspensions)
    return f"{goal}:[{answers}],[{susps}]"


def format_store(store: TableStore, indent: str = "   ") -> str:
    if not store.entries:
        return "T:"
    lines = []
    for i, entry in enumerate(store.entries):
        prefix = "T: " if i == 0 else indent
        lines.append(prefix + format_entry(entry))
    return "\n".join(lines)
