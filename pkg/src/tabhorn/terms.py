"""First-order terms: variables, constants, compounds, and the operations on them.

Constants are plain Python ``str`` (atoms) and ``int`` values; only variables
and compound terms get wrapper classes.  This keeps ground data cheap, which
matters because the evaluator shares ground subterms freely instead of
copying them.
"""

from __future__ import annotations

from itertools import count
from typing import Iterator, Optional, Union


class Var:
    """A logic variable, identified by an integer id.

    Ids are allocated monotonically by a :class:`VarSource`; equality and
    hashing go by id, so two occurrences of the same variable compare equal
    across copied structures.
    """

    __slots__ = ("id",)

    def __init__(self, vid: int):
        self.id = vid

    def __eq__(self, other):
        return type(other) is Var and other.id == self.id

    def __ne__(self, other):
        return not (type(other) is Var and other.id == self.id)

    def __hash__(self):
        return hash(("$var", self.id))

    def __repr__(self):
        return f"_G{self.id}"


class Struct:
    """A compound term ``functor(arg1, ..., argN)`` with N >= 1.

    ``ground`` is computed at construction so unification and copying can
    skip variable-free subtrees in O(1).
    """

    __slots__ = ("functor", "args", "ground", "_hash")

    def __init__(self, functor: str, args):
        self.functor = functor
        self.args = tuple(args)
        g = True
        for a in self.args:
            t = type(a)
            if t is Var or (t is Struct and not a.ground):
                g = False
                break
        self.ground = g
        self._hash = None

    def __eq__(self, other):
        if self is other:
            return True
        return (
            type(other) is Struct
            and other.functor == self.functor
            and other.args == self.args
        )

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        h = self._hash
        if h is None:
            h = self._hash = hash((self.functor, self.args))
        return h

    def __repr__(self):
        return f"{self.functor}({','.join(map(repr, self.args))})"


#: A term is a variable, a compound, or a constant (atom or integer).
Term = Union[Var, Struct, str, int]

#: A substitution maps variable ids to terms.
Subst = dict


class VarSource:
    """Monotonic allocator of fresh variable ids."""

    def __init__(self, start: int = 0):
        self._counter = count(start)

    def fresh(self) -> Var:
        return Var(next(self._counter))


NIL = "[]"


def mklist(items, tail: Term = NIL) -> Term:
    """Build a cons-list term from Python items."""
    out = tail
    for x in reversed(items):
        out = Struct(".", (x, out))
    return out


def functor_of(t: Term) -> tuple:
    """(name, arity) of a callable term; atoms are 0-ary predicates."""
    if type(t) is Struct:
        return (t.functor, len(t.args))
    if type(t) is str:
        return (t, 0)
    raise TypeError(f"not a callable term: {t!r}")


def args_of(t: Term) -> tuple:
    return t.args if type(t) is Struct else ()


def walk(t: Term, bindings: Subst) -> Term:
    """Chase variable bindings until a non-variable or unbound variable."""
    while type(t) is Var:
        nxt = bindings.get(t.id)
        if nxt is None:
            return t
        t = nxt
    return t


def _occurs(vid: int, t: Term, bindings: Subst) -> bool:
    stack = [t]
    while stack:
        x = walk(stack.pop(), bindings)
        tx = type(x)
        if tx is Var:
            if x.id == vid:
                return True
        elif tx is Struct and not x.ground:
            stack.extend(x.args)
    return False


def unify_into(t1: Term, t2: Term, bindings: Subst) -> bool:
    """Destructively extend ``bindings`` with the mgu of t1 and t2.

    Returns False on clash; ``bindings`` may then hold partial bindings and
    should be discarded.  The occurs check is always performed (finite terms
    only), but skipped for ground right-hand sides.
    """
    stack = [(t1, t2)]
    while stack:
        x, y = stack.pop()
        x = walk(x, bindings)
        y = walk(y, bindings)
        if x is y:
            continue
        tx = type(x)
        ty = type(y)
        if tx is Var:
            if ty is Var:
                if y.id == x.id:
                    continue
                bindings[x.id] = y
                continue
            if ty is Struct and not y.ground and _occurs(x.id, y, bindings):
                return False
            bindings[x.id] = y
            continue
        if ty is Var:
            if tx is Struct and not x.ground and _occurs(y.id, x, bindings):
                return False
            bindings[y.id] = x
            continue
        if tx is Struct:
            if (
                ty is not Struct
                or x.functor != y.functor
                or len(x.args) != len(y.args)
            ):
                return False
            stack.extend(zip(x.args, y.args))
            continue
        if tx is not ty or x != y:
            return False
    return True


def unify(t1: Term, t2: Term, s: Optional[Subst] = None) -> Optional[Subst]:
    """Most general unifier of t1 and t2 extending ``s``, or None.

    The input substitution is not mutated.
    """
    bindings = dict(s) if s else {}
    if unify_into(t1, t2, bindings):
        return bindings
    return None


def apply_subst(t: Term, bindings: Subst) -> Term:
    """Apply a substitution, sharing unchanged subtrees."""
    if not bindings:
        return t
    t = walk(t, bindings)
    if type(t) is not Struct or t.ground:
        return t
    new_args = []
    changed = False
    for a in t.args:
        na = apply_subst(a, bindings)
        if na is not a:
            changed = True
        new_args.append(na)
    return Struct(t.functor, new_args) if changed else t


def term_vars(t: Term) -> list:
    """Variables of a term in first-occurrence order."""
    seen = set()
    out = []
    stack = [t]
    while stack:
        x = stack.pop()
        tx = type(x)
        if tx is Var:
            if x.id not in seen:
                seen.add(x.id)
                out.append(x)
        elif tx is Struct and not x.ground:
            stack.extend(reversed(x.args))
    return out


def is_ground(t: Term) -> bool:
    tx = type(t)
    if tx is Var:
        return False
    if tx is Struct:
        return t.ground
    return True


def rename_term(t: Term, mapping: dict, source: VarSource) -> Term:
    """Copy ``t`` with every variable replaced via ``mapping`` (extended
    with fresh variables from ``source`` on first sight)."""
    tx = type(t)
    if tx is Var:
        nv = mapping.get(t.id)
        if nv is None:
            nv = mapping[t.id] = source.fresh()
        return nv
    if tx is Struct and not t.ground:
        return Struct(t.functor, [rename_term(a, mapping, source) for a in t.args])
    return t


def subsumes(general: Term, specific: Term) -> Optional[Subst]:
    """One-sided match: a substitution th with general*th == specific.

    Variables of ``specific`` are treated as constants, so
    ``subsumes(p(a,Y), p(X,b))`` fails while ``subsumes(p(X,Y), p(a,Z))``
    succeeds with {X: a, Y: Z}.  Callers keep the two sides standardized
    apart (table goals never share variables with incoming calls).
    """
    bindings: Subst = {}
    stack = [(general, specific)]
    while stack:
        g, s = stack.pop()
        if type(g) is Var:
            bound = bindings.get(g.id)
            if bound is None:
                bindings[g.id] = s
                continue
            if bound == s:
                continue
            return None
        tg = type(g)
        ts = type(s)
        if tg is Struct:
            if (
                ts is not Struct
                or s.functor != g.functor
                or len(s.args) != len(g.args)
            ):
                return None
            stack.extend(zip(g.args, s.args))
            continue
        if tg is not ts or g != s:
            return None
    return bindings


def variant_key(t: Term):
    """Hashable key identical for exactly the variants of ``t``.

    Ground terms are their own key; open terms get variables numbered in
    first-occurrence order.
    """
    if is_ground(t):
        return t
    numbering: dict = {}

    def conv(x):
        tx = type(x)
        if tx is Var:
            n = numbering.get(x.id)
            if n is None:
                n = numbering[x.id] = len(numbering)
            return ("$v", n)
        if tx is Struct and not x.ground:
            return ("$s", x.functor, tuple(conv(a) for a in x.args))
        return x

    return conv(t)


def is_variant(t1: Term, t2: Term) -> bool:
    """True iff a bijective variable renaming maps t1 onto t2."""
    return variant_key(t1) == variant_key(t2)


def flatten_tokens(t: Term, numbering: Optional[dict] = None) -> Iterator:
    """Flatten a term into a token sequence for trie storage.

    Variables are canonically numbered (shared ``numbering`` lets several
    arguments of one answer share the numbering).
    """
    if numbering is None:
        numbering = {}
    stack = [t]
    while stack:
        x = stack.pop()
        tx = type(x)
        if tx is Var:
            n = numbering.get(x.id)
            if n is None:
                n = numbering[x.id] = len(numbering)
            yield ("$v", n)
        elif tx is Struct:
            yield ("$s", x.functor, len(x.args))
            stack.extend(reversed(x.args))
        else:
            yield x
