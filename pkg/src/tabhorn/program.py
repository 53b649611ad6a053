"""Program text: tokenizer, operator-precedence parser, printer, validation.

The concrete syntax is Prolog-like: ``:-`` rules, ``.`` terminators, ``%``
line comments, quoted atoms, ``[a,b|T]`` lists, and a small fixed operator
table (``<-`` is a 1200 xfx operator so propositional rule facts like
``p <- q,r.`` parse as ordinary ``<-``/2 terms).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .terms import (
    NIL,
    Struct,
    Term,
    Var,
    VarSource,
    functor_of,
    mklist,
)


class ProgramError(Exception):
    """Syntax or directive error, with source position when known."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        if line:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)


# ---------------------------------------------------------------------------
# data model

@dataclass
class Clause:
    head: Term
    body: list  # list of Term; empty for facts

    @property
    def pred(self):
        return functor_of(self.head)


ZERO = ()  # the "no index" marker in a table_index spec list


@dataclass
class TableDecl:
    """``:- table p/2.`` or ``:- table p/2, q/3 as subsumptive.``"""

    preds: list  # [(name, arity), ...]
    policy: str  # "variant" | "subsumptive"


@dataclass
class TableIndexDecl:
    """``:- table_index(p/4, [1+2,1,2+3+4,4]).``"""

    pred: tuple
    specs: list  # list of tuple-of-positions; ZERO for the 0 marker


@dataclass
class OpDecl:
    """Parsed and otherwise ignored operator declaration."""

    term: Term


Directive = object  # TableDecl | TableIndexDecl | OpDecl


@dataclass
class Program:
    clauses: list = field(default_factory=list)
    directives: list = field(default_factory=list)

    def clause_index(self) -> dict:
        """Clauses grouped by predicate, in source order."""
        index: dict = {}
        for c in self.clauses:
            index.setdefault(c.pred, []).append(c)
        return index

    def extend(self, other: "Program") -> None:
        self.clauses.extend(other.clauses)
        self.directives.extend(other.directives)


# ---------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|%[^\n]*)
  | (?P<punct>[()\[\]|,]|!|;)
  | (?P<int>\d+)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<atom>[a-z][A-Za-z0-9_]*)
  | (?P<qatom>'(?:[^'\\]|\\.|'')*')
  | (?P<sym>[+\-*/\\^<>=~:.?@\#&]+)
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    value: object
    line: int
    col: int


def tokenize(text: str):
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ProgramError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        kind = m.lastgroup
        val = m.group()
        col = pos - line_start + 1
        if kind == "ws":
            nl = val.count("\n")
            if nl:
                line += nl
                line_start = pos + val.rfind("\n") + 1
        elif kind == "int":
            tokens.append(Token("int", int(val), line, col))
        elif kind == "var":
            tokens.append(Token("var", val, line, col))
        elif kind == "atom":
            tokens.append(Token("atom", val, line, col))
        elif kind == "qatom":
            body = val[1:-1].replace("''", "'")
            body = re.sub(r"\\(.)", r"\1", body)
            tokens.append(Token("atom", body, line, col))
        elif kind == "punct":
            tokens.append(Token(val, val, line, col))
        else:  # symbolic
            # A '.' that ends a clause: followed by layout or end of input.
            if val == "." and (pos + 1 >= n or text[pos + 1] in " \t\r\n%"):
                tokens.append(Token("end", ".", line, col))
            elif val[0] == "." and len(val) > 1:
                raise ProgramError(f"unknown symbol {val!r}", line, col)
            else:
                tokens.append(Token("atom", val, line, col))
        pos = m.end()
    tokens.append(Token("eof", None, line, n - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# operator table

# name -> (priority, type)
INFIX_OPS = {
    ":-": (1200, "xfx"),
    "<-": (1200, "xfx"),
    "as": (1090, "xfx"),
    ";": (1100, "xfy"),
    "->": (1050, "xfy"),
    ",": (1000, "xfy"),
    "=": (700, "xfx"),
    "+": (500, "yfx"),
    "/": (400, "yfx"),
}

PREFIX_OPS = {
    ":-": (1200, "fx"),
    "table": (1150, "fy"),
}


class _Parser:
    def __init__(self, tokens, varsource: VarSource):
        self.tokens = tokens
        self.i = 0
        self.varsource = varsource
        self.varmap: dict = {}  # name -> Var, per clause

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def error(self, msg):
        t = self.peek()
        raise ProgramError(msg, t.line, t.col)

    # -- terms ------------------------------------------------------------

    def parse(self, maxprec: int) -> Term:
        term, _ = self._parse(maxprec)
        return term

    def _parse(self, maxprec: int):
        left, lprec = self.parse_primary(maxprec)
        while True:
            t = self.peek()
            name = None
            if t.kind == "atom" and t.value in INFIX_OPS:
                name = t.value
            elif t.kind == "," :
                name = ","
            elif t.kind == ";":
                name = ";"
            if name is None or name not in INFIX_OPS:
                break
            prec, typ = INFIX_OPS[name]
            if prec > maxprec:
                break
            lmax = prec - 1 if typ.startswith("x") else prec
            if lprec > lmax:
                break
            self.next()
            rmax = prec if typ.endswith("y") else prec - 1
            right, _ = self._parse(rmax)
            left = Struct(name, (left, right))
            lprec = prec
        return left, lprec

    def parse_primary(self, maxprec: int):
        t = self.next()
        if t.kind == "int":
            return t.value, 0
        if t.kind == "var":
            if t.value == "_":
                return self.varsource.fresh(), 0
            v = self.varmap.get(t.value)
            if v is None:
                v = self.varmap[t.value] = self.varsource.fresh()
            return v, 0
        if t.kind == "(":
            inner, _ = self._parse(1200)
            self.expect(")")
            return inner, 0
        if t.kind == "[":
            return self.parse_list(), 0
        if t.kind == "!":
            return "!", 0
        if t.kind == ";":
            self.error("misplaced ';'")
        if t.kind == "atom":
            name = t.value
            nxt = self.peek()
            if nxt.kind == "(":
                self.next()
                args = [self.parse(999)]
                while self.peek().kind == ",":
                    self.next()
                    args.append(self.parse(999))
                self.expect(")")
                return Struct(name, args), 0
            if name in PREFIX_OPS:
                prec, typ = PREFIX_OPS[name]
                if prec <= maxprec and self.starts_term(nxt):
                    argmax = prec if typ == "fy" else prec - 1
                    arg, _ = self._parse(argmax)
                    return Struct(name, (arg,)), prec
            return name, 0
        self.error(f"unexpected token {t.value!r}")

    def starts_term(self, t: Token) -> bool:
        if t.kind in ("int", "var", "(", "[", "!"):
            return True
        if t.kind == "atom":
            return t.value not in INFIX_OPS or t.value in PREFIX_OPS
        return False

    def parse_list(self) -> Term:
        if self.peek().kind == "]":
            self.next()
            return NIL
        items = [self.parse(999)]
        while self.peek().kind == ",":
            self.next()
            items.append(self.parse(999))
        tail: Term = NIL
        if self.peek().kind == "|":
            self.next()
            tail = self.parse(999)
        self.expect("]")
        return mklist(items, tail)

    def expect(self, kind):
        t = self.next()
        if t.kind != kind:
            raise ProgramError(f"expected {kind!r}, got {t.value!r}", t.line, t.col)


def flatten_comma(t: Term) -> list:
    """Flatten a right-nested ','/2 chain into a goal list."""
    out = []
    while type(t) is Struct and t.functor == "," and len(t.args) == 2:
        out.append(t.args[0])
        t = t.args[1]
    out.append(t)
    return out


def comma_join(goals) -> Term:
    goals = list(goals)
    if not goals:
        return "true"
    t = goals[-1]
    for g in reversed(goals[:-1]):
        t = Struct(",", (g, t))
    return t


# ---------------------------------------------------------------------------
# clause / directive assembly

def _pred_indicator(t: Term, where: str) -> tuple:
    if type(t) is Struct and t.functor == "/" and len(t.args) == 2:
        name, arity = t.args
        if type(name) is str and type(arity) is int:
            return (name, arity)
    raise ProgramError(f"expected name/arity in {where}, got {print_term(t)}")


def _parse_index_specs(t: Term, pred: tuple) -> list:
    items = _list_items(t)
    if not items:
        raise ProgramError(f"empty index list for {pred[0]}/{pred[1]}")
    specs = []
    for k, item in enumerate(items):
        if item == 0:
            if k != len(items) - 1:
                raise ProgramError(
                    f"0 must be the last index specifier for {pred[0]}/{pred[1]}"
                )
            specs.append(ZERO)
            continue
        positions = []
        stack = [item]
        while stack:
            x = stack.pop()
            if type(x) is int:
                positions.append(x)
            elif type(x) is Struct and x.functor == "+" and len(x.args) == 2:
                stack.append(x.args[1])
                stack.append(x.args[0])
            else:
                raise ProgramError(
                    f"bad index specifier {print_term(item)} for {pred[0]}/{pred[1]}"
                )
        specs.append(tuple(positions))
    return specs


def _list_items(t: Term) -> list:
    items = []
    while True:
        if t == NIL:
            return items
        if type(t) is Struct and t.functor == "." and len(t.args) == 2:
            items.append(t.args[0])
            t = t.args[1]
        else:
            raise ProgramError("expected a proper list")


def _directive(t: Term) -> Directive:
    if type(t) is Struct and t.functor == "table_index" and len(t.args) == 2:
        pred = _pred_indicator(t.args[0], "table_index/2")
        return TableIndexDecl(pred, _parse_index_specs(t.args[1], pred))
    if type(t) is Struct and t.functor == "table" and len(t.args) == 1:
        inner = t.args[0]
        policy = "variant"
        if type(inner) is Struct and inner.functor == "as" and len(inner.args) == 2:
            mode = inner.args[1]
            if mode not in ("variant", "subsumptive"):
                raise ProgramError(f"unknown tabling mode {print_term(mode)}")
            policy = mode
            inner = inner.args[0]
        preds = [_pred_indicator(x, "table directive") for x in flatten_comma(inner)]
        return TableDecl(preds, policy)
    if type(t) is Struct and t.functor == "op" and len(t.args) == 3:
        return OpDecl(t)
    raise ProgramError(f"unknown directive {print_term(t)}")


def parse_program(text: str, varsource: Optional[VarSource] = None) -> Program:
    """Parse program text into clauses and directives.

    Each clause gets its own variable scope; all variables draw fresh ids
    from ``varsource`` so no two clauses share ids.
    """
    varsource = varsource or VarSource()
    tokens = tokenize(text)
    parser = _Parser(tokens, varsource)
    prog = Program()
    while parser.peek().kind != "eof":
        parser.varmap = {}
        term = parser.parse(1200)
        parser.expect("end")
        if type(term) is Struct and term.functor == ":-":
            if len(term.args) == 1:
                prog.directives.append(_directive(term.args[0]))
                continue
            head, body = term.args
            _check_head(head)
            prog.clauses.append(Clause(head, flatten_comma(body)))
        else:
            _check_head(term)
            prog.clauses.append(Clause(term, []))
    return prog


def _check_head(head: Term) -> None:
    if type(head) is Var:
        raise ProgramError("clause head may not be a variable")
    if type(head) is int:
        raise ProgramError("clause head may not be an integer")
    if type(head) is Struct and head.functor == "," and len(head.args) == 2:
        raise ProgramError("clause head may not be a conjunction")


def parse_query(text: str, varsource: Optional[VarSource] = None):
    """Parse a single query term.  Returns (term, {name: Var})."""
    varsource = varsource or VarSource()
    text = text.strip()
    if text.endswith("."):
        text = text[:-1]
    tokens = tokenize(text + " .")
    parser = _Parser(tokens, varsource)
    term = parser.parse(1200)
    parser.expect("end")
    return term, dict(parser.varmap)


# ---------------------------------------------------------------------------
# printing

_BARE_ATOM_RE = re.compile(r"[a-z][A-Za-z0-9_]*$")
_SYM_ATOM_RE = re.compile(r"[+\-*/\\^<>=~:.?@\#&]+$")


def _atom_text(a: str) -> str:
    if _BARE_ATOM_RE.match(a) or _SYM_ATOM_RE.match(a) or a in ("[]", "!", ";"):
        return a
    return "'" + a.replace("\\", "\\\\").replace("'", "\\'") + "'"


def print_term(t: Term, names: Optional[dict] = None, maxprec: int = 1200) -> str:
    """Deterministic canonical text for a term.

    ``names`` maps variable ids to display names; unmapped variables print
    as ``_G<id>``.  Operators print with minimal parentheses.
    """
    return _print(t, names or {}, maxprec)


def _print(t: Term, names: dict, maxprec: int) -> str:
    tt = type(t)
    if tt is Var:
        return names.get(t.id, f"_G{t.id}")
    if tt is int:
        return str(t)
    if tt is str:
        return _atom_text(t)
    if t.functor == "." and len(t.args) == 2:
        return _print_list(t, names)
    if t.functor in INFIX_OPS and len(t.args) == 2:
        prec, typ = INFIX_OPS[t.functor]
        lmax = prec - 1 if typ.startswith("x") else prec
        rmax = prec if typ.endswith("y") else prec - 1
        sep = t.functor if t.functor in (",", "+", "/") else f" {t.functor} "
        if t.functor == ",":
            sep = ","
        s = _print(t.args[0], names, lmax) + sep + _print(t.args[1], names, rmax)
        return f"({s})" if prec > maxprec else s
    if t.functor in PREFIX_OPS and len(t.args) == 1:
        prec, typ = PREFIX_OPS[t.functor]
        amax = prec if typ == "fy" else prec - 1
        s = f"{t.functor} " + _print(t.args[0], names, amax)
        return f"({s})" if prec > maxprec else s
    args = ",".join(_print(a, names, 999) for a in t.args)
    return f"{_atom_text(t.functor)}({args})"


def _print_list(t: Term, names: dict) -> str:
    items = []
    while type(t) is Struct and t.functor == "." and len(t.args) == 2:
        items.append(_print(t.args[0], names, 999))
        t = t.args[1]
    if t == NIL:
        return "[" + ",".join(items) + "]"
    return "[" + ",".join(items) + "|" + _print(t, names, 999) + "]"


def canonical_names(terms) -> dict:
    """Variable display names _G0.. in first-occurrence order across terms."""
    names: dict = {}
    stack = list(reversed(list(terms)))
    order = []
    while stack:
        x = stack.pop()
        tx = type(x)
        if tx is Var:
            if x.id not in names:
                names[x.id] = f"_G{len(order)}"
                order.append(x.id)
        elif tx is Struct and not x.ground:
            stack.extend(reversed(x.args))
    return names


def print_item(t: Term) -> str:
    """Print one standalone term with per-item canonical variable names."""
    return print_term(t, canonical_names([t]))


def print_clause(c: Clause, names: Optional[dict] = None) -> str:
    if names is None:
        names = canonical_names([c.head] + list(c.body))
    if not c.body:
        return print_term(c.head, names) + "."
    body = ",".join(print_term(g, names, 999) for g in c.body)
    return f"{print_term(c.head, names, 1199)} :- {body}."


def print_directive(d: Directive) -> str:
    if isinstance(d, TableIndexDecl):
        specs = []
        for s in d.specs:
            if s == ZERO:
                specs.append("0")
            else:
                specs.append("+".join(map(str, s)))
        return f":- table_index({d.pred[0]}/{d.pred[1]},[{','.join(specs)}])."
    if isinstance(d, TableDecl):
        preds = ", ".join(f"{n}/{a}" for n, a in d.preds)
        if d.policy == "subsumptive":
            return f":- table {preds} as subsumptive."
        return f":- table {preds}."
    if isinstance(d, OpDecl):
        return f":- {print_term(d.term)}."
    raise TypeError(d)


def print_program(p: Program) -> str:
    lines = [print_directive(d) for d in p.directives]
    lines.extend(print_clause(c) for c in p.clauses)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# validation

#: Predicates implemented by the engine; programs may not redefine them.
BUILTIN_PREDS = {
    ("true", 0),
    ("!", 0),
    ("=", 2),
    ("var", 1),
    ("nonvar", 1),
    ("scan", 2),
    ("data_records", 3),
    ("table_error", 1),
    (",", 2),
    (";", 2),
    ("->", 2),
}


@dataclass
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str

    def __str__(self):
        return f"{self.severity}: {self.message}"


def _contains_cut(goals) -> bool:
    stack = list(goals)
    while stack:
        g = stack.pop()
        if g == "!":
            return True
        if type(g) is Struct and g.functor in (",", ";", "->"):
            stack.extend(g.args)
    return False


def validate(p: Program) -> list:
    """Well-formedness diagnostics for a parsed program."""
    diags = []
    index = p.clause_index()
    tabled: dict = {}
    for d in p.directives:
        if isinstance(d, TableDecl):
            for pred in d.preds:
                if pred in tabled:
                    diags.append(
                        Diagnostic(
                            "error",
                            f"conflicting tabling directives for {pred[0]}/{pred[1]}",
                        )
                    )
                tabled[pred] = d.policy
        elif isinstance(d, TableIndexDecl):
            if d.pred in tabled:
                diags.append(
                    Diagnostic(
                        "error",
                        f"conflicting tabling directives for {d.pred[0]}/{d.pred[1]}",
                    )
                )
            tabled[d.pred] = "table_index"
            name, arity = d.pred
            for s in d.specs:
                if s == ZERO:
                    continue
                if len(set(s)) != len(s):
                    diags.append(
                        Diagnostic(
                            "error",
                            f"duplicate positions in index {'+'.join(map(str, s))} "
                            f"for {name}/{arity}",
                        )
                    )
                for pos in s:
                    if not 1 <= pos <= arity:
                        diags.append(
                            Diagnostic(
                                "error",
                                f"index position {pos} out of range for {name}/{arity}",
                            )
                        )
    for pred in tabled:
        if pred not in index:
            diags.append(
                Diagnostic(
                    "warning",
                    f"tabling directive for undefined predicate {pred[0]}/{pred[1]}",
                )
            )
    for pred, clauses in index.items():
        if pred in BUILTIN_PREDS:
            diags.append(
                Diagnostic("error", f"cannot redefine builtin {pred[0]}/{pred[1]}")
            )
        if pred in tabled:
            for c in clauses:
                if _contains_cut(c.body):
                    diags.append(
                        Diagnostic(
                            "error",
                            f"cut in tabled predicate {pred[0]}/{pred[1]}: tabled "
                            "predicates may not use instantiation-dependent builtins",
                        )
                    )
                    break
    return diags
