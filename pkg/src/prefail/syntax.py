"""Term, atom and clause representation plus a parser for the Prolog subset.

The input language is Edinburgh-style definite clauses: facts ``p(t,...).``
and rules ``h :- b1, ..., bn.`` with ``%`` line comments and list sugar.
No operators, no negation, no cut, no arithmetic.  Queries are the bodies
of 0-arity predicates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

__all__ = [
    "FunctorSymbol",
    "Term",
    "Var",
    "Compound",
    "Atom",
    "Clause",
    "Program",
    "Query",
    "ParseError",
    "parse_program",
    "parse_clauses",
    "collect_signature",
    "pretty_term",
    "pretty_atom",
    "pretty_clause",
    "pretty_program",
    "pretty_query",
    "program_digest",
    "programs_equal",
]


@dataclass(frozen=True)
class FunctorSymbol:
    """A name/arity pair; used for both term functors and predicates."""

    name: str
    arity: int

    def __str__(self) -> str:
        return f"{self.name}/{self.arity}"


NIL = FunctorSymbol("nil", 0)
CONS = FunctorSymbol("cons", 2)


class Term:
    __slots__ = ()


class Var(Term):
    """A logic variable.  Ids are unique across the clauses of one parse."""

    __slots__ = ("id",)

    def __init__(self, id: int):
        self.id = id

    def __eq__(self, other):
        return isinstance(other, Var) and other.id == self.id

    def __hash__(self):
        return hash(("v", self.id))

    def __repr__(self):
        return f"Var({self.id})"


class Compound(Term):
    """A functor applied to argument terms; constants have no arguments.

    Ground compounds are hash-consed by the parser so that structurally
    equal subterms share one object and evaluation caches per subterm.
    """

    __slots__ = ("functor", "args", "_hash")

    def __init__(self, functor: FunctorSymbol, args: tuple = ()):
        if len(args) != functor.arity:
            raise ValueError(f"{functor} applied to {len(args)} arguments")
        self.functor = functor
        self.args = args
        self._hash = hash((functor, args))

    def __eq__(self, other):
        if self is other:
            return True
        return (
            isinstance(other, Compound)
            and self._hash == other._hash
            and self.functor == other.functor
            and self.args == other.args
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Compound({self.functor.name}, {self.args!r})"


_intern: dict = {}


def intern_term(functor: FunctorSymbol, args: tuple = ()) -> Compound:
    """Build a compound, sharing one object per distinct ground term."""
    if all(isinstance(a, Compound) for a in args):
        key = (functor, tuple(id(a) for a in args))
        hit = _intern.get(key)
        if hit is not None:
            return hit
        t = Compound(functor, args)
        _intern[key] = t
        return t
    return Compound(functor, args)


def term_is_ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    return all(term_is_ground(a) for a in t.args)


@dataclass(frozen=True)
class Atom:
    predicate: FunctorSymbol
    args: tuple

    def __post_init__(self):
        if len(self.args) != self.predicate.arity:
            raise ValueError(f"{self.predicate} applied to {len(self.args)} arguments")


@dataclass(frozen=True)
class Clause:
    head: Atom
    body: tuple  # of Atom; empty for facts


class Program:
    """An immutable set of definite clauses with a per-predicate index."""

    def __init__(self, clauses: Iterable[Clause]):
        self.clauses = tuple(clauses)
        index: dict = {}
        for cl in self.clauses:
            index.setdefault(cl.head.predicate, []).append(cl)
        self.by_predicate = {p: tuple(cls) for p, cls in index.items()}

    def clauses_for(self, predicate: FunctorSymbol) -> tuple:
        # Undefined predicates are legal; their least-model relation is empty.
        return self.by_predicate.get(predicate, ())

    def __repr__(self):
        return f"Program({len(self.clauses)} clauses)"


@dataclass(frozen=True)
class Query:
    body: tuple  # nonempty tuple of Atom; variables existentially quantified


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


_SYMBOL_TOKENS = (":-", "(", ")", "[", "]", ",", "|", ".")
_REJECTED = {
    "!": "cut is not a definite-clause construct",
    "\\+": "negation is not a definite-clause construct",
    "\\": "negation is not a definite-clause construct",
    "=": "operators/arithmetic are not supported",
    "<": "operators/arithmetic are not supported",
    ">": "operators/arithmetic are not supported",
    "+": "operators/arithmetic are not supported",
    "-": "operators/arithmetic are not supported",
    "*": "operators/arithmetic are not supported",
    "/": "operators/arithmetic are not supported",
    ";": "disjunction is not a definite-clause construct",
}


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col


def _tokenize(source: str) -> Iterator[_Token]:
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "%":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if c == ":" and source.startswith(":-", i):
            yield _Token("punct", ":-", line, col)
            i += 2
            col += 2
            continue
        if c in "()[],|.":
            yield _Token("punct", c, line, col)
            i += 1
            col += 1
            continue
        if c.islower():
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            yield _Token("name", source[i:j], line, col)
            col += j - i
            i = j
            continue
        if c.isupper() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            yield _Token("var", source[i:j], line, col)
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                raise ParseError("floating point numbers are not supported", line, col)
            yield _Token("name", source[i:j], line, col)  # numerals are constants
            col += j - i
            i = j
            continue
        if source.startswith("\\+", i):
            raise ParseError(_REJECTED["\\+"], line, col)
        if c in _REJECTED:
            raise ParseError(_REJECTED[c], line, col)
        raise ParseError(f"unexpected character {c!r}", line, col)
    yield _Token("eof", "", line, col)


class _Parser:
    def __init__(self, source: str):
        self.tokens = list(_tokenize(source))
        self.pos = 0
        self.next_var_id = 0  # global across clauses: clauses renamed apart

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self, text: Optional[str] = None) -> _Token:
        tok = self.tokens[self.pos]
        if text is not None and tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        self.pos += 1
        return tok

    def parse_clauses(self) -> list:
        clauses = []
        while self.peek().kind != "eof":
            clauses.append(self.clause())
        return clauses

    def clause(self) -> Clause:
        self.varmap: dict = {}
        head = self.atom()
        body: tuple = ()
        tok = self.peek()
        if tok.text == ":-":
            self.take()
            body = self.atom_list()
        self.take(".")
        return Clause(head, body)

    def atom_list(self) -> tuple:
        atoms = [self.atom()]
        while self.peek().text == ",":
            self.take()
            atoms.append(self.atom())
        return tuple(atoms)

    def atom(self) -> Atom:
        tok = self.peek()
        if tok.kind != "name":
            raise ParseError(f"expected a predicate name, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        self.take()
        args = self.maybe_args()
        return Atom(FunctorSymbol(tok.text, len(args)), args)

    def maybe_args(self) -> tuple:
        if self.peek().text != "(":
            return ()
        self.take()
        args = [self.term()]
        while self.peek().text == ",":
            self.take()
            args.append(self.term())
        self.take(")")
        return tuple(args)

    def term(self) -> Term:
        tok = self.peek()
        if tok.kind == "var":
            self.take()
            if tok.text == "_":
                v = Var(self.next_var_id)  # each bare underscore is fresh
                self.next_var_id += 1
                return v
            if tok.text not in self.varmap:
                self.varmap[tok.text] = Var(self.next_var_id)
                self.next_var_id += 1
            return self.varmap[tok.text]
        if tok.kind == "name":
            self.take()
            args = self.maybe_args()
            return intern_term(FunctorSymbol(tok.text, len(args)), tuple(args))
        if tok.text == "[":
            return self.list_term()
        raise ParseError(f"expected a term, found {tok.text or 'end of input'!r}", tok.line, tok.col)

    def list_term(self) -> Term:
        self.take("[")
        if self.peek().text == "]":
            self.take()
            return intern_term(NIL)
        items = [self.term()]
        while self.peek().text == ",":
            self.take()
            items.append(self.term())
        tail: Term = intern_term(NIL)
        if self.peek().text == "|":
            self.take()
            tail = self.term()
        self.take("]")
        for item in reversed(items):
            tail = intern_term(CONS, (item, tail))
        return tail


def parse_clauses(source: str) -> list:
    """Parse raw clauses without extracting a query."""
    return _Parser(source).parse_clauses()


def parse_program(source: str, query_name: Optional[str] = None) -> tuple:
    """Parse a program file and split off its query.

    The query is the body of a designated 0-arity predicate: ``query_name``
    if given, else ``main`` if present, else the last 0-arity predicate in
    the file.  Returns ``(Program, Query)``.
    """
    clauses = parse_clauses(source)
    zero_arity = [cl for cl in clauses if cl.head.predicate.arity == 0]
    chosen: Optional[FunctorSymbol] = None
    if query_name is not None:
        wanted = FunctorSymbol(query_name, 0)
        if not any(cl.head.predicate == wanted for cl in zero_arity):
            raise ParseError(f"query predicate {query_name}/0 not found", 0, 0)
        chosen = wanted
    elif any(cl.head.predicate.name == "main" for cl in zero_arity):
        chosen = FunctorSymbol("main", 0)
    elif zero_arity:
        chosen = zero_arity[-1].head.predicate
    else:
        raise ParseError("no 0-arity predicate to serve as the query", 0, 0)

    defining = [cl for cl in clauses if cl.head.predicate == chosen]
    if len(defining) != 1:
        raise ParseError(f"query predicate {chosen.name}/0 has {len(defining)} clauses, expected 1", 0, 0)
    if not defining[0].body:
        raise ParseError(f"query predicate {chosen.name}/0 has an empty body", 0, 0)
    rest = [cl for cl in clauses if cl.head.predicate != chosen]
    return Program(rest), Query(defining[0].body)


def _walk_terms(t: Term, functors: set):
    if isinstance(t, Var):
        return
    functors.add(t.functor)
    for a in t.args:
        _walk_terms(a, functors)


def collect_signature(program: Program, query: Optional[Query] = None) -> tuple:
    """Every functor and predicate occurring anywhere, each listed once.

    Returns ``(functors, predicates)`` as frozensets of FunctorSymbol.  A
    name used at two arities yields two distinct symbols.
    """
    functors: set = set()
    predicates: set = set()
    atoms = [a for cl in program.clauses for a in (cl.head, *cl.body)]
    if query is not None:
        atoms.extend(query.body)
    for atom in atoms:
        predicates.add(atom.predicate)
        for t in atom.args:
            _walk_terms(t, functors)
    return frozenset(functors), frozenset(predicates)


def pretty_term(t: Term, names: Optional[dict] = None) -> str:
    if isinstance(t, Var):
        if names is None:
            return f"V{t.id}"
        if t.id not in names:
            names[t.id] = f"V{len(names)}"
        return names[t.id]
    if not t.args:
        return t.functor.name
    return f"{t.functor.name}({','.join(pretty_term(a, names) for a in t.args)})"


def pretty_atom(a: Atom, names: Optional[dict] = None) -> str:
    if not a.args:
        return a.predicate.name
    return f"{a.predicate.name}({','.join(pretty_term(t, names) for t in a.args)})"


def pretty_clause(cl: Clause) -> str:
    names: dict = {}  # canonical per-clause variable names
    head = pretty_atom(cl.head, names)
    if not cl.body:
        return f"{head}."
    return f"{head} :- {', '.join(pretty_atom(a, names) for a in cl.body)}."


def pretty_program(program: Program) -> str:
    return "\n".join(pretty_clause(cl) for cl in program.clauses) + "\n"


def pretty_query(query: Query) -> str:
    names: dict = {}
    return ", ".join(pretty_atom(a, names) for a in query.body)


def program_digest(program: Program, query: Query) -> str:
    """Content digest over the canonical text of program plus query."""
    import hashlib

    text = pretty_program(program) + "?- " + pretty_query(query) + "\n"
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _clause_key(cl: Clause):
    names: dict = {}

    def term_key(t):
        if isinstance(t, Var):
            return ("v", names.setdefault(t.id, len(names)))
        return ("c", t.functor, tuple(term_key(a) for a in t.args))

    def atom_key(a):
        return (a.predicate, tuple(term_key(t) for t in a.args))

    return (atom_key(cl.head), tuple(atom_key(a) for a in cl.body))


def programs_equal(p1: Program, p2: Program) -> bool:
    """Structural equality modulo per-clause variable renaming."""
    if len(p1.clauses) != len(p2.clauses):
        return False
    return all(_clause_key(a) == _clause_key(b) for a, b in zip(p1.clauses, p2.clauses))
