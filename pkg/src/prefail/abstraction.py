"""Abstract compilation: eliminate non-variable terms from clauses.

Every compound term ``f(t1,...,tn)`` is replaced, innermost first, by a
fresh variable ``X`` plus a relation call ``p_f(t1,...,tn,X)`` on the
pre-interpretation of ``f``.  The result is a DATALOG program whose only
open predicates are the ``p_f``, so completing it with a pre-interpretation
in relational form lets a DATALOG evaluator compute the least model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .preinterp import Component, PartialPreInterpretation, PreInterpretation
from .syntax import (
    Atom,
    Clause,
    Compound,
    FunctorSymbol,
    Program,
    Query,
    Var,
    collect_signature,
    term_is_ground,
)

__all__ = [
    "ABD",
    "CALL",
    "LOOKUP",
    "Signature",
    "AbstractClause",
    "AbstractProgram",
    "abstract_compile",
    "relational_form",
    "preinterp_table",
    "table_to_preinterp",
    "format_abstract_clause",
    "dump_abstract",
    "dom",
    "dom_index",
    "is_var",
]

# Literal tags.  A literal is (tag, symbol_index, args); abducible args
# carry the result in the last position.
ABD = 0
CALL = 1
LOOKUP = 2  # engine-internal: a suspended call waiting for answers


def dom(k: int) -> int:
    """Encode domain element k as a non-variable argument."""
    return -k - 1


def dom_index(a: int) -> int:
    return -a - 1


def is_var(a: int) -> bool:
    return a >= 0


class Signature:
    """Deterministically ordered functor and predicate tables."""

    def __init__(self, functors, predicates):
        self.functors = tuple(sorted(functors, key=lambda s: (s.name, s.arity)))
        self.predicates = tuple(sorted(predicates, key=lambda s: (s.name, s.arity)))
        self.functor_index = {f: i for i, f in enumerate(self.functors)}
        self.predicate_index = {p: i for i, p in enumerate(self.predicates)}

    def components_total(self, n: int) -> int:
        """Size of a total pre-interpretation over this signature."""
        return sum(n**f.arity for f in self.functors)

    def space_size(self, n: int) -> int:
        """Number of total pre-interpretations on an n-element domain."""
        total = 1
        for f in self.functors:
            total *= n ** (n**f.arity)
        return total


@dataclass(frozen=True)
class AbstractClause:
    """A functor-free clause.

    ``head`` is ``(pred_index, args)`` or None for a falsity clause (the
    abstracted query).  ``body`` interleaves abducible and call literals in
    producer-before-consumer order; all arguments are variables numbered
    0..nvars-1.
    """

    head: Optional[tuple]
    body: tuple
    nvars: int

    @property
    def abducibles(self) -> tuple:
        return tuple(l for l in self.body if l[0] == ABD)

    @property
    def calls(self) -> tuple:
        return tuple(l for l in self.body if l[0] == CALL)


class AbstractProgram:
    def __init__(self, clauses, signature: Signature):
        self.clauses = tuple(clauses)
        self.signature = signature
        index: dict = {}
        for i, cl in enumerate(self.clauses):
            index.setdefault(cl.head[0], []).append(i)
        self.clauses_by_pred = {p: tuple(ix) for p, ix in index.items()}

    def clauses_for(self, pred_index: int) -> tuple:
        return self.clauses_by_pred.get(pred_index, ())

    def __repr__(self):
        return f"AbstractProgram({len(self.clauses)} clauses)"


class _Flattener:
    def __init__(self, signature: Signature):
        self.sig = signature

    def start_clause(self):
        self.varmap: dict = {}
        self.fresh = 0
        self.ground_cache: dict = {}  # shared ground subterms reuse one abducible
        self.literals: list = []

    def new_var(self) -> int:
        v = self.fresh
        self.fresh += 1
        return v

    def flatten_term(self, t) -> int:
        if isinstance(t, Var):
            if t.id not in self.varmap:
                self.varmap[t.id] = self.new_var()
            return self.varmap[t.id]
        ground = term_is_ground(t)
        if ground and t in self.ground_cache:
            return self.ground_cache[t]
        args = tuple(self.flatten_term(a) for a in t.args)  # innermost first
        v = self.new_var()
        self.literals.append((ABD, self.sig.functor_index[t.functor], args + (v,)))
        if ground:
            self.ground_cache[t] = v
        return v

    def flatten_atom(self, a: Atom) -> tuple:
        args = tuple(self.flatten_term(t) for t in a.args)
        return (self.sig.predicate_index[a.predicate], args)

    def clause(self, cl: Clause) -> AbstractClause:
        self.start_clause()
        head = self.flatten_atom(cl.head)
        body = list(self.literals)  # head abducibles lead the body
        for atom in cl.body:
            self.literals = []
            call = self.flatten_atom(atom)
            body.extend(self.literals)  # producers before the consuming atom
            body.append((CALL,) + call)
        return AbstractClause(head, tuple(body), self.fresh)

    def query(self, q: Query) -> AbstractClause:
        self.start_clause()
        body: list = []
        for atom in q.body:
            self.literals = []
            call = self.flatten_atom(atom)
            body.extend(self.literals)
            body.append((CALL,) + call)
        return AbstractClause(None, tuple(body), self.fresh)


def abstract_compile(program: Program, query: Query) -> tuple:
    """Compile to DATALOG.  Returns ``(AbstractProgram, abstract query)``."""
    functors, predicates = collect_signature(program, query)
    sig = Signature(functors, predicates)
    fl = _Flattener(sig)
    ap = AbstractProgram([fl.clause(cl) for cl in program.clauses], sig)
    return ap, fl.query(query)


def relational_form(j: PreInterpretation, signature: Signature) -> frozenset:
    """The pre-interpretation as ground facts, one Component per entry."""
    facts = []
    for f in signature.functors:
        for inputs in _tuples(j.n, f.arity):
            out = j.lookup(f, inputs)
            if out is None:
                raise PartialPreInterpretation(f, inputs)
            facts.append(Component(f, inputs, out))
    return frozenset(facts)


def _tuples(n: int, k: int):
    if k == 0:
        yield ()
        return
    for rest in _tuples(n, k - 1):
        for d in range(n):
            yield rest + (d,)


def preinterp_table(j: PreInterpretation, signature: Signature) -> dict:
    """Index a total pre-interpretation by functor number for evaluation."""
    table = {}
    for f in signature.functors:
        fi = signature.functor_index[f]
        for inputs in _tuples(j.n, f.arity):
            out = j.lookup(f, inputs)
            if out is None:
                raise PartialPreInterpretation(f, inputs)
            table[(fi, inputs)] = out
    return table


def table_to_preinterp(table: dict, signature: Signature, n: int) -> PreInterpretation:
    """Rebuild a (possibly partial) pre-interpretation from an engine table."""
    mapping = {}
    for (fi, inputs), out in table.items():
        mapping[(signature.functors[fi], inputs)] = out
    return PreInterpretation(n, mapping)


def _abd_name(sig: Signature, fi: int) -> str:
    return "p_" + sig.functors[fi].name


def format_abstract_clause(cl: AbstractClause, sig: Signature) -> str:
    def v(a):
        return f"V{a}" if a >= 0 else f"d{dom_index(a)}"

    def lit(l):
        tag, s, args = l
        name = _abd_name(sig, s) if tag == ABD else sig.predicates[s].name
        if tag == LOOKUP:
            return f"lookup({name}({','.join(v(a) for a in args)}))"
        if not args:
            return name
        return f"{name}({','.join(v(a) for a in args)})"

    head = "false" if cl.head is None else lit((CALL,) + cl.head)
    if not cl.body:
        return f"{head}."
    return f"{head} :- {', '.join(lit(l) for l in cl.body)}."


def dump_abstract(ap: AbstractProgram, aquery: AbstractClause) -> str:
    """Print the abstract program in the input grammar, abducibles as atoms."""
    lines = [format_abstract_clause(cl, ap.signature) for cl in ap.clauses]
    lines.append(format_abstract_clause(aquery, ap.signature))
    return "\n".join(lines) + "\n"
