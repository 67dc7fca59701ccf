"""Constraints over an unknown pre-interpretation, with their semantics.

A constrained fact ``p(X̄) <- Abds`` guards a tabled answer with abducible
literals; the store accumulates falsity and (non-)subsumption constraints
over such facts.  ``constraint_holds`` is the executable meaning of each
constraint under a total component table and is the single definition the
solvers are validated against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

__all__ = [
    "ConstrainedFact",
    "Falsity",
    "Subsumed",
    "NotSubsumed",
    "satisfying_assignments",
    "fact_tuples",
    "constraint_holds",
    "always_satisfiable",
    "canonical_fact",
    "constraint_key",
]


@dataclass(frozen=True)
class ConstrainedFact:
    """An answer guarded by abducibles: head args and all literal args are
    variable numbers; each abducible is (functor_index, args) with the
    result in the last position."""

    pred: int
    head: tuple
    abds: tuple
    nvars: int


@dataclass(frozen=True)
class Falsity:
    """``false <- Abds``: no grounding of the literals may hold."""

    abds: tuple
    nvars: int


@dataclass(frozen=True)
class Subsumed:
    """Every head tuple the fact produces is produced by a snapshot member."""

    fact: ConstrainedFact
    snapshot: tuple


@dataclass(frozen=True)
class NotSubsumed:
    """Some head tuple the fact produces is new w.r.t. the snapshot."""

    fact: ConstrainedFact
    snapshot: tuple


def satisfying_assignments(abds, nvars, jtable, n):
    """Yield each environment (list indexed by variable) satisfying the
    literal set under a total table.  Literals whose inputs are bound are
    evaluated functionally; blocked input variables are enumerated."""
    env = [None] * nvars

    def rec(remaining):
        if not remaining:
            yield env
            return
        for i, (fi, args) in enumerate(remaining):
            ins, res = args[:-1], args[-1]
            vals = tuple(env[a] for a in ins)
            if all(v is not None for v in vals):
                out = jtable[(fi, vals)]
                rest = remaining[:i] + remaining[i + 1 :]
                if env[res] is None:
                    env[res] = out
                    yield from rec(rest)
                    env[res] = None
                elif env[res] == out:
                    yield from rec(rest)
                return
        blocked = sorted(
            {a for _, args in remaining for a in args[:-1] if env[a] is None}
        )
        v = blocked[0]
        for d in range(n):
            env[v] = d
            yield from rec(remaining)
        env[v] = None

    yield from rec(list(abds))


def fact_tuples(fact: ConstrainedFact, jtable, n) -> set:
    """All head tuples the fact denotes; head variables the body leaves
    unbound range over the whole domain."""
    out = set()
    for env in satisfying_assignments(fact.abds, fact.nvars, jtable, n):
        free = sorted({a for a in fact.head if env[a] is None})
        if not free:
            out.add(tuple(env[a] for a in fact.head))
            continue
        for combo in itertools.product(range(n), repeat=len(free)):
            binding = dict(zip(free, combo))
            out.add(tuple(binding.get(a, env[a]) if env[a] is None else env[a] for a in fact.head))
    return out


def constraint_holds(c, jtable, n) -> bool:
    """Truth of a constraint under a total component table."""
    if isinstance(c, Falsity):
        for _ in satisfying_assignments(c.abds, c.nvars, jtable, n):
            return False
        return True
    if isinstance(c, Subsumed):
        covered: set = set()
        for member in c.snapshot:
            covered |= fact_tuples(member, jtable, n)
        return fact_tuples(c.fact, jtable, n) <= covered
    if isinstance(c, NotSubsumed):
        covered = set()
        for member in c.snapshot:
            covered |= fact_tuples(member, jtable, n)
        return bool(fact_tuples(c.fact, jtable, n) - covered)
    raise TypeError(f"not a constraint: {c!r}")


def always_satisfiable(abds) -> bool:
    """True when the literal set has a grounding under every total table:
    each variable is the result of at most one literal and the defining
    literals are acyclic."""
    defined: set = set()
    for _, args in abds:
        res = args[-1]
        if res in defined:
            return False
        defined.add(res)
    remaining = list(abds)
    known: set = set()
    for _, args in abds:
        for a in args[:-1]:
            if a not in defined:
                known.add(a)
    while remaining:
        progress = False
        rest = []
        for lit in remaining:
            _, args = lit
            if all(a in known for a in args[:-1]):
                known.add(args[-1])
                progress = True
            else:
                rest.append(lit)
        if not progress:
            return False  # cyclic definitions: satisfiability depends on the table
        remaining = rest
    return True


def canonical_fact(fact: ConstrainedFact) -> ConstrainedFact:
    mapping: dict = {}

    def m(a):
        if a not in mapping:
            mapping[a] = len(mapping)
        return mapping[a]

    head = tuple(m(a) for a in fact.head)
    abds = tuple((fi, tuple(m(a) for a in args)) for fi, args in fact.abds)
    return ConstrainedFact(fact.pred, head, abds, len(mapping))


def constraint_key(c):
    """Structural identity modulo variable renaming; used for store dedup."""
    if isinstance(c, Falsity):
        mapping: dict = {}

        def m(a):
            if a not in mapping:
                mapping[a] = len(mapping)
            return mapping[a]

        return ("false", tuple((fi, tuple(m(a) for a in args)) for fi, args in c.abds))
    fact = canonical_fact(c.fact)
    snap = tuple(canonical_fact(f) for f in c.snapshot)
    tag = "subs" if isinstance(c, Subsumed) else "nsubs"
    return (tag, fact, snap)
