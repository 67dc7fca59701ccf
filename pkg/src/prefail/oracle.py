"""Brute-force ground truth by exhaustive enumeration.

Enumerates every total pre-interpretation on a small domain (and, for the
model-existence cross-check, every interpretation on top of each), deciding
query failure through the least-model evaluator.  This is the reference
the search engines are validated against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from .abstraction import ABD, CALL, abstract_compile
from .leastmodel import query_fails_table
from .preinterp import PreInterpretation
from .syntax import Program, Query

__all__ = [
    "SpaceTooLarge",
    "EnumerationReport",
    "InterpretationReport",
    "enumerate_preinterps",
    "find_failing",
    "enumerate_interpretations",
]

DEFAULT_CAP = 2**24


class SpaceTooLarge(Exception):
    def __init__(self, size: int, cap: int):
        super().__init__(f"search space {size} exceeds cap {cap}")
        self.size = size
        self.cap = cap


@dataclass
class EnumerationReport:
    n: int
    space_size: int
    failing_count: int
    iso_class_count: int
    witnesses: tuple = ()


@dataclass
class InterpretationReport:
    n: int
    preinterp_space: int
    interp_size: int  # ground atoms per interpretation
    interp_space_per_pre: int
    model_count: int
    prop1_holds: bool  # a model exists exactly when the query fails in LM_J
    per_pre: list = field(default_factory=list)  # (model_exists, query_fails)


def _slots(sig, n):
    out = []
    for fi, f in enumerate(sig.functors):
        for inputs in itertools.product(range(n), repeat=f.arity):
            out.append((fi, inputs))
    return out


def _iter_tables(slots, n):
    for values in itertools.product(range(n), repeat=len(slots)):
        yield dict(zip(slots, values)), values


def _canonical(slots, values, n, slot_pos):
    """Lexicographically least image of the assignment under all domain
    permutations; two assignments are isomorphic iff images coincide."""
    best = None
    for pi in itertools.permutations(range(n)):
        image = [0] * len(values)
        for k, (fi, inputs) in enumerate(slots):
            target = slot_pos[(fi, tuple(pi[d] for d in inputs))]
            image[target] = pi[values[k]]
        image = tuple(image)
        if best is None or image < best:
            best = image
    return best


def enumerate_preinterps(
    program: Program,
    query: Query,
    n: int,
    cap: int = DEFAULT_CAP,
    witness_cap: int = 8,
) -> EnumerationReport:
    """Try every total pre-interpretation, counting the failing ones."""
    ap, aquery = abstract_compile(program, query)
    sig = ap.signature
    space = sig.space_size(n)
    if space > cap:
        raise SpaceTooLarge(space, cap)
    slots = _slots(sig, n)
    slot_pos = {s: i for i, s in enumerate(slots)}
    failing = 0
    canon_forms = set()
    witnesses = []
    for jtable, values in _iter_tables(slots, n):
        if query_fails_table(ap, aquery, jtable, n):
            failing += 1
            canon_forms.add(_canonical(slots, values, n, slot_pos))
            if len(witnesses) < witness_cap:
                witnesses.append(_to_preinterp(sig, jtable, n))
    return EnumerationReport(n, space, failing, len(canon_forms), tuple(witnesses))


def find_failing(
    program: Program, query: Query, n: int, cap: int = DEFAULT_CAP
) -> Optional[PreInterpretation]:
    """First failing pre-interpretation in enumeration order, if any."""
    ap, aquery = abstract_compile(program, query)
    sig = ap.signature
    space = sig.space_size(n)
    if space > cap:
        raise SpaceTooLarge(space, cap)
    slots = _slots(sig, n)
    for jtable, _ in _iter_tables(slots, n):
        if query_fails_table(ap, aquery, jtable, n):
            return _to_preinterp(sig, jtable, n)
    return None


def _to_preinterp(sig, jtable, n) -> PreInterpretation:
    return PreInterpretation(
        n, {(sig.functors[fi], inputs): out for (fi, inputs), out in jtable.items()}
    )


def _ground_implications(ap, aquery, jtable, n):
    """Ground the abstract clauses under a fixed pre-interpretation.

    Abducible literals are decided by the table, so every clause instance
    reduces to an implication over program-predicate atoms (head None for
    the query clause, read as a denial)."""
    atom_ids: dict = {}

    def atom_id(p, tup):
        key = (p, tup)
        if key not in atom_ids:
            atom_ids[key] = len(atom_ids)
        return atom_ids[key]

    # Pre-assign ids for every possible atom so interp_size is the full count.
    for pi, p in enumerate(ap.signature.predicates):
        for tup in itertools.product(range(n), repeat=p.arity):
            atom_id(pi, tup)

    implications = []
    for cl in list(ap.clauses) + [aquery]:
        for combo in itertools.product(range(n), repeat=cl.nvars):
            ok = True
            body_bits = 0
            for lit in cl.body:
                tag, sym, args = lit
                if tag == ABD:
                    ins = tuple(combo[a] for a in args[:-1])
                    if jtable[(sym, ins)] != combo[args[-1]]:
                        ok = False
                        break
                else:
                    body_bits |= 1 << atom_id(sym, tuple(combo[a] for a in args))
            if not ok:
                continue
            if cl.head is None:
                implications.append((body_bits, None))
            else:
                head_bit = 1 << atom_id(cl.head[0], tuple(combo[a] for a in cl.head[1]))
                implications.append((body_bits, head_bit))
    return implications, len(atom_ids)


def enumerate_interpretations(
    program: Program, query: Query, n: int, cap: int = DEFAULT_CAP
) -> InterpretationReport:
    """Count models of the program together with the denial of the query,
    enumerating truth tables over ground atoms for every pre-interpretation.
    Validates that a model exists exactly when the query fails in the least
    model."""
    ap, aquery = abstract_compile(program, query)
    sig = ap.signature
    space = sig.space_size(n)
    slots = _slots(sig, n)
    interp_size = sum(n**p.arity for p in sig.predicates)
    if space * (2**interp_size) > cap:
        raise SpaceTooLarge(space * (2**interp_size), cap)
    total_models = 0
    per_pre = []
    prop1 = True
    for jtable, _ in _iter_tables(slots, n):
        implications, natoms = _ground_implications(ap, aquery, jtable, n)
        models_here = 0
        for mask in range(2**natoms):
            good = True
            for body, head in implications:
                if mask & body == body and (head is None or not (mask & head)):
                    good = False
                    break
            if good:
                models_here += 1
        fails = query_fails_table(ap, aquery, jtable, n)
        total_models += models_here
        per_pre.append((models_here > 0, fails))
        if (models_here > 0) != fails:
            prop1 = False
    return InterpretationReport(
        n, space, interp_size, 2**interp_size, total_models, prop1, per_pre
    )
