"""Failure analysis: conflict sets, backjumping and isomorphism pruning.

A conflict set names the abduced components that jointly force a
``false <-`` derivation: any total pre-interpretation extending the set
fails.  The helpers here operate on component triples
``(functor_index, input_tuple, output)`` and are shared by the abductive
engine and the abductive store solver.

The per-generator record discipline follows the trade-off of keeping a
conflict only with the generator of its most recent component: records
die when the search backtracks past their generator, and rejected
isomorphic candidates are not stored for future pruning.
"""

from __future__ import annotations

from typing import Iterable, Optional

__all__ = [
    "propagate",
    "backjump_target",
    "secondary_conflict",
    "find_isomorphic_subset",
    "conflict_forces_failure",
]

SYMMETRY_MAX_DOMAIN = 6  # permutation search is skipped above this size


def propagate(a: frozenset, b: frozenset) -> frozenset:
    """Conflict set of a resolvent: the union of its parents' sets."""
    return a | b


def backjump_target(conflict: Iterable, generator_of) -> int:
    """Index of the deepest choice point whose component is in the conflict.

    ``generator_of`` maps a component slot ``(functor, inputs)`` to its
    choice-point index.  An empty conflict has no target: the failure
    holds under every pre-interpretation.
    """
    target = -1
    for f, inputs, _out in conflict:
        target = max(target, generator_of((f, inputs)))
    if target < 0:
        raise ValueError("empty conflict has no backjump target")
    return target


def secondary_conflict(records: dict) -> frozenset:
    """Union of the per-value conflicts of an exhausted generator.

    Each record excludes the slot's own component, so the union mentions
    only older choices; with the totality of pre-interpretations this is
    itself a conflict (hyper-resolution against the value disjunction).
    """
    out: frozenset = frozenset()
    for s in records.values():
        out |= s
    return out


def find_isomorphic_subset(
    conflict: Iterable, candidate: Iterable, n: int
) -> Optional[frozenset]:
    """Image of the conflict inside the candidate under some domain
    permutation, or None.

    Searches partial injective maps by matching conflict components against
    candidate components of the same functor; any injective partial map on
    a finite domain extends to a bijection.
    """
    if n > SYMMETRY_MAX_DOMAIN:
        return None
    comps = sorted(conflict)
    if not comps:
        return None
    by_functor: dict = {}
    for c in sorted(candidate):
        by_functor.setdefault(c[0], []).append(c)

    pi: dict = {}
    used: set = set()
    chosen: list = []

    def extend(i: int) -> bool:
        if i == len(comps):
            return True
        f, ins, out = comps[i]
        points = ins + (out,)
        for cand in by_functor.get(f, ()):
            cpoints = cand[1] + (cand[2],)
            added = []
            ok = True
            for a, b in zip(points, cpoints):
                cur = pi.get(a)
                if cur is None:
                    if b in used:
                        ok = False
                        break
                    pi[a] = b
                    used.add(b)
                    added.append(a)
                elif cur != b:
                    ok = False
                    break
            if ok:
                chosen.append(cand)
                if extend(i + 1):
                    return True
                chosen.pop()
            for a in added:
                used.discard(pi.pop(a))
        return False

    if not extend(0):
        return None
    return frozenset(chosen)


def conflict_forces_failure(program, query, conflict_components, n, trials=3, seed=0):
    """Check that every total extension of a conflict derives ``false <-``.

    The conflict claims the query succeeds in the least model of any total
    pre-interpretation containing its components; checked on the canonical
    d0-completion plus a few random completions.
    """
    import itertools
    import random

    from .abstraction import abstract_compile, preinterp_table
    from .leastmodel import query_fails_table
    from .preinterp import PreInterpretation

    ap, aquery = abstract_compile(program, query)
    sig = ap.signature
    rng = random.Random(seed)
    fills = [lambda: 0] + [
        (lambda r=rng: r.randrange(n)) for _ in range(trials)
    ]
    for fill in fills:
        table = {}
        for f, inputs, out in conflict_components:
            table[(f, inputs)] = out
        for fi, f in enumerate(sig.functors):
            for inputs in itertools.product(range(n), repeat=f.arity):
                table.setdefault((fi, inputs), fill())
        if query_fails_table(ap, aquery, table, n):
            return False  # query failed: the conflict did not force failure
    return True
