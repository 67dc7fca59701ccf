"""Store consistency by abducing components on demand.

Verifies each constraint under a growing component table, creating a
choice point whenever evaluation needs a component that is not assigned
yet.  A violated constraint yields a conflict set of the components used,
driving backjumping inside the check; exhausted choice points combine
their per-value conflicts into a secondary conflict.

Conflicts are sharpened two ways before use: falsity bodies are first
simplified by inlining single-use result variables (the substitution rule
for equations whose variable does not occur in the substituted term), and
a violated subsumption constraint blames one violated argument position
when a single position suffices.
"""

from __future__ import annotations

import itertools
from typing import Optional

from ..constraints import (
    ConstrainedFact,
    Falsity,
    NotSubsumed,
    Subsumed,
    always_satisfiable,
)
from ..conflict import secondary_conflict

__all__ = ["AbductiveSolver", "abductive_check"]

EMPTY: frozenset = frozenset()


def prune_falsity(abds: tuple) -> tuple:
    """Drop literals whose result variable occurs nowhere else: a total
    table always provides some output, so they cannot block satisfaction
    and only widen conflicts."""
    abds = list(abds)
    while True:
        counts: dict = {}
        for _, args in abds:
            for a in args:
                counts[a] = counts.get(a, 0) + 1
        keep = []
        dropped = False
        for lit in abds:
            res = lit[1][-1]
            if counts[res] == 1:
                dropped = True
            else:
                keep.append(lit)
        if not dropped:
            return tuple(keep)
        abds = keep


class _CP:
    __slots__ = ("slot", "value", "untried", "mark", "records")

    def __init__(self, slot, value, untried, mark):
        self.slot = slot
        self.value = value
        self.untried = untried
        self.mark = mark
        self.records: dict = {}


class _Search:
    def __init__(self, n: int, seed: Optional[dict], first_cut: bool):
        self.n = n
        self.seed = seed or {}
        self.first_cut = first_cut
        self.table: dict = {}  # slot -> (value, cp index)
        self.trail: list = []
        self.cps: list = []
        self.backtracks = 0

    def value_order(self, slot):
        values = list(range(self.n))
        if self.first_cut and not self.cps and all(d == 0 for d in slot[1]):
            arity = len(slot[1])
            values = values[:1] if arity == 0 else values[:2]
        pref = self.seed.get(slot)
        if pref is not None and pref in values:
            values.remove(pref)
            values.insert(0, pref)
        return values

    def abduce(self, slot) -> int:
        values = self.value_order(slot)
        cp = _CP(slot, values[0], values[1:], len(self.trail))
        self.cps.append(cp)
        self.table[slot] = (values[0], len(self.cps) - 1)
        self.trail.append(slot)
        return values[0]

    def lookup(self, slot, touch: set) -> int:
        hit = self.table.get(slot)
        if hit is None:
            v = self.abduce(slot)
        else:
            v = hit[0]
        touch.add((slot[0], slot[1], self.table[slot][0]))
        return v

    def undo_to(self, mark: int):
        while len(self.trail) > mark:
            del self.table[self.trail.pop()]

    def backjump(self, conflict: frozenset) -> bool:
        while True:
            if not conflict:
                return False
            target = max(self.table[(f, ins)][1] for f, ins, _ in conflict)
            cp = self.cps[target]
            del self.cps[target + 1 :]
            self.undo_to(cp.mark)
            self.backtracks += 1
            own = (cp.slot[0], cp.slot[1], cp.value)
            cp.records[cp.value] = conflict - {own}
            if cp.untried:
                v = cp.untried.pop(0)
                cp.value = v
                self.table[cp.slot] = (v, target)
                self.trail.append(cp.slot)
                return True
            self.cps.pop()
            conflict = secondary_conflict(cp.records)


class AbductiveSolver:
    """Incremental consistency checks warm-started from the last witness."""

    def __init__(self, first_cut: bool = True, deadline=None):
        self.seed: dict = {}
        self.first_cut = first_cut
        self.deadline = deadline
        self._pruned: dict = {}

    def normalized(self, c):
        if isinstance(c, Falsity):
            hit = self._pruned.get(c)
            if hit is None:
                hit = Falsity(prune_falsity(c.abds), c.nvars)
                self._pruned[c] = hit
            return hit
        return c

    def check(self, constraints, n: int):
        """Returns (witness table or None, internal backtrack count)."""
        search = _Search(n, self.seed, self.first_cut)
        cs = [self.normalized(c) for c in constraints]
        while True:
            conflict = None
            for c in cs:
                ok, confl = _eval_constraint(c, search, n)
                if not ok:
                    conflict = confl
                    break
            if conflict is None:
                witness = {slot: v for slot, (v, _) in search.table.items()}
                self.seed = dict(witness)
                return witness, search.backtracks
            if self.deadline is not None:
                self.deadline.check()
            if not search.backjump(conflict):
                return None, search.backtracks


def abductive_check(constraints, n: int, seed: Optional[dict] = None):
    """One-shot entry point: (witness | None, backtracks)."""
    solver = AbductiveSolver()
    if seed:
        solver.seed = dict(seed)
    return solver.check(constraints, n)


def _sat_search(abds, nvars, search, n, touch, binding=None):
    """Yield (env, used-per-var, path components) for each satisfying
    assignment, abducing missing components as a side effect.  Every
    component consulted, on failing branches too, lands in ``touch``: a
    refutation is only as sound as the set of reads it depends on."""
    env = [None] * nvars
    used = [EMPTY] * nvars
    if binding:
        for a, (v, u) in binding.items():
            env[a] = v
            used[a] = u
    path: list = []

    def rec(remaining):
        if not remaining:
            yield env, used, frozenset(path)
            return
        for i, (fi, args) in enumerate(remaining):
            ins, res = args[:-1], args[-1]
            vals = tuple(env[a] for a in ins)
            if any(v is None for v in vals):
                continue
            out = search.lookup((fi, vals), touch)
            comp = (fi, vals, out)
            in_used = EMPTY
            for a in ins:
                in_used |= used[a]
            here = in_used | {comp}
            rest = remaining[:i] + remaining[i + 1 :]
            path.append(comp)
            if env[res] is None:
                env[res] = out
                prev = used[res]
                used[res] = here
                yield from rec(rest)
                env[res] = None
                used[res] = prev
            elif env[res] == out:
                saved = used[res]
                used[res] = saved | here
                yield from rec(rest)
                used[res] = saved
            path.pop()
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


def _fact_groundings(fact: ConstrainedFact, search, n, touch):
    """Yield (head tuple, per-argument used, body path) for each grounding."""
    for env, used, path in _sat_search(fact.abds, fact.nvars, search, n, touch):
        free = sorted({a for a in fact.head if env[a] is None})
        combos = itertools.product(range(n), repeat=len(free))
        for combo in combos:
            b = dict(zip(free, combo))
            head = tuple(b[a] if env[a] is None else env[a] for a in fact.head)
            args_used = tuple(EMPTY if env[a] is None else used[a] for a in fact.head)
            yield head, args_used, path


def _covers_at(member: ConstrainedFact, pos, value, search, n, touch: set):
    """Can the member produce `value` at head position `pos`?"""
    var = member.head[pos]
    binding = {var: (value, EMPTY)}
    for _env, _used, _p in _sat_search(member.abds, member.nvars, search, n, touch, binding):
        return True
    return False


def _covers_tuple(member: ConstrainedFact, head, search, n, touch: set):
    binding = {}
    for a, v in zip(member.head, head):
        if a in binding and binding[a][0] != v:
            return False
        binding[a] = (v, EMPTY)
    for _env, _used, _p in _sat_search(member.abds, member.nvars, search, n, touch, binding):
        return True
    return False


def _eval_constraint(c, search, n):
    """(holds?, conflict when violated)."""
    if isinstance(c, Falsity):
        scratch: set = set()
        for _env, _used, path in _sat_search(c.abds, c.nvars, search, n, scratch):
            return False, path
        return True, None
    if isinstance(c, Subsumed):
        fact_touch: set = set()
        chain_body = always_satisfiable(c.fact.abds)
        for head, args_used, path in _fact_groundings(c.fact, search, n, fact_touch):
            touch: set = set()
            if any(_covers_tuple(m, head, search, n, touch) for m in c.snapshot):
                continue
            # violated: blame a single argument position when the rest of the
            # body is a chain (some grounding then exists under any table
            # extending the blamed components)
            if chain_body:
                for pos in range(len(head)):
                    pos_touch: set = set()
                    if not any(
                        _covers_at(m, pos, head[pos], search, n, pos_touch)
                        for m in c.snapshot
                    ):
                        return False, args_used[pos] | frozenset(pos_touch)
            full = path | frozenset(touch)
            for u in args_used:
                full |= u
            return False, full
        return True, None
    if isinstance(c, NotSubsumed):
        touched: set = set()
        for head, args_used, path in _fact_groundings(c.fact, search, n, touched):
            if not any(_covers_tuple(m, head, search, n, touched) for m in c.snapshot):
                return True, None
        return False, frozenset(touched)
    raise TypeError(f"not a constraint: {c!r}")
