"""Tabulated abductive search for a falsifying pre-interpretation.

The engine evaluates the abstracted query top-down, suspending calls on
tables of most-general answers and abducing pre-interpretation components
only when a clause needs them.  Choice points enumerate domain elements
for one component; ``false <-`` triggers conflict-directed backjumping.

State is a growing clause set, deduplicated modulo variable renaming, with
a trail for exact restoration.  A solution is any quiescent state without
``false <-``: every total extension of the abduced partial table then
makes the query fail.

Provenance is tracked per bound value: a conflict records only the
components whose presence was actually checked against (ground-ground
matches, result tests), so components that merely transported a
don't-care value stay out of conflicts and backjumping skips their
generators.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Optional

from .abstraction import ABD, CALL, LOOKUP, AbstractClause, AbstractProgram
from .conflict import find_isomorphic_subset, secondary_conflict
from .runtime import Deadline, EngineStats, EngineTimeout, SearchOutcome

__all__ = ["AbduceOptions", "solve", "iterative_deepening"]

EMPTY: frozenset = frozenset()


@dataclass
class AbduceOptions:
    intelligent_backtracking: bool = True
    symmetry: bool = True
    first_cut: bool = True  # restrict the very first component by isomorphism
    seed_order: str = "fifo"  # clause tie-breaking among the delayed
    timeout: Optional[float] = None
    collect_conflicts: int = 0  # keep up to this many primary conflicts


class _Clause:
    __slots__ = ("head", "body", "base", "nvars")

    def __init__(self, head, body, base, nvars):
        self.head = head
        self.body = body
        self.base = base
        self.nvars = nvars


class _FalseDerived(Exception):
    def __init__(self, conflict: frozenset):
        self.conflict = conflict


class _CP:
    __slots__ = ("slot", "value", "untried", "mark", "records", "last_conflict")

    def __init__(self, slot, value, untried, mark):
        self.slot = slot
        self.value = value
        self.untried = untried
        self.mark = mark
        self.records: dict = {}
        self.last_conflict: Optional[frozenset] = None


class _Engine:
    def __init__(self, ap: AbstractProgram, n: int, options: AbduceOptions):
        self.ap = ap
        self.n = n
        self.opts = options
        self.deadline = Deadline(options.timeout)
        self.stats = EngineStats()
        self.consts: list = []  # (value, taint frozenset)
        self.const_index: dict = {}
        self.seen: set = set()
        self.tabled: set = set()
        self.answers: dict = {}  # pred -> list of fact clauses
        self.consumers: dict = {}  # pred -> list of suspended clauses
        self.delayed_ab: list = []
        self.delayed_call: list = []
        self.abduced: dict = {}  # slot -> (value, cp index)
        self.cps: list = []
        self.undo: list = []
        self.agenda: deque = deque()
        self.ever_abduced = False
        self.conflicts: list = []
        self._ticks = 0

    # -- constants ---------------------------------------------------------

    def const(self, value: int, taint: frozenset) -> int:
        key = (value, taint)
        ref = self.const_index.get(key)
        if ref is None:
            self.consts.append(key)
            ref = -len(self.consts)
            self.const_index[key] = ref
        return ref

    def cval(self, ref: int) -> int:
        return self.consts[-ref - 1][0]

    def ctaint(self, ref: int) -> frozenset:
        return self.consts[-ref - 1][1]

    # -- trail -------------------------------------------------------------

    def undo_to(self, mark: int):
        while len(self.undo) > mark:
            tag, a, b = self.undo.pop()
            if tag == 0:  # seen key
                self.seen.discard(a)
            elif tag == 1:  # answer
                self.answers[a].pop()
            elif tag == 2:  # consumer
                self.consumers[a].pop()
            elif tag == 3:  # delayed add
                a.pop()
            elif tag == 4:  # delayed kill
                lst, (idx, cl) = a, b
                lst[idx] = cl
            elif tag == 5:  # tabled
                self.tabled.discard(a)
            elif tag == 6:  # abduced
                del self.abduced[a]

    # -- clause plumbing ---------------------------------------------------

    def canonical(self, head, body):
        mapping: dict = {}

        def m(a):
            if a >= 0:
                v = mapping.get(a)
                if v is None:
                    v = mapping[a] = len(mapping)
                return v
            return a

        def k(a):
            return a if a >= 0 else ~self.cval(a) - self.n  # taint-blind key form

        nh = None
        if head is not None:
            nh = (head[0], tuple(m(a) for a in head[1]))
        nb = tuple((t, s, tuple(m(a) for a in args)) for t, s, args in body)
        kh = None if nh is None else (nh[0], tuple(k(a) for a in nh[1]))
        kb = tuple((t, s, tuple(k(a) for a in args)) for t, s, args in nb)
        return nh, nb, len(mapping), (kh, kb)

    def add_clause(self, head, body, base: frozenset):
        nh, nb, nvars, key = self.canonical(head, body)
        if key in self.seen:
            return
        self.seen.add(key)
        self.undo.append((0, key, None))
        self.stats.clauses_added += 1
        if nh is None and not nb:
            self.stats.rule5 += 1
            if len(self.conflicts) < self.opts.collect_conflicts:
                self.conflicts.append(base)
            raise _FalseDerived(base)
        self.agenda.append(_Clause(nh, nb, base, nvars))

    def classify(self, cl: _Clause):
        if not cl.body:
            p = cl.head[0]
            lst = self.answers.setdefault(p, [])
            lst.append(cl)
            self.undo.append((1, p, None))
            for consumer in list(self.consumers.get(p, ())):
                self.resolve_lookup(consumer, cl)
            return
        first = cl.body[0]
        if first[0] == LOOKUP:
            p = first[1]
            self.consumers.setdefault(p, []).append(cl)
            self.undo.append((2, p, None))
            for answer in list(self.answers.get(p, ())):
                self.resolve_lookup(cl, answer)
            return
        for i, lit in enumerate(cl.body):
            if lit[0] == ABD and not self.missing_tuples(lit[1], lit[2]):
                self.rule3(cl, i)
                return
        lst = self.delayed_ab if any(l[0] == ABD for l in cl.body) else self.delayed_call
        lst.append(cl)
        self.undo.append((3, lst, None))

    def saturate(self):
        while self.agenda:
            self._ticks += 1
            if self._ticks & 1023 == 0:
                self.deadline.check()
            self.classify(self.agenda.popleft())

    # -- rule 2: answer lookup ----------------------------------------------

    def resolve_lookup(self, consumer: _Clause, answer: _Clause):
        self.stats.rule2 += 1
        offset = consumer.nvars
        t_args = consumer.body[0][2]
        s_args = tuple(a + offset if a >= 0 else a for a in answer.head[1])
        subst: dict = {}

        def find(a):
            while a >= 0:
                b = subst.get(a)
                if b is None:
                    return a
                a = b
            return a

        base_add = EMPTY
        for a, b in zip(t_args, s_args):
            ra = find(a) if a >= 0 else a
            rb = find(b) if b >= 0 else b
            if ra == rb:
                if ra < 0:
                    base_add |= self.ctaint(ra)
                continue
            if ra < 0 and rb < 0:
                if self.cval(ra) != self.cval(rb):
                    return  # ground mismatch: no resolvent
                base_add |= self.ctaint(ra) | self.ctaint(rb)
            elif ra >= 0:
                subst[ra] = rb
            else:
                subst[rb] = ra

        def res(a):
            return find(a) if a >= 0 else a

        head = None
        if consumer.head is not None:
            head = (consumer.head[0], tuple(res(a) for a in consumer.head[1]))
        body = tuple(
            (t, s, tuple(res(a) for a in args)) for t, s, args in consumer.body[1:]
        )
        self.add_clause(head, body, consumer.base | answer.base | base_add)

    # -- rule 3: resolve a fully covered abducible ---------------------------

    def missing_tuples(self, fi, args):
        ins = args[:-1]
        order: list = []
        pattern: list = []
        for a in ins:
            if a >= 0:
                if a not in order:
                    order.append(a)
                pattern.append(("v", order.index(a)))
            else:
                pattern.append(("c", self.cval(a)))
        missing = []
        for combo in itertools.product(range(self.n), repeat=len(order)):
            tup = tuple(combo[i] if k == "v" else i for k, i in pattern)
            if (fi, tup) not in self.abduced:
                missing.append(tup)
        return missing

    def rule3(self, cl: _Clause, idx: int):
        self.stats.rule3 += 1
        tag, fi, args = cl.body[idx]
        ins, res = args[:-1], args[-1]
        ground_taint = EMPTY
        for a in args:
            if a < 0:
                ground_taint |= self.ctaint(a)
        order: list = []
        pattern: list = []
        for a in ins:
            if a >= 0:
                if a not in order:
                    order.append(a)
                pattern.append(("v", order.index(a)))
            else:
                pattern.append(("c", self.cval(a)))
        rest = cl.body[:idx] + cl.body[idx + 1 :]
        for combo in itertools.product(range(self.n), repeat=len(order)):
            tup = tuple(combo[i] if k == "v" else i for k, i in pattern)
            out, _gen = self.abduced[(fi, tup)]
            comp = (fi, tup, out)
            taint = ground_taint | {comp}
            env: dict = {}
            for a, v in zip(ins, tup):
                if a >= 0 and a not in env:
                    env[a] = self.const(v, taint)
            base_add = EMPTY
            if res < 0:
                if self.cval(res) != out:
                    continue
                base_add = taint
            elif res in env:
                if self.cval(env[res]) != out:
                    continue
                base_add = taint
            else:
                env[res] = self.const(out, taint)

            def sub(a):
                return env.get(a, a) if a >= 0 else a

            head = None
            if cl.head is not None:
                head = (cl.head[0], tuple(sub(a) for a in cl.head[1]))
            body = tuple((t, s, tuple(sub(a) for a in bargs)) for t, s, bargs in rest)
            self.add_clause(head, body, cl.base | base_add)

    # -- rule 1: enter a predicate's definition ------------------------------

    def first_live(self, lst):
        order = range(len(lst)) if self.opts.seed_order == "fifo" else range(len(lst) - 1, -1, -1)
        for i in order:
            if lst[i] is not None:
                return i
        return None

    def rule1(self, idx: int):
        self.stats.rule1 += 1
        cl = self.delayed_call[idx]
        self.delayed_call[idx] = None
        self.undo.append((4, self.delayed_call, (idx, cl)))
        tag, p, args = cl.body[0]
        if p not in self.tabled:
            self.tabled.add(p)
            self.undo.append((5, p, None))
            for ci in self.ap.clauses_for(p):
                acl = self.ap.clauses[ci]
                self.add_clause(acl.head, acl.body, EMPTY)
        body = ((LOOKUP, p, args),) + cl.body[1:]
        self.add_clause(cl.head, body, cl.base)

    # -- rule 4: abduce a component ------------------------------------------

    def rule4(self):
        best = None
        live = [(i, cl) for i, cl in enumerate(self.delayed_ab) if cl is not None]
        if self.opts.seed_order == "lifo":
            live.reverse()
        for i, cl in live:
            counts = [
                len(m)
                for lit in cl.body
                if lit[0] == ABD
                for m in [self.missing_tuples(lit[1], lit[2])]
            ]
            need = min(c for c in counts if c > 0)
            if best is None or need < best[0]:
                best = (need, i, cl)
        _, idx, cl = best
        target = None
        for lit in cl.body:
            if lit[0] == ABD:
                m = self.missing_tuples(lit[1], lit[2])
                if m and (target is None or len(m) < len(target[1])):
                    target = (lit[1], m)
        fi, missing = target
        slot = (fi, min(missing))
        values = list(range(self.n))
        if self.opts.first_cut and not self.ever_abduced and all(d == 0 for d in slot[1]):
            arity = self.ap.signature.functors[fi].arity
            values = values[:1] if arity == 0 else values[:2]
        cp = _CP(slot, values[0], values[1:], len(self.undo))
        self.cps.append(cp)
        self.stats.rule4 += 1
        self.abduce(slot, values[0], len(self.cps) - 1)
        self.requeue_delayed()

    def abduce(self, slot, value, cp_index):
        self.ever_abduced = True
        self.stats.abductions += 1
        self.abduced[slot] = (value, cp_index)
        self.undo.append((6, slot, None))

    def requeue_delayed(self):
        for i, cl in enumerate(self.delayed_ab):
            if cl is not None:
                self.delayed_ab[i] = None
                self.undo.append((4, self.delayed_ab, (i, cl)))
                self.agenda.append(cl)

    # -- rule 5: failure and backjumping --------------------------------------

    def backtrack(self, conflict: frozenset) -> bool:
        while True:
            self.deadline.check()
            if not conflict:
                return False  # failure holds under every pre-interpretation
            if self.opts.intelligent_backtracking:
                target = max(self.abduced[(f, ins)][1] for f, ins, _ in conflict)
            else:
                if not self.cps:
                    return False
                target = len(self.cps) - 1
            cp = self.cps[target]
            del self.cps[target + 1 :]
            self.undo_to(cp.mark)
            self.agenda.clear()
            self.stats.backtracks += 1
            own = (cp.slot[0], cp.slot[1], cp.value)
            if self.opts.intelligent_backtracking:
                cp.records[cp.value] = conflict - {own}
            cp.last_conflict = conflict
            while cp.untried:
                v = cp.untried.pop(0)
                if self.opts.symmetry and cp.last_conflict:
                    candidate = [
                        (f, ins, val) for (f, ins), (val, _) in self.abduced.items()
                    ]
                    candidate.append((cp.slot[0], cp.slot[1], v))
                    image = find_isomorphic_subset(cp.last_conflict, candidate, self.n)
                    if image is not None:
                        self.stats.symmetry_rejections += 1
                        if self.opts.intelligent_backtracking:
                            cp.records[v] = image - {(cp.slot[0], cp.slot[1], v)}
                        continue
                cp.value = v
                self.abduce(cp.slot, v, target)
                self.requeue_delayed()
                return True
            self.cps.pop()
            if self.opts.intelligent_backtracking:
                conflict = secondary_conflict(cp.records)
                self.stats.secondary_conflicts += 1
            # chronological mode keeps the triggering conflict for symmetry

    # -- main loop -------------------------------------------------------------

    def run(self, aquery: AbstractClause) -> SearchOutcome:
        try:
            self.add_clause(aquery.head, aquery.body, EMPTY)
        except _FalseDerived as e:
            return self.finish(None)
        while True:
            self.deadline.check()
            try:
                self.saturate()
            except _FalseDerived as e:
                if not self.backtrack(e.conflict):
                    return self.finish(None)
                continue
            idx = self.first_live(self.delayed_call)
            if idx is not None:
                self.rule1(idx)
                continue
            if any(cl is not None for cl in self.delayed_ab):
                self.rule4()
                continue
            return self.finish({slot: v for slot, (v, _) in self.abduced.items()})

    def finish(self, table) -> SearchOutcome:
        return SearchOutcome(table, self.stats, self.conflicts)


def solve(
    ap: AbstractProgram,
    aquery: AbstractClause,
    n: int,
    options: Optional[AbduceOptions] = None,
) -> SearchOutcome:
    """Search the n-element pre-interpretations for one falsifying the query.

    Returns a partial component table on success (any completion works) or
    an exhausted outcome; raises EngineTimeout past the budget.
    """
    if n < 1:
        raise ValueError("domain size must be at least 1")
    return _Engine(ap, n, options or AbduceOptions()).run(aquery)


def iterative_deepening(ap, aquery, max_n: int, options=None):
    """Try domain sizes 1..max_n; returns (n, outcome) of the first solution
    or (max_n, last exhausted outcome)."""
    outcome = None
    for n in range(1, max_n + 1):
        outcome = solve(ap, aquery, n, options)
        if outcome.is_solution:
            return n, outcome
    return max_n, outcome
