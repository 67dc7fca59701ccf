"""Tabulated evaluation with constrained answers and a consistency solver.

Instead of committing to components, answers are kept as constrained facts
``p(X̄) <- Abds``; resolution concatenates the guards.  A clause reduced to
``false <- Abds`` becomes a falsity constraint; a clause reduced to a
constrained fact opens a two-way choice: force it subsumed by the existing
answers and drop it, or record it as a new answer with the negated
constraint.  Store consistency is re-established after every insertion by
a pluggable solver; subsumption keeps answer sets finite, so the
derivation terminates at fixed domain size.

Choice points are taken lowest-priority (they are the only branching),
with the subsumed alternative preferred as it keeps derivations short.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .abstraction import ABD, CALL, LOOKUP, AbstractClause, AbstractProgram
from .constraints import (
    ConstrainedFact,
    Falsity,
    NotSubsumed,
    Subsumed,
    always_satisfiable,
    constraint_key,
)
from .runtime import Deadline, EngineStats, EngineTimeout, SearchOutcome
from .solvers import AbductiveSolver, FDSolver

__all__ = ["ConstraintOptions", "solve_constraint"]


@dataclass
class ConstraintOptions:
    solver: str = "abductive"  # or "fd"
    timeout: Optional[float] = None
    trace: bool = False
    dump_encoding: bool = False


class _Clause:
    __slots__ = ("head", "body", "nvars")

    def __init__(self, head, body, nvars):
        self.head = head
        self.body = body
        self.nvars = nvars


class _Inconsistent(Exception):
    pass


class _CP:
    __slots__ = ("clause", "mark", "branch")

    def __init__(self, clause, mark):
        self.clause = clause
        self.mark = mark
        self.branch = "a"


class _Engine:
    def __init__(self, ap: AbstractProgram, n: int, options: ConstraintOptions):
        self.ap = ap
        self.n = n
        self.opts = options
        self.deadline = Deadline(options.timeout)
        self.stats = EngineStats()
        if options.solver == "fd":
            self.solver = FDSolver(deadline=self.deadline)
        elif options.solver == "abductive":
            self.solver = AbductiveSolver(deadline=self.deadline)
        else:
            raise ValueError(f"unknown solver {options.solver!r}")
        self.seen: set = set()
        self.tabled: set = set()
        self.answers: dict = {}  # pred -> list of ConstrainedFact
        self.consumers: dict = {}  # pred -> list of (clause, lookup position)
        self.delayed_call: list = []
        self.pending_answers: list = []  # rule-5 queue
        self.store: list = []
        self.store_keys: set = set()
        self.undo: list = []
        self.cps: list = []
        self.agenda: deque = deque()
        self.last_witness: dict = {}
        self._ticks = 0

    # -- trail ---------------------------------------------------------------

    def undo_to(self, mark: int):
        while len(self.undo) > mark:
            tag, a, b = self.undo.pop()
            if tag == 0:
                self.seen.discard(a)
            elif tag == 1:
                self.answers[a].pop()
            elif tag == 2:
                self.consumers[a].pop()
            elif tag == 3:
                a.pop()
            elif tag == 4:
                lst, (idx, item) = a, b
                lst[idx] = item
            elif tag == 5:
                self.tabled.discard(a)
            elif tag == 6:
                self.store.pop()
                self.store_keys.discard(a)

    # -- clause plumbing -------------------------------------------------------

    def canonical(self, head, body):
        mapping: dict = {}

        def m(a):
            v = mapping.get(a)
            if v is None:
                v = mapping[a] = len(mapping)
            return v

        nh = None if head is None else (head[0], tuple(m(a) for a in head[1]))
        out = []
        for t, s, args in body:
            lit = (t, s, tuple(m(a) for a in args))
            out.append(lit)
        # flattened normal form: drop duplicate abducible literals
        nb = tuple(dict.fromkeys(out))
        return nh, nb, len(mapping)

    def add_clause(self, head, body, renumber=True):
        nh, nb, nvars = self.canonical(head, body)
        key = (nh, nb)
        if key in self.seen:
            return
        self.seen.add(key)
        self.undo.append((0, key, None))
        self.stats.clauses_added += 1
        self.agenda.append(_Clause(nh, nb, nvars))

    def classify(self, cl: _Clause):
        lookup_pos = next((i for i, l in enumerate(cl.body) if l[0] == LOOKUP), None)
        if lookup_pos is not None:
            p = cl.body[lookup_pos][1]
            self.consumers.setdefault(p, []).append((cl, lookup_pos))
            self.undo.append((2, p, None))
            for fact in list(self.answers.get(p, ())):
                self.resolve_lookup(cl, lookup_pos, fact)
            return
        if any(l[0] == CALL for l in cl.body):
            self.delayed_call.append(cl)
            self.undo.append((3, self.delayed_call, None))
            return
        abds = tuple((s, args) for _t, s, args in cl.body)
        if cl.head is None:
            self.post_falsity(Falsity(abds, cl.nvars))
            return
        fact = ConstrainedFact(cl.head[0], cl.head[1], abds, cl.nvars)
        self.pending_answers.append(fact)
        self.undo.append((3, self.pending_answers, None))

    def saturate(self):
        while self.agenda:
            self._ticks += 1
            if self._ticks & 255 == 0:
                self.deadline.check()
            self.classify(self.agenda.popleft())

    # -- rules 2 and 1 -----------------------------------------------------------

    def resolve_lookup(self, cl: _Clause, pos: int, fact: ConstrainedFact):
        self.stats.rule2 += 1
        offset = cl.nvars
        head_args = tuple(a + offset for a in fact.head)
        abds = tuple((s, tuple(a + offset for a in args)) for s, args in fact.abds)
        t_args = cl.body[pos][2]
        subst: dict = {}

        def find(a):
            while a in subst:
                a = subst[a]
            return a

        for a, b in zip(t_args, head_args):
            ra, rb = find(a), find(b)
            if ra != rb:
                subst[rb] = ra  # bind the answer's variable to the caller's

        def res(a):
            return find(a)

        spliced = tuple((ABD, s, tuple(res(a) for a in args)) for s, args in abds)
        body = cl.body[:pos] + spliced + cl.body[pos + 1 :]
        body = tuple((t, s, tuple(res(a) for a in args)) for t, s, args in body)
        head = None
        if cl.head is not None:
            head = (cl.head[0], tuple(res(a) for a in cl.head[1]))
        self.add_clause(head, body)

    def rule1(self):
        self.stats.rule1 += 1
        idx = next(i for i, c in enumerate(self.delayed_call) if c is not None)
        cl = self.delayed_call[idx]
        self.delayed_call[idx] = None
        self.undo.append((4, self.delayed_call, (idx, cl)))
        pos = next(i for i, l in enumerate(cl.body) if l[0] == CALL)
        p = cl.body[pos][1]
        if p not in self.tabled:
            self.tabled.add(p)
            self.undo.append((5, p, None))
            for ci in self.ap.clauses_for(p):
                acl = self.ap.clauses[ci]
                self.add_clause(acl.head, acl.body)
        t, s, args = cl.body[pos]
        body = cl.body[:pos] + ((LOOKUP, s, args),) + cl.body[pos + 1 :]
        self.add_clause(cl.head, body)

    # -- rules 3 and 4: the store --------------------------------------------------

    def post(self, constraint):
        key = constraint_key(constraint)
        if key in self.store_keys:
            return  # idempotent: the store is a set of constraints
        self.store.append(constraint)
        self.store_keys.add(key)
        self.undo.append((6, key, None))
        self.check_store()

    def post_falsity(self, c: Falsity):
        self.stats.rule3 += 1
        if not c.abds:
            raise _Inconsistent()  # `false <-` with no guard
        self.post(c)

    def check_store(self):
        self.stats.solver_checks += 1
        if self.opts.dump_encoding and self.opts.solver == "fd":
            from .solvers.fd import dump_encoding

            print(f"% store encoding, check {self.stats.solver_checks}")
            print(dump_encoding(self.store, self.n))
        witness, backtracks = self.solver.check(self.store, self.n)
        self.stats.solver_backtracks += backtracks
        if witness is None:
            raise _Inconsistent()
        self.last_witness = witness

    # -- rule 5: answer processing ---------------------------------------------------

    def rule5(self) -> bool:
        idx = next(i for i, f in enumerate(self.pending_answers) if f is not None)
        cp = _CP(idx, len(self.undo))
        self.cps.append(cp)
        self.stats.rule5 += 1
        try:
            self.branch_a(cp)
            return True
        except _Inconsistent:
            return self.backtrack()

    def take_pending(self, cp) -> ConstrainedFact:
        fact = self.pending_answers[cp.clause]
        self.pending_answers[cp.clause] = None
        self.undo.append((4, self.pending_answers, (cp.clause, fact)))
        return fact

    def branch_a(self, cp):
        fact = self.take_pending(cp)
        snapshot = tuple(self.answers.get(fact.pred, ()))
        if not snapshot:
            raise _Inconsistent()  # nothing can subsume the first answer
        self.post(Subsumed(fact, snapshot))
        # consistent: the fact is dropped

    def branch_b(self, cp):
        fact = self.take_pending(cp)
        snapshot = tuple(self.answers.get(fact.pred, ()))
        if not (always_satisfiable(fact.abds) and not snapshot):
            # skip the vacuously true case to keep the store small
            self.post(NotSubsumed(fact, snapshot))
        self.answers.setdefault(fact.pred, []).append(fact)
        self.undo.append((1, fact.pred, None))
        for consumer, pos in list(self.consumers.get(fact.pred, ())):
            self.resolve_lookup(consumer, pos, fact)

    def backtrack(self) -> bool:
        while self.cps:
            self.deadline.check()
            cp = self.cps[-1]
            self.undo_to(cp.mark)
            self.agenda.clear()
            if cp.branch == "a":
                cp.branch = "b"
                try:
                    self.branch_b(cp)
                    return True
                except _Inconsistent:
                    continue
            self.cps.pop()
            self.stats.table_backtracks += 1
        return False

    # -- main loop --------------------------------------------------------------------

    def run(self, aquery: AbstractClause) -> SearchOutcome:
        try:
            self.add_clause(aquery.head, aquery.body)
        except _Inconsistent:
            return SearchOutcome(None, self.stats)
        while True:
            self.deadline.check()
            try:
                self.saturate()
                if any(c is not None for c in self.delayed_call):
                    self.rule1()
                    continue
                if any(f is not None for f in self.pending_answers):
                    if not self.rule5():
                        return SearchOutcome(None, self.stats)
                    continue
            except _Inconsistent:
                if not self.backtrack():
                    return SearchOutcome(None, self.stats)
                continue
            return SearchOutcome(dict(self.last_witness), self.stats)


def solve_constraint(
    ap: AbstractProgram,
    aquery: AbstractClause,
    n: int,
    options: Optional[ConstraintOptions] = None,
) -> SearchOutcome:
    """Search via the constraint procedure; the solution table is the
    solver's witness for the final consistent store (possibly partial)."""
    if n < 1:
        raise ValueError("domain size must be at least 1")
    return _Engine(ap, n, options or ConstraintOptions()).run(aquery)
