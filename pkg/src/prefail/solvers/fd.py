"""Finite-domain encoding of store consistency.

Every ground-ish term occurring in the constraints gets a domain variable
ranging over the domain elements; booleans express equality of two terms'
values and are channeled to the domain variables.  Functor application is
linked to canonical component variables ``f(d1,...,dk)`` by congruence
implications: if each argument equals ``di`` then the application equals
``f(d̄)``.  Falsity and subsumption constraints expand, per valuation of
their free variables, into nogoods and implication-to-disjunction gates
over the booleans.  Consistency is decided by propagation plus first-fail
value enumeration with chronological backtracking.

Non-subsumption constraints (and anything past the expansion cap) are
checked semantically at complete assignments, expanding over domain
valuations.
"""

from __future__ import annotations

import itertools
from typing import Optional

from ..constraints import (
    ConstrainedFact,
    Falsity,
    NotSubsumed,
    Subsumed,
    constraint_holds,
)

__all__ = ["FDSolver", "fd_check", "ConstraintNotEncodable"]

EXPANSION_CAP = 4096


class ConstraintNotEncodable(Exception):
    """The literal set cannot be reduced to ground-term equalities within
    the expansion cap."""


# -- encoding ---------------------------------------------------------------


def _layout(abds, head, nvars):
    """Split variables into enumerated frees and a resolution order.

    Returns (frees, steps): steps are (literal, defining?) in an order where
    a literal's inputs are known when reached; variables stuck in cycles or
    never produced are promoted to frees."""
    known: set = set()
    produced = {args[-1] for _, args in abds}
    for _, args in abds:
        for a in args[:-1]:
            if a not in produced:
                known.add(a)
    frees = sorted(known)
    steps: list = []
    remaining = list(abds)
    while remaining:
        progress = False
        rest = []
        for lit in remaining:
            _, args = lit
            if all(a in known for a in args[:-1]):
                res = args[-1]
                steps.append((lit, res not in known))
                known.add(res)
                progress = True
            else:
                rest.append(lit)
        remaining = rest
        if not progress and remaining:
            blocked = sorted(
                a for _, args in remaining for a in args[:-1] if a not in known
            )
            known.add(blocked[0])
            frees.append(blocked[0])
    for a in head:
        if a not in known:
            known.add(a)
            frees.append(a)
    return frees, steps


def _expansions(abds, head, nvars, n, cap=EXPANSION_CAP):
    """Yield (equations | None, head keys) per valuation of the frees.
    None marks a valuation whose conjunction is statically false."""
    frees, steps = _layout(abds, head, nvars)
    if n ** len(frees) > cap:
        raise ConstraintNotEncodable(f"{len(frees)} free variables at domain size {n}")
    for combo in itertools.product(range(n), repeat=len(frees)):
        keymap = dict(zip(frees, (("d", d) for d in combo)))
        eqs: dict = {}
        for (fi, args), defining in steps:
            lhs = ("f", fi) + tuple(keymap[a] for a in args[:-1])
            res = args[-1]
            if defining:
                keymap[res] = lhs
                continue
            rhs = keymap[res]
            if lhs == rhs:
                continue
            eqs[_bkey(lhs, rhs)] = True
        yield tuple(eqs), tuple(keymap[a] for a in head)


def _bkey(k1, k2):
    return (k1, k2) if k1 <= k2 else (k2, k1)


def _match_eqs(h, y):
    """Equations forcing two head-key tuples equal, or None if impossible."""
    eqs: dict = {}
    for a, b in zip(h, y):
        if a == b:
            continue
        if a[0] == "d" and b[0] == "d":
            return None
        eqs[_bkey(a, b)] = True
    return tuple(eqs)


class _Encoding:
    __slots__ = ("gates", "leafchecks", "functors")

    def __init__(self):
        self.gates: list = []  # ("nogood", eqs) | ("dnf", ants, disjuncts)
        self.leafchecks: list = []
        self.functors: set = set()  # (fi, arity) needing canonical coverage


def encode(constraint, n: int) -> _Encoding:
    enc = _Encoding()
    for fi, args in _constraint_literals(constraint):
        enc.functors.add((fi, len(args) - 1))
    if isinstance(constraint, Falsity):
        for eqs, _ in _expansions(constraint.abds, (), constraint.nvars, n):
            if eqs is None:
                continue
            enc.gates.append(("nogood", eqs))
        return enc
    if isinstance(constraint, Subsumed):
        fact = constraint.fact
        member_exps = [
            [e for e in _expansions(m.abds, m.head, m.nvars, n) if e[0] is not None]
            for m in constraint.snapshot
        ]
        for ceqs, h in _expansions(fact.abds, fact.head, fact.nvars, n):
            if ceqs is None:
                continue
            disjuncts = []
            trivially_covered = False
            for exps in member_exps:
                for deqs, y in exps:
                    match = _match_eqs(h, y)
                    if match is None:
                        continue
                    conj = tuple(dict.fromkeys(deqs + match))
                    if not conj:
                        trivially_covered = True
                        break
                    disjuncts.append(conj)
                if trivially_covered:
                    break
            if trivially_covered:
                continue
            if not disjuncts:
                enc.gates.append(("nogood", ceqs))
            else:
                enc.gates.append(("dnf", ceqs, tuple(disjuncts)))
        return enc
    if isinstance(constraint, NotSubsumed):
        enc.leafchecks.append(constraint)
        return enc
    raise TypeError(f"not a constraint: {constraint!r}")


def _constraint_literals(c):
    if isinstance(c, Falsity):
        return c.abds
    lits = list(c.fact.abds)
    for m in c.snapshot:
        lits.extend(m.abds)
    return lits


# -- propagation model -------------------------------------------------------


class _Fail(Exception):
    pass


class _Model:
    def __init__(self, n: int):
        self.n = n
        self.full = (1 << n) - 1
        self.keys: dict = {}
        self.key_list: list = []
        self.doms: list = []
        self.pure: list = []
        self.labelable: list = []
        self.bools: dict = {}
        self.bval: list = []
        self.bpair: list = []
        self.var_watch: list = []  # var -> bool indexes
        self.bool_watch: list = []  # bool -> gate indexes
        self.gates: list = []
        self.trail: list = []
        self.queue: list = []

    # -- construction --------------------------------------------------------

    def var(self, key) -> int:
        idx = self.keys.get(key)
        if idx is not None:
            return idx
        idx = len(self.key_list)
        self.keys[key] = idx
        self.key_list.append(key)
        if key[0] == "d":
            self.doms.append(1 << key[1])
            self.pure.append(False)
            self.labelable.append(False)
        else:
            self.doms.append(self.full)
            self.pure.append(all(self._is_pure(c) for c in key[2:]))
            # only component variables f(d̄) are enumerated: every other term
            # variable is determined from them through the congruence links
            self.labelable.append(all(c[0] == "d" for c in key[2:]))
        self.var_watch.append([])
        if key[0] == "f":
            children = key[2:]
            for c in children:
                self.var(c)
            if children and any(c[0] != "d" for c in children):
                self._congruence(key)
        return idx

    def _is_pure(self, key) -> bool:
        if key[0] == "d":
            return False
        return all(self._is_pure(c) for c in key[2:])

    def _congruence(self, key):
        fi = key[1]
        children = key[2:]
        for combo in itertools.product(range(self.n), repeat=len(children)):
            if any(c[0] == "d" and c[1] != d for c, d in zip(children, combo)):
                continue  # this component can never match the fixed argument
            canon = ("f", fi) + tuple(("d", d) for d in combo)
            self.var(canon)
            ants = tuple(
                self.bool(c, ("d", d))
                for c, d in zip(children, combo)
                if c[0] != "d"
            )
            con = self.bool(key, canon)
            gi = len(self.gates)
            self.gates.append(("imp", ants, con))
            for b in ants + (con,):
                self.bool_watch[b].append(gi)

    def bool(self, k1, k2) -> int:
        bk = _bkey(k1, k2)
        idx = self.bools.get(bk)
        if idx is not None:
            return idx
        v1, v2 = self.var(bk[0]), self.var(bk[1])
        idx = len(self.bval)
        self.bools[bk] = idx
        self.bval.append(-1)
        self.bpair.append((v1, v2))
        self.bool_watch.append([])
        self.var_watch[v1].append(idx)
        self.var_watch[v2].append(idx)
        return idx

    def add_gate(self, gate):
        # build booleans first: their creation may append congruence gates
        if gate[0] == "nogood":
            built = ("nogood", tuple(self.bool(*bk) for bk in gate[1]))
        else:
            ants = tuple(self.bool(*bk) for bk in gate[1])
            disjuncts = tuple(
                tuple(self.bool(*bk) for bk in conj) for conj in gate[2]
            )
            built = ("dnf", ants, disjuncts)
        gi = len(self.gates)
        self.gates.append(built)
        for b in set(self._gate_bools(built)):
            self.bool_watch[b].append(gi)

    @staticmethod
    def _gate_bools(gate):
        if gate[0] == "nogood":
            return gate[1]
        if gate[0] == "imp":
            return gate[1] + (gate[2],)
        out = list(gate[1])
        for conj in gate[2]:
            out.extend(conj)
        return tuple(out)

    # -- propagation -----------------------------------------------------------

    def set_bool(self, b: int, v: int):
        cur = self.bval[b]
        if cur == v:
            return
        if cur != -1:
            raise _Fail()
        self.trail.append((1, b, cur))
        self.bval[b] = v
        self.queue.append((1, b))

    def narrow(self, var: int, mask: int):
        cur = self.doms[var]
        new = cur & mask
        if new == cur:
            return
        if new == 0:
            raise _Fail()
        self.trail.append((0, var, cur))
        self.doms[var] = new
        self.queue.append((0, var))

    def _prop_bool(self, b: int):
        v1, v2 = self.bpair[b]
        val = self.bval[b]
        d1, d2 = self.doms[v1], self.doms[v2]
        if val == 1:
            inter = d1 & d2
            self.narrow(v1, inter)
            self.narrow(v2, inter)
        elif val == 0:
            if d1 & (d1 - 1) == 0:
                self.narrow(v2, ~d1)
            if d2 & (d2 - 1) == 0:
                self.narrow(v1, ~d2)
        else:
            if d1 & d2 == 0:
                self.set_bool(b, 0)
            elif d1 == d2 and d1 & (d1 - 1) == 0:
                self.set_bool(b, 1)

    def _prop_gate(self, gi: int):
        gate = self.gates[gi]
        kind = gate[0]
        if kind == "imp":
            _, ants, con = gate
            vals = [self.bval[b] for b in ants]
            if 0 in vals:
                return
            if -1 not in vals:
                self.set_bool(con, 1)
            elif self.bval[con] == 0 and vals.count(-1) == 1:
                self.set_bool(ants[vals.index(-1)], 0)
            return
        if kind == "nogood":
            bs = gate[1]
            unknown = None
            for b in bs:
                v = self.bval[b]
                if v == 0:
                    return
                if v == -1:
                    if unknown is not None:
                        return
                    unknown = b
            if unknown is None:
                raise _Fail()
            self.set_bool(unknown, 0)
            return
        _, ants, disjuncts = gate
        live = []
        for conj in disjuncts:
            vs = [self.bval[b] for b in conj]
            if all(v == 1 for v in vs):
                return  # some disjunct holds: satisfied outright
            if 0 not in vs:
                live.append(conj)
        unknown_ant = None
        for b in ants:
            v = self.bval[b]
            if v == 0:
                return
            if v == -1:
                if unknown_ant is not None:
                    return
                unknown_ant = b
        if not live:
            if unknown_ant is None:
                raise _Fail()
            self.set_bool(unknown_ant, 0)  # the antecedent cannot hold
            return
        if unknown_ant is None and len(live) == 1:
            for b in live[0]:
                self.set_bool(b, 1)

    def propagate(self):
        while True:
            while self.queue:
                kind, idx = self.queue.pop()
                if kind == 1:
                    self._prop_bool(idx)
                    for gi in self.bool_watch[idx]:
                        self._prop_gate(gi)
                else:
                    for b in self.var_watch[idx]:
                        self._prop_bool(b)
            self._closure()
            if not self.queue:
                return

    def _closure(self):
        """Equality reasoning across the whole store: union variables joined
        by true equalities, close under congruence (equal argument classes
        force equal application classes), then intersect class domains and
        decide equalities between settled classes."""
        parent = list(range(len(self.key_list)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(a, b):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[rb] = ra

        for b, v in enumerate(self.bval):
            if v == 1:
                p, q = self.bpair[b]
                union(p, q)
        while True:
            sigs: dict = {}
            merged = False
            for key, idx in self.keys.items():
                if key[0] != "f":
                    continue
                sig = (key[1],) + tuple(find(self.keys[c]) for c in key[2:])
                other = sigs.get(sig)
                if other is None:
                    sigs[sig] = idx
                elif find(other) != find(idx):
                    union(other, idx)
                    merged = True
            if not merged:
                break
        classes: dict = {}
        for idx in range(len(self.key_list)):
            classes.setdefault(find(idx), []).append(idx)
        for root, members in classes.items():
            dom = self.full
            for m in members:
                dom &= self.doms[m]
            if dom == 0:
                raise _Fail()
            for m in members:
                if self.doms[m] != dom:
                    self.narrow(m, dom)
        for b, v in enumerate(self.bval):
            p, q = self.bpair[b]
            rp, rq = find(p), find(q)
            if v == 0:
                if rp == rq:
                    raise _Fail()
            elif v == -1:
                if rp == rq:
                    self.set_bool(b, 1)

    def propagate_all(self):
        for b in range(len(self.bval)):
            self._prop_bool(b)
        for gi in range(len(self.gates)):
            self._prop_gate(gi)
        self.propagate()

    def undo_to(self, mark: int):
        while len(self.trail) > mark:
            kind, idx, old = self.trail.pop()
            if kind == 0:
                self.doms[idx] = old
            else:
                self.bval[idx] = old
        self.queue.clear()

    # -- solution extraction -----------------------------------------------------

    def component_table(self) -> dict:
        table = {}
        for key, idx in self.keys.items():
            if key[0] == "f" and all(c[0] == "d" for c in key[2:]):
                d = self.doms[idx]
                table[(key[1], tuple(c[1] for c in key[2:]))] = d.bit_length() - 1
        return table


def _term_functors(key, acc):
    if key[0] == "f":
        acc.add(key[1])
        for c in key[2:]:
            _term_functors(c, acc)


def _label_order(model) -> list:
    """Static labeling order: components of functors used by earlier gates
    first (keeping co-constrained variables adjacent), chain roots before
    higher arities within a group, busier variables first within a tie."""
    first_use: dict = {}
    for gi, gate in enumerate(model.gates):
        for b in set(model._gate_bools(gate)):
            for key in model.bpair[b]:
                funcs: set = set()
                _term_functors(model.key_list[key] if isinstance(key, int) else key, funcs)
                for fi in funcs:
                    first_use.setdefault(fi, gi)
    degree = [len(model.var_watch[i]) for i in range(len(model.doms))]

    def rank(i):
        key = model.key_list[i]
        return (
            first_use.get(key[1], len(model.gates)),
            len(key) - 2,
            -degree[i],
            i,
        )

    return sorted(
        (i for i in range(len(model.doms)) if model.labelable[i]), key=rank
    )


class FDSolver:
    """Propagation + enumeration over term variables; no failure analysis
    (chronological backtracking only, matching the finite-domain system)."""

    def __init__(self, first_cut: bool = True, deadline=None):
        self.first_cut = first_cut
        self.deadline = deadline  # optional Deadline, checked during labeling
        self._encodings: dict = {}
        self._witness: dict = None

    def _reusable(self, constraints, n: int) -> bool:
        """A concrete table satisfying every constraint is a witness; checking
        the previous one is far cheaper than a fresh search when the store
        only grew by an already-satisfied constraint."""
        table = self._witness
        needed = set()
        for c in constraints:
            for fi, args in _constraint_literals(c):
                needed.add((fi, len(args) - 1))
        for fi, arity in needed:
            for combo in itertools.product(range(n), repeat=arity):
                if (fi, combo) not in table:
                    return False
        try:
            return all(constraint_holds(c, table, n) for c in constraints)
        except KeyError:
            return False

    def encoding(self, c, n):
        hit = self._encodings.get(c)
        if hit is None:
            hit = encode(c, n)
            self._encodings[c] = hit
        return hit

    def check(self, constraints, n: int):
        """Returns (witness table or None, labeling backtracks)."""
        if self._witness is not None and self._reusable(constraints, n):
            return dict(self._witness), 0
        model = _Model(n)
        leafchecks = []
        encs = [self.encoding(c, n) for c in constraints]
        for enc in encs:
            for fi, arity in sorted(enc.functors):
                for combo in itertools.product(range(n), repeat=arity):
                    model.var(("f", fi) + tuple(("d", d) for d in combo))
            leafchecks.extend(enc.leafchecks)
        try:
            for enc in encs:
                for gate in enc.gates:
                    model.add_gate(gate)
            model.propagate_all()
        except _Fail:
            self._witness = None
            return None, 0

        backtracks = 0
        # label chain roots before higher-arity components: chains then ground
        # bottom-up and their equality booleans decide early
        order = _label_order(model)
        picked_any = [False]

        def pick():
            if self.first_cut and not picked_any[0]:
                for idx in order:
                    d = model.doms[idx]
                    if model.pure[idx] and d & (d - 1) != 0:
                        return idx, True
            best = None
            for idx in order:
                d = model.doms[idx]
                size = d.bit_count()
                if size > 1 and (best is None or size < best[1]):
                    best = (idx, size)
            return (None, False) if best is None else (best[0], False)

        def leaf_ok():
            if not leafchecks:
                return True
            table = model.component_table()
            return all(constraint_holds(c, table, n) for c in leafchecks)

        seed = self._witness or {}

        def label() -> bool:
            nonlocal backtracks
            if self.deadline is not None:
                self.deadline.check()
            idx, is_first = pick()
            if idx is None:
                return leaf_ok()
            picked_any[0] = True
            dom = model.doms[idx]
            values = [d for d in range(n) if dom >> d & 1]
            if is_first:
                values = values[:1]  # any value extends iff some value does
            else:
                key = model.key_list[idx]
                pref = seed.get((key[1], tuple(c[1] for c in key[2:])))
                if pref is not None and pref in values:
                    values.remove(pref)
                    values.insert(0, pref)  # warm start near the last witness
            for i, d in enumerate(values):
                mark = len(model.trail)
                try:
                    model.narrow(idx, 1 << d)
                    model.propagate()
                    if label():
                        return True
                except _Fail:
                    pass
                model.undo_to(mark)
                backtracks += 1
            return False

        if label():
            witness = model.component_table()
            self._witness = witness
            return dict(witness), backtracks
        self._witness = None
        return None, backtracks


def fd_check(constraints, n: int, first_cut: bool = True):
    """One-shot entry point: (witness table | None, backtracks)."""
    return FDSolver(first_cut).check(constraints, n)


def dump_encoding(constraints, n: int) -> str:
    """Human-readable dump of the variables and gates of the encoding."""
    model = _Model(n)
    lines = []
    for c in constraints:
        enc = encode(c, n)
        for fi, arity in sorted(enc.functors):
            for combo in itertools.product(range(n), repeat=arity):
                model.var(("f", fi) + tuple(("d", d) for d in combo))
        for gate in enc.gates:
            model.add_gate(gate)
        for lc in enc.leafchecks:
            lines.append(f"leafcheck: {lc!r}")

    def keystr(key):
        if key[0] == "d":
            return f"d{key[1]}"
        args = ",".join(keystr(c) for c in key[2:])
        return f"f{key[1]}({args})" if args else f"f{key[1]}"

    for key, idx in model.keys.items():
        lines.append(f"D{idx} := {keystr(key)}")
    for bk, b in model.bools.items():
        lines.append(f"B{b} := [{keystr(bk[0])} = {keystr(bk[1])}]")
    for gate in model.gates:
        if gate[0] == "nogood":
            lines.append("nogood(" + ", ".join(f"B{b}" for b in gate[1]) + ")")
        elif gate[0] == "imp":
            ants = " & ".join(f"B{b}" for b in gate[1]) or "true"
            lines.append(f"{ants} -> B{gate[2]}")
        else:
            ants = " & ".join(f"B{b}" for b in gate[1]) or "true"
            ds = " | ".join(
                "(" + " & ".join(f"B{b}" for b in conj) + ")" for conj in gate[2]
            )
            lines.append(f"{ants} -> {ds}")
    return "\n".join(lines) + "\n"
