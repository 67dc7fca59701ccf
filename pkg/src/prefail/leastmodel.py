"""Ground-truth evaluation: bottom-up least models and certificate checking.

Two independent routes are kept deliberately separate: ``least_model``
evaluates the abstracted DATALOG program under a pre-interpretation in
relational form (semi-naive), while ``direct_least_model`` evaluates the
original clauses by term assignment.  Certificates are verified from
source, never trusting engine state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .abstraction import (
    ABD,
    CALL,
    AbstractClause,
    AbstractProgram,
    abstract_compile,
    preinterp_table,
)
from .preinterp import (
    PartialPreInterpretation,
    PreInterpretation,
    format_preinterp,
    parse_preinterp,
)
from .syntax import (
    Compound,
    FunctorSymbol,
    Program,
    Query,
    Var,
    collect_signature,
    program_digest,
    pretty_query,
)

__all__ = [
    "least_model",
    "naive_least_model",
    "query_fails",
    "direct_least_model",
    "direct_query_fails",
    "Certificate",
    "CertificateError",
    "format_certificate",
    "parse_certificate",
    "verify_certificate",
]


def _functor_rows(ap: AbstractProgram, jtable: dict, n: int) -> dict:
    rows: dict = {fi: [] for fi in range(len(ap.signature.functors))}
    for (fi, inputs), out in jtable.items():
        rows[fi].append((inputs, out))
    return rows


def _match_body(body, start, env, rels, jtable, rows, delta_pos=None, delta=None):
    """Yield once per satisfying extension of env; restores bindings."""
    if start == len(body):
        yield True
        return
    tag, sym, args = body[start]
    if tag == ABD:
        ins, res = args[:-1], args[-1]
        bound = tuple(env[a] for a in ins)
        if all(v is not None for v in bound):
            out = jtable.get((sym, bound))
            if out is None:
                raise PartialPreInterpretation(None, bound)
            choices = [(bound, out)]
        else:
            choices = rows[sym]
        for inputs, out in choices:
            trail = []
            if _bind_args(ins + (res,), inputs + (out,), env, trail):
                yield from _match_body(body, start + 1, env, rels, jtable, rows, delta_pos, delta)
            for a in trail:
                env[a] = None
    else:
        source = delta if start == delta_pos else rels[sym]
        for tup in source:
            trail = []
            if _bind_args(args, tup, env, trail):
                yield from _match_body(body, start + 1, env, rels, jtable, rows, delta_pos, delta)
            for a in trail:
                env[a] = None


def _bind_args(args, values, env, trail) -> bool:
    for a, v in zip(args, values):
        cur = env[a]
        if cur is None:
            env[a] = v
            trail.append(a)
        elif cur != v:
            for b in trail:
                env[b] = None
            trail.clear()
            return False
    return True


def _head_tuples(cl: AbstractClause, env, n):
    """Head tuples under env; head variables not bound by the body range
    over the whole domain (facts with free variables denote all instances)."""
    args = cl.head[1]
    free = sorted({a for a in args if env[a] is None})
    if not free:
        yield tuple(env[a] for a in args)
        return
    for combo in itertools.product(range(n), repeat=len(free)):
        for a, v in zip(free, combo):
            env[a] = v
        yield tuple(env[a] for a in args)
    for a in free:
        env[a] = None


def _fixpoint(ap: AbstractProgram, jtable: dict, n: int, query: Optional[AbstractClause] = None):
    """Semi-naive least fixpoint.  With a query, stops early (returning
    None) as soon as the query body becomes satisfiable."""
    rows = _functor_rows(ap, jtable, n)
    npred = len(ap.signature.predicates)
    rels = [set() for _ in range(npred)]

    def eval_rule(cl, delta_pos=None, delta=None):
        env = [None] * cl.nvars
        out = []
        for _ in _match_body(cl.body, 0, env, rels, jtable, rows, delta_pos, delta):
            out.extend(_head_tuples(cl, env, n))
        return out

    def query_satisfied():
        env = [None] * query.nvars
        for _ in _match_body(query.body, 0, env, rels, jtable, rows):
            return True
        return False

    deltas = [set() for _ in range(npred)]
    for cl in ap.clauses:
        p = cl.head[0]
        for tup in eval_rule(cl):
            if tup not in rels[p]:
                rels[p].add(tup)
                deltas[p].add(tup)
    while True:
        if query is not None and query_satisfied():
            return None
        if not any(deltas):
            return rels
        new = [set() for _ in range(npred)]
        for cl in ap.clauses:
            p = cl.head[0]
            call_positions = [i for i, l in enumerate(cl.body) if l[0] == CALL]
            for i in call_positions:
                dp = cl.body[i][1]
                if not deltas[dp]:
                    continue
                for tup in eval_rule(cl, delta_pos=i, delta=deltas[dp]):
                    if tup not in rels[p]:
                        new[p].add(tup)
        for p in range(npred):
            rels[p] |= new[p]
        deltas = new


def least_model(ap: AbstractProgram, j: PreInterpretation) -> dict:
    """Least model of the abstracted program completed with j.

    Returns one relation per program predicate, keyed by symbol.
    """
    jtable = preinterp_table(j, ap.signature)
    rels = _fixpoint(ap, jtable, j.n)
    return {
        p: frozenset(rels[i]) for i, p in enumerate(ap.signature.predicates)
    }


def naive_least_model(ap: AbstractProgram, j: PreInterpretation) -> dict:
    """Round-based reference iteration; used to cross-check the semi-naive one."""
    jtable = preinterp_table(j, ap.signature)
    rows = _functor_rows(ap, jtable, j.n)
    npred = len(ap.signature.predicates)
    rels = [set() for _ in range(npred)]
    changed = True
    while changed:
        changed = False
        for cl in ap.clauses:
            env = [None] * cl.nvars
            derived = []
            for _ in _match_body(cl.body, 0, env, rels, jtable, rows):
                derived.extend(_head_tuples(cl, env, j.n))
            p = cl.head[0]
            for tup in derived:
                if tup not in rels[p]:
                    rels[p].add(tup)
                    changed = True
    return {p: frozenset(rels[i]) for i, p in enumerate(ap.signature.predicates)}


def query_fails(ap: AbstractProgram, aquery: AbstractClause, j: PreInterpretation) -> bool:
    """True iff no domain assignment satisfies every query literal in the
    least model; the satisfiability check is a nested-loop join in body order."""
    jtable = preinterp_table(j, ap.signature)
    return _fixpoint(ap, jtable, j.n, query=aquery) is not None


def query_fails_table(ap: AbstractProgram, aquery: AbstractClause, jtable: dict, n: int) -> bool:
    """Table-level entry point for enumeration loops."""
    return _fixpoint(ap, jtable, n, query=aquery) is not None


# -- direct evaluation of the original clauses (term assignments) ----------


def _eval_term_env(t, env, j):
    if isinstance(t, Var):
        return env.get(t.id)
    vals = []
    for a in t.args:
        v = _eval_term_env(a, env, j)
        if v is None:
            return None
        vals.append(v)
    out = j.lookup(t.functor, tuple(vals))
    if out is None:
        raise PartialPreInterpretation(t.functor, tuple(vals))
    return out


def _match_term(t, value, env, trail, j, inverse):
    """Match term t against a domain value, binding variables in env."""
    if isinstance(t, Var):
        cur = env.get(t.id)
        if cur is None:
            env[t.id] = value
            trail.append(t.id)
            return True
        return cur == value
    v = _eval_term_env(t, env, j)
    if v is not None:
        return v == value
    for inputs, out in inverse.get(t.functor, ()):
        if out != value:
            continue
        mark = len(trail)
        ok = True
        for sub, d in zip(t.args, inputs):
            if not _match_term(sub, d, env, trail, j, inverse):
                ok = False
                break
        if ok:
            return True
        while len(trail) > mark:
            env.pop(trail.pop())
    return False


def _match_atoms(atoms, start, env, rels, j, inverse):
    if start == len(atoms):
        yield True
        return
    atom = atoms[start]
    for tup in rels.get(atom.predicate, ()):
        trail = []
        ok = True
        for t, value in zip(atom.args, tup):
            if not _match_term(t, value, env, trail, j, inverse):
                ok = False
                break
        if ok:
            yield from _match_atoms(atoms, start + 1, env, rels, j, inverse)
        while trail:
            env.pop(trail.pop())


def _clause_vars(cl) -> set:
    seen: set = set()

    def walk(t):
        if isinstance(t, Var):
            seen.add(t.id)
        else:
            for a in t.args:
                walk(a)

    for atom in (cl.head, *cl.body):
        for t in atom.args:
            walk(t)
    return seen


def direct_least_model(program: Program, j: PreInterpretation, query: Optional[Query] = None) -> dict:
    """Least model computed on the original clauses via term assignment."""
    functors, predicates = collect_signature(program, query)
    inverse: dict = {f: [] for f in functors}
    for f in functors:
        for inputs in itertools.product(range(j.n), repeat=f.arity):
            out = j.lookup(f, inputs)
            if out is None:
                raise PartialPreInterpretation(f, inputs)
            inverse[f].append((inputs, out))
    rels: dict = {p: set() for p in predicates}
    clause_vars = [(cl, sorted(_clause_vars(cl))) for cl in program.clauses]
    changed = True
    while changed:
        changed = False
        for cl, allvars in clause_vars:
            env: dict = {}
            found = []
            for _ in _match_atoms(cl.body, 0, env, rels, j, inverse):
                unbound = [v for v in allvars if v not in env]
                for combo in itertools.product(range(j.n), repeat=len(unbound)):
                    for v, d in zip(unbound, combo):
                        env[v] = d
                    found.append(tuple(_eval_term_env(t, env, j) for t in cl.head.args))
                for v in unbound:
                    env.pop(v)
            p = cl.head.predicate
            for tup in found:
                if tup not in rels[p]:
                    rels[p].add(tup)
                    changed = True
    return {p: frozenset(ts) for p, ts in rels.items()}


def direct_query_fails(program: Program, query: Query, j: PreInterpretation) -> bool:
    rels = direct_least_model(program, j, query)
    functors, _ = collect_signature(program, query)
    inverse: dict = {f: [] for f in functors}
    for f in functors:
        for inputs in itertools.product(range(j.n), repeat=f.arity):
            inverse[f].append((inputs, j.lookup(f, inputs)))
    mutable = {p: set(ts) for p, ts in rels.items()}
    for _ in _match_atoms(query.body, 0, {}, mutable, j, inverse):
        return False
    return True


# -- certificates ----------------------------------------------------------


class CertificateError(Exception):
    pass


@dataclass(frozen=True)
class Certificate:
    """A total pre-interpretation claimed to falsify the query."""

    digest: str
    query_text: str
    preinterp: PreInterpretation


def format_certificate(cert: Certificate) -> str:
    return (
        "# prefail failure certificate\n"
        f"program sha256:{cert.digest}\n"
        f"query: {cert.query_text}\n" + format_preinterp(cert.preinterp)
    )


def parse_certificate(text: str) -> Certificate:
    digest = None
    query_text = None
    body_lines = []
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if ln.startswith("program sha256:"):
            digest = ln[len("program sha256:") :].strip()
        elif ln.startswith("query:"):
            query_text = ln[len("query:") :].strip()
        else:
            body_lines.append(ln)
    if digest is None or query_text is None:
        raise CertificateError("certificate is missing its digest or query line")
    return Certificate(digest, query_text, parse_preinterp("\n".join(body_lines)))


def make_certificate(program: Program, query: Query, j: PreInterpretation) -> Certificate:
    functors, _ = collect_signature(program, query)
    return Certificate(program_digest(program, query), pretty_query(query), j.complete(functors))


def verify_certificate(program: Program, query: Query, cert: Certificate) -> bool:
    """Recompile from the parsed program and evaluate; no engine state is
    consulted.  Raises on digest mismatch or a partial pre-interpretation."""
    if cert.digest != program_digest(program, query):
        raise CertificateError("certificate digest does not match the program")
    functors, _ = collect_signature(program, query)
    if not cert.preinterp.is_total(functors):
        raise PartialPreInterpretation(None, ())
    ap, aquery = abstract_compile(program, query)
    return query_fails(ap, aquery, cert.preinterp)
