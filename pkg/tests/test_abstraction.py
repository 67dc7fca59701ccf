import itertools
import random

import pytest

from prefail.abstraction import (
    ABD,
    CALL,
    Signature,
    abstract_compile,
    dump_abstract,
    format_abstract_clause,
    relational_form,
)
from prefail.leastmodel import direct_least_model, least_model
from prefail.preinterp import Component, PartialPreInterpretation, PreInterpretation
from prefail.syntax import FunctorSymbol, parse_program

from conftest import load


def test_fact_with_constant():
    program, query = parse_program("even(0). q :- even(X).", "q")
    ap, _ = abstract_compile(program, query)
    assert format_abstract_clause(ap.clauses[0], ap.signature) == "even(V0) :- p_0(V0)."


def test_functor_free_clause_is_unchanged():
    program, query = parse_program("p(X) :- q(X). main :- p(X).", "main")
    ap, _ = abstract_compile(program, query)
    cl = ap.clauses[0]
    assert cl.body == ((CALL, ap.signature.predicate_index[FunctorSymbol("q", 1)], (0,)),)


def test_nested_term_flattens_innermost_first():
    program, query = parse_program("p(f(a)). q :- p(X).", "q")
    ap, _ = abstract_compile(program, query)
    cl = ap.clauses[0]
    # p(X) <- p_a(Y), p_f(Y,X)
    assert [l[0] for l in cl.body] == [ABD, ABD]
    a_idx = ap.signature.functor_index[FunctorSymbol("a", 0)]
    f_idx = ap.signature.functor_index[FunctorSymbol("f", 1)]
    (t1, s1, args1), (t2, s2, args2) = cl.body
    assert s1 == a_idx and s2 == f_idx
    assert args2[0] == args1[0]  # the fresh result feeds the consumer
    assert cl.head[1] == (args2[1],)


def test_query_is_abstracted_identically(odd_even):
    program, query = odd_even
    ap, aq = abstract_compile(program, query)
    assert aq.head is None
    tags = [l[0] for l in aq.body]
    assert tags == [CALL, ABD, CALL]


def test_idempotent_on_functor_free_programs(corpus):
    # reparse the dumped abstract program: it has no compound terms, so a
    # second abstraction pass must not introduce anything
    entry, program, query = load(corpus, "odd_even")
    ap, aq = abstract_compile(program, query)
    text = dump_abstract(ap, aq).replace("false :- ", "q :- ")
    program2, query2 = parse_program(text, "q")
    ap2, aq2 = abstract_compile(program2, query2)
    for cl in ap2.clauses:
        assert not cl.abducibles
    assert not aq2.abducibles


def test_fresh_variable_linearity(corpus):
    for name in ("odd_even", "appendlast", "schedule", "blockpair2o"):
        entry, program, query = load(corpus, name)
        ap, aq = abstract_compile(program, query)
        for cl in list(ap.clauses) + [aq]:
            results = [l[2][-1] for l in cl.body if l[0] == ABD]
            assert len(results) == len(set(results))
            for lit in cl.body:
                if lit[0] != ABD:
                    continue
                r = lit[2][-1]
                occurrences = sum(a == r for a in (cl.head[1] if cl.head else ()))
                for l2 in cl.body:
                    occurrences += sum(a == r for a in l2[2])
                assert occurrences >= 2  # result position plus a consumer


def test_shared_ground_subterms_reuse_one_abducible():
    program, query = parse_program("p(f(a), f(a)). q :- p(X, Y).", "q")
    ap, _ = abstract_compile(program, query)
    cl = ap.clauses[0]
    assert len(cl.abducibles) == 2  # one for a, one for f(a)
    assert cl.head[1][0] == cl.head[1][1]


def _example1_preinterp():
    zero, s = FunctorSymbol("zero", 0), FunctorSymbol("s", 1)
    return PreInterpretation(2, {(zero, ()): 0, (s, (0,)): 1, (s, (1,)): 0})


def test_relational_form_example(odd_even):
    program, query = odd_even
    ap, _ = abstract_compile(program, query)
    facts = relational_form(_example1_preinterp(), ap.signature)
    zero, s = FunctorSymbol("zero", 0), FunctorSymbol("s", 1)
    assert facts == {
        Component(zero, (), 0),
        Component(s, (0,), 1),
        Component(s, (1,), 0),
    }


def test_relational_form_single_constant():
    program, query = parse_program("p(a). q :- p(X).", "q")
    ap, _ = abstract_compile(program, query)
    a = FunctorSymbol("a", 0)
    j = PreInterpretation(1, {(a, ()): 0})
    assert relational_form(j, ap.signature) == {Component(a, (), 0)}


def test_relational_form_size_appendlast(corpus):
    entry, program, query = load(corpus, "appendlast")
    ap, _ = abstract_compile(program, query)
    j = PreInterpretation(3).complete(ap.signature.functors)
    assert len(relational_form(j, ap.signature)) == 12
    assert ap.signature.components_total(3) == 12


def test_relational_form_requires_totality(odd_even):
    program, query = odd_even
    ap, _ = abstract_compile(program, query)
    j = PreInterpretation(2, {(FunctorSymbol("zero", 0), ()): 0})
    with pytest.raises(PartialPreInterpretation):
        relational_form(j, ap.signature)


def _random_preinterp(functors, n, rng):
    table = {}
    for f in functors:
        for inputs in itertools.product(range(n), repeat=f.arity):
            table[(f, inputs)] = rng.randrange(n)
    return PreInterpretation(n, table)


@pytest.mark.parametrize("name", ["odd_even", "multisetl", "appendlast"])
def test_abstraction_equivalence_sampled(corpus, name):
    # least Herbrand model of the abstracted program completed with J equals
    # the least model computed directly by term evaluation
    entry, program, query = load(corpus, name)
    ap, _ = abstract_compile(program, query)
    rng = random.Random(7)
    for trial in range(8):
        n = rng.choice([1, 2, 3])
        j = _random_preinterp(ap.signature.functors, n, rng)
        abstracted = least_model(ap, j)
        direct = direct_least_model(program, j, query)
        for p in direct:
            assert abstracted[p] == direct[p], (name, p, n)
