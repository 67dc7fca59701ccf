import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefail.preinterp import (
    Component,
    PreInterpretation,
    Undetermined,
    apply_permutation,
    format_preinterp,
    parse_preinterp,
    permute_components,
)
from prefail.syntax import FunctorSymbol, intern_term

ZERO = FunctorSymbol("zero", 0)
S = FunctorSymbol("s", 1)


def example1():
    # zero -> e(0), s(e) -> o(1), s(o) -> e(0)
    return PreInterpretation(2, {(ZERO, ()): 0, (S, (0,)): 1, (S, (1,)): 0})


def num(k):
    t = intern_term(ZERO)
    for _ in range(k):
        t = intern_term(S, (t,))
    return t


def test_eval_term_example1():
    assert example1().eval_term(num(2)) == 0  # s(s(zero)) is even


def test_eval_constant():
    a = FunctorSymbol("a", 0)
    j = PreInterpretation(3, {(a, ()): 2})
    assert j.eval_term(intern_term(a)) == 2


def test_eval_three_lookups():
    j = PreInterpretation(3, {(ZERO, ()): 1, (S, (1,)): 2, (S, (2,)): 1})
    assert j.eval_term(num(3)) == 2


def test_eval_reports_first_missing_component():
    j = PreInterpretation(2, {(ZERO, ()): 0})
    out = j.eval_term(num(2))
    assert out == Undetermined(S, (0,))


def test_complete_identity_on_total():
    j = example1().complete([ZERO, S])
    assert j == example1()


def test_complete_fills_with_d0():
    a = FunctorSymbol("a", 0)
    j = PreInterpretation(2).complete([a])
    assert j.lookup(a, ()) == 0


def test_complete_partial_solution_still_fails(odd_even):
    from prefail.abstraction import abstract_compile
    from prefail.leastmodel import query_fails

    program, query = odd_even
    ap, aq = abstract_compile(program, query)
    partial = PreInterpretation(2, {(ZERO, ()): 0, (S, (0,)): 1})
    total = partial.complete(ap.signature.functors)
    assert total.lookup(S, (1,)) == 0
    assert total.is_total(ap.signature.functors)
    assert query_fails(ap, aq, total)


def test_apply_identity():
    assert apply_permutation(example1(), (0, 1)) == example1()


def test_apply_swap():
    swapped = apply_permutation(example1(), (1, 0))
    assert swapped.table == {(ZERO, ()): 1, (S, (1,)): 0, (S, (0,)): 1}


def test_permute_conflict_set():
    f, a = FunctorSymbol("f", 1), FunctorSymbol("a", 0)
    conflict = {Component(f, (1,), 1), Component(a, (), 2)}
    image = permute_components(conflict, (0, 1, 3, 2))
    assert image == {Component(f, (1,), 1), Component(a, (), 3)}


def test_permutation_must_be_bijective():
    with pytest.raises(ValueError):
        apply_permutation(example1(), (0, 0))


@given(st.permutations(range(3)), st.integers(0, 12))
@settings(max_examples=40, deadline=None)
def test_eval_commutes_with_permutation(pi, k):
    j = PreInterpretation(3, {(ZERO, ()): 1, (S, (0,)): 0, (S, (1,)): 2, (S, (2,)): 1})
    t = num(k)
    assert apply_permutation(j, tuple(pi)).eval_term(t) == pi[j.eval_term(t)]


def test_serialization_round_trip():
    j = example1()
    text = format_preinterp(j)
    assert text.splitlines()[0] == "domain 2"
    assert parse_preinterp(text) == j
    # component lines are sorted lexicographically
    lines = text.splitlines()[1:]
    assert lines == sorted(lines)


def test_isomorphism_preserves_failure_on_corpus(corpus):
    from prefail.abstraction import abstract_compile
    from prefail.leastmodel import query_fails_table, preinterp_table
    from conftest import load
    import random

    rng = random.Random(3)
    for name in ("odd_even", "multiseto", "multisetl", "wicked_oe"):
        entry, program, query = load(corpus, name)
        ap, aq = abstract_compile(program, query)
        for n in (2, 3):
            for _ in range(4):
                table = {}
                for f in ap.signature.functors:
                    for inputs in itertools.product(range(n), repeat=f.arity):
                        table[(f, inputs)] = rng.randrange(n)
                j = PreInterpretation(n, table)
                pi = list(range(n))
                rng.shuffle(pi)
                jp = apply_permutation(j, tuple(pi))
                assert query_fails_table(
                    ap, aq, preinterp_table(j, ap.signature), n
                ) == query_fails_table(ap, aq, preinterp_table(jp, ap.signature), n)
