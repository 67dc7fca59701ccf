import pytest

from prefail.syntax import (
    CONS,
    NIL,
    FunctorSymbol,
    ParseError,
    Var,
    collect_signature,
    parse_clauses,
    parse_program,
    pretty_program,
    pretty_query,
    programs_equal,
)

from conftest import ODD_EVEN, load


def test_parse_odd_even_with_named_query():
    src = "even(zero). even(s(X)) :- odd(X). odd(s(X)) :- even(X). q :- even(X), even(s(X))."
    program, query = parse_program(src, "q")
    assert len(program.clauses) == 3
    assert pretty_query(query) == "even(V0), even(s(V0))"


def test_missing_query_predicate_is_an_error():
    with pytest.raises(ParseError, match="query predicate p/0 not found"):
        parse_program("p(a).", "p")


def test_appendlast_shape(corpus):
    entry, program, query = load(corpus, "appendlast")
    assert len(program.clauses) == 4
    assert len({cl.head.predicate for cl in program.clauses}) == 2
    assert pretty_query(query) == "app(V0,cons(a,nil),V1), last(V1,b)"


def test_default_query_is_last_zero_arity():
    src = "p(a). q0 :- p(X). q1 :- p(a)."
    program, query = parse_program(src)
    assert pretty_query(query) == "p(a)"
    # main wins when present
    src2 = "p(a). main :- p(X). q1 :- p(a)."
    _, query2 = parse_program(src2)
    assert pretty_query(query2) == "p(V0)"


def test_signature_odd_even(odd_even):
    program, query = odd_even
    functors, predicates = collect_signature(program, query)
    assert functors == {FunctorSymbol("zero", 0), FunctorSymbol("s", 1)}
    assert predicates == {FunctorSymbol("even", 1), FunctorSymbol("odd", 1)}


def test_signature_empty_program_query_only():
    program, query = parse_program("q :- p(X).", "q")
    functors, predicates = collect_signature(program, query)
    assert functors == frozenset()
    assert predicates == {FunctorSymbol("p", 1)}


def test_signature_multisetl(corpus):
    entry, program, query = load(corpus, "multisetl")
    functors, predicates = collect_signature(program, query)
    assert functors == {
        FunctorSymbol("a", 0),
        FunctorSymbol("b", 0),
        NIL,
        CONS,
    }
    assert predicates == {FunctorSymbol("sml", 2), FunctorSymbol("delete", 3)}


def test_same_name_at_two_arities_is_two_symbols():
    program, query = parse_program("f(f). q :- f(f(f)).", "q")
    functors, predicates = collect_signature(program, query)
    assert FunctorSymbol("f", 0) in functors and FunctorSymbol("f", 1) in functors
    assert predicates == {FunctorSymbol("f", 1)}


def test_list_sugar_desugars_to_cons_nil():
    a = parse_clauses("p([a]).")[0]
    b = parse_clauses("p(cons(a, nil)).")[0]
    assert a.head.args == b.head.args
    c = parse_clauses("p([H|T]).")[0]
    assert c.head.args[0].functor == CONS
    d = parse_clauses("p([a,b]).")[0]
    assert d.head.args[0].functor == CONS
    assert d.head.args[0].args[1].functor == CONS


def test_variable_hygiene_across_clauses():
    clauses = parse_clauses("p(X, Y). q(X).")
    ids1 = {t.id for t in clauses[0].head.args}
    ids2 = {t.id for t in clauses[1].head.args}
    assert not ids1 & ids2


def test_underscore_is_fresh_per_occurrence():
    (cl,) = parse_clauses("p(_, _).")
    assert cl.head.args[0].id != cl.head.args[1].id
    (cl2,) = parse_clauses("p(_X, _X).")
    assert cl2.head.args[0].id == cl2.head.args[1].id


def test_numerals_parse_as_constants():
    (cl,) = parse_clauses("p(0, s(0)).")
    assert cl.head.args[0].functor == FunctorSymbol("0", 0)


@pytest.mark.parametrize(
    "src",
    ["p(X) :- !.", "p(X) :- \\+ q(X).", "p(X) :- X = a.", "p(X) :- X < 2.", "p(X) :- q(X); r(X)."],
)
def test_non_definite_constructs_rejected(src):
    with pytest.raises(ParseError):
        parse_clauses(src)


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as e:
        parse_clauses("p(a.\nq )b.")
    assert e.value.line >= 1 and e.value.column >= 1


def test_round_trip_whole_corpus(corpus):
    for name in corpus:
        entry, text = corpus[name]
        program, query = parse_program(text, entry.get("query"))
        reparsed, _ = parse_program(
            pretty_program(program) + f"{entry.get('query', 'q')} :- {pretty_query(query)}.",
            entry.get("query", "q"),
        )
        assert programs_equal(program, reparsed), name
