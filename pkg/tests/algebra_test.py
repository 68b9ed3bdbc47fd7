import itertools

import numpy as np
import pytest

from nlgame_bounds.algebra import (
    IDENTITY,
    MAX_WORD_LENGTH,
    ZERO,
    Generator,
    Mode,
    Monomial,
    NCPolynomial,
    Relation,
    RelationKind,
    RewriteStep,
    Schema,
    SchemaError,
    check_assignment,
    dump_polynomial,
    evaluate_word,
    instantiate,
    parse_monomial,
    parse_word,
    reduce_with_trace,
    reduce_word,
    relation_term,
)
from nlgame_bounds.games import Game, GameForm, builtin
from nlgame_bounds.oracles import random_valid_assignment

A1 = Generator(0, 0)
A2 = Generator(0, 1)
B1 = Generator(1, 0)
B2 = Generator(1, 1)
P = Generator(0, 0, 0)
Q = Generator(0, 0, 1)
R = Generator(0, 1, 0)
S = Generator(1, 0, 0)


def test_generator() -> None:
    assert str(A1) == "A1"
    assert str(B2) == "B2"
    assert str(Q) == "A1:1"
    assert A1.mode == Mode.OBSERVABLE
    assert P.mode == Mode.PROJECTOR


def test_schema() -> None:
    schema = Schema([[2, 3], [2]], Mode.PROJECTOR)
    assert schema.num_parties == 2
    assert schema.settings == (2, 1)
    assert [str(x) for x in schema.letters(0)] == ["A1:0", "A1:1", "A2:0", "A2:1", "A2:2"]
    assert [str(x) for x in schema.letters(0, reduced=True)] == ["A1:0", "A2:0", "A2:1"]
    assert [str(x) for x in Schema([[2, 2]], Mode.OBSERVABLE).letters(0)] == ["A1", "A2"]

    with pytest.raises(SchemaError) as e:
        Schema([], Mode.PROJECTOR)
    assert str(e.value) == "At least one party is required"

    with pytest.raises(SchemaError) as e:
        Schema([[2, 3]], Mode.OBSERVABLE)
    assert str(e.value) == "Observable generators require 2 outcomes per setting"

    with pytest.raises(SchemaError) as e:
        Schema([[2], [1]], Mode.PROJECTOR)
    assert str(e.value) == "Party B has a setting with fewer than 2 outcomes"

    with pytest.raises(SchemaError) as e:
        schema.check(Generator(0, 2, 0))
    assert str(e.value) == "Generator A3:0: no such setting"

    with pytest.raises(SchemaError) as e:
        schema.check(Generator(0, 0, 2))
    assert str(e.value) == "Generator A1:2: no such outcome"

    with pytest.raises(SchemaError) as e:
        schema.check(A1)
    assert str(e.value) == "Generator A1 is not in projector mode"


def test_reduce_word_observables() -> None:
    assert reduce_word([B1, A1]) == Monomial([A1, B1])
    assert reduce_word([A1, A1]) == IDENTITY
    assert reduce_word([A1, B1, A1]) == Monomial([B1])
    assert reduce_word([A1, A2, A2, A1]) == IDENTITY
    assert reduce_word([A1, A2, A1]) == Monomial([A1, A2, A1])
    assert reduce_word([B2, A2, B1, A1]) == Monomial([A2, A1, B2, B1])


def test_reduce_word_projectors() -> None:
    assert reduce_word([P, P]) == Monomial([P])
    assert reduce_word([P, Q]) == ZERO
    assert reduce_word([P, S, Q]) == ZERO
    assert reduce_word([P, R, P]) == Monomial([P, R, P])
    assert reduce_word([S, P, S, R]) == Monomial([P, R, S])
    assert reduce_word([P, R, R, P]) == Monomial([P, R, P])


def test_reduce_word_errors() -> None:
    with pytest.raises(SchemaError) as e:
        reduce_word([A1, A2] * 13)
    assert str(e.value) == "Word of length 26 exceeds the maximum of {} letters".format(MAX_WORD_LENGTH)

    with pytest.raises(SchemaError) as e:
        reduce_word([A1, P])
    assert str(e.value) == "Word mixes projector and observable generators"

    with pytest.raises(SchemaError) as e:
        reduce_word([Generator(0, 2)], Schema([[2, 2], [2, 2]], Mode.OBSERVABLE))
    assert str(e.value) == "Generator A3: no such setting"


def test_reduce_with_trace() -> None:
    monomial, steps = reduce_with_trace([P, P])
    assert monomial == Monomial([P])
    assert steps == [RewriteStep((), Relation(RelationKind.IDEMPOTENCE, (P,)), (), -1.0)]

    monomial, steps = reduce_with_trace([P, Q])
    assert monomial == ZERO
    assert steps == [RewriteStep((), Relation(RelationKind.ORTHOGONALITY, (P, Q)), (), 1.0)]

    monomial, steps = reduce_with_trace([A1, B1, A1])
    assert monomial == Monomial([B1])
    assert steps == [RewriteStep((), Relation(RelationKind.IDEMPOTENCE, (A1,)), (B1,), -1.0)]

    monomial, steps = reduce_with_trace([A2, A1, A1, B1])
    assert monomial == Monomial([A2, B1])
    assert steps == [RewriteStep((A2,), Relation(RelationKind.IDEMPOTENCE, (A1,)), (B1,), -1.0)]

    assert reduce_with_trace([A1, B1]) == (Monomial([A1, B1]), [])


def test_trace_rebuilds_the_word() -> None:
    # word = reduced + sum coefficient * prefix p suffix, with p expanded in the free algebra
    for word in [(P, P, R, R), (R, P, P, S, R), (A1, A2, A2, A1, B1, B1), (P, R, Q)]:
        monomial, steps = reduce_with_trace(word)
        terms = {}
        if not monomial.is_zero:
            terms[monomial.word] = 1.0
        for step in steps:
            for coefficient, letters in step.relation.terms():
                key = tuple(sorted(step.prefix + letters + step.suffix, key=lambda x: x.party))
                terms[key] = terms.get(key, 0.0) + step.coefficient * coefficient
        expected = tuple(sorted(word, key=lambda x: x.party))
        assert {k: v for k, v in terms.items() if v != 0} == {expected: 1.0}


def test_monomial() -> None:
    m = parse_monomial("A1:0 A2:0")
    assert str(m) == "A1:0 A2:0"
    assert m.degree == 2
    assert str(m.adjoint()) == "A2:0 A1:0"
    assert not m.is_hermitian()
    assert parse_monomial("A1:0 B1:0").is_hermitian()
    assert parse_monomial("A1:0 A2:0 A1:0").is_hermitian()
    assert parse_monomial("A1 A2 B1").shape(3) == (2, 1, 0)
    assert str(IDENTITY) == "I"
    assert str(ZERO) == "0"
    assert IDENTITY.is_identity
    assert sorted([parse_monomial("B1"), IDENTITY, parse_monomial("A1 B1"), parse_monomial("A1")]) == [
        IDENTITY,
        parse_monomial("A1"),
        parse_monomial("B1"),
        parse_monomial("A1 B1"),
    ]


def test_parse_word() -> None:
    assert parse_word("I") == ()
    assert parse_word("A1 B2") == (A1, B2)
    assert parse_word("A1B2") == (A1, B2)
    assert parse_word("A1:1 B1:0") == (Q, S)
    assert parse_monomial("B1 A1") == Monomial([A1, B1])
    assert parse_monomial("0") == ZERO
    assert parse_monomial("A1:0 A1:1") == ZERO

    with pytest.raises(ValueError) as e:
        parse_word("A0")
    assert str(e.value) == "Could not parse generator A0"

    with pytest.raises(ValueError) as e:
        parse_word("a1")
    assert str(e.value) == "Could not parse monomial a1"

    with pytest.raises(ValueError) as e:
        parse_word("0")
    assert str(e.value) == "The zero monomial is not a word"


def test_polynomial() -> None:
    x = NCPolynomial.from_word([A1]) + NCPolynomial.from_word([B1])
    square = x * x
    assert square == NCPolynomial({IDENTITY: 2, Monomial([A1, B1]): 2})
    assert dump_polynomial(square) == "2 * I + 2 * A1 B1"
    assert square.degree == 2
    assert len(square) == 2
    assert square.coefficient(IDENTITY) == 2
    assert square.coefficient(Monomial([A2])) == 0
    assert (square - square) == NCPolynomial()
    assert dump_polynomial(NCPolynomial()) == "0"
    assert (1 - NCPolynomial.from_word([A1])) == NCPolynomial({IDENTITY: 1, Monomial([A1]): -1})
    assert (2 * x).max_abs_coefficient() == 2

    y = NCPolynomial.from_word([A1, A2], 3.0)
    assert not y.is_hermitian()
    assert y.adjoint() == NCPolynomial.from_word([A2, A1], 3.0)
    assert (y + y.adjoint()).is_hermitian()

    projectors = NCPolynomial.from_word([P]) * NCPolynomial.from_word([Q])
    assert projectors == NCPolynomial()


def test_relation_term() -> None:
    completeness = Relation.completeness(0, 1, 2)
    assert str(completeness) == "complete A2:0 A2:1"
    term = relation_term(IDENTITY, completeness, IDENTITY)
    assert term == NCPolynomial(
        {Monomial([Generator(0, 1, 0)]): 1, Monomial([Generator(0, 1, 1)]): 1, IDENTITY: -1}
    )

    # idempotence and orthogonality vanish once reduced
    idempotence = Relation(RelationKind.IDEMPOTENCE, (A1,))
    assert relation_term(Monomial([B1]), idempotence, IDENTITY) == NCPolynomial()
    orthogonality = Relation(RelationKind.ORTHOGONALITY, (P, Q))
    assert relation_term(IDENTITY, orthogonality, Monomial([S])) == NCPolynomial()
    assert Relation(RelationKind.IDEMPOTENCE, (P,)).terms() == [(1.0, (P,)), (-1.0, (P, P))]


def test_check_assignment() -> None:
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    sz = np.array([[1.0, 0.0], [0.0, -1.0]])
    assert check_assignment({A1: sz, A2: sx}) == 2

    with pytest.raises(ValueError) as e:
        check_assignment({A1: sx, B1: sz})
    assert str(e.value) == "Operators A1 and B1 of different parties do not commute"

    with pytest.raises(ValueError) as e:
        check_assignment({P: np.array([[2.0]]), Q: np.array([[0.0]])})
    assert str(e.value) == "Matrix for A1:0 is not a projector"

    with pytest.raises(ValueError) as e:
        check_assignment({P: np.diag([1.0, 0.0])})
    assert str(e.value) == "Projectors of A1 do not sum to the identity"

    with pytest.raises(ValueError) as e:
        check_assignment({P: np.diag([1.0, 0.0]), Q: np.eye(2)})
    assert str(e.value) == "Projectors A1:0 and A1:1 are not orthogonal"

    with pytest.raises(ValueError) as e:
        check_assignment({A1: np.array([[0.0, 1.0], [0.0, 0.0]])})
    assert str(e.value) == "Matrix for A1 is not Hermitian"

    with pytest.raises(SchemaError) as e:
        check_assignment({A1: sz, P: np.eye(2)})
    assert str(e.value) == "Assignment mixes projector and observable generators"


def test_instantiate() -> None:
    sz = np.diag([1.0, -1.0])
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    p = NCPolynomial.from_word([A1, A2]) + NCPolynomial.from_word([A2, A1])
    assert np.allclose(instantiate(p, {A1: sz, A2: sx}), np.zeros((2, 2)))
    assert np.allclose(instantiate(NCPolynomial.constant(3), {A1: sz}), 3 * np.eye(2))


def test_reduction_matches_matrices() -> None:
    games = [
        builtin("chsh-correlator"),
        builtin("chsh-game"),
        Game("mixed", [[3, 2], [2, 3]], GameForm.PROBABILITY, payoff={}),
        Game("four", [[4, 3], [2, 4]], GameForm.PROBABILITY, payoff={}),
    ]
    rng = np.random.default_rng(2024)
    for game in games:
        letters = [x for party in range(game.num_parties) for x in game.schema.letters(party)]
        assignments = [
            random_valid_assignment(game, dim, seed) for dim, seed in itertools.product([2, 3, 4], range(4))
        ]
        for _ in range(100):
            word = tuple(letters[i] for i in rng.integers(len(letters), size=int(rng.integers(0, 7))))
            reduced = NCPolynomial({reduce_word(word): 1.0})
            for assignment in assignments:
                size = next(iter(assignment.values())).shape[0]
                expected = evaluate_word(word, assignment, size)
                assert np.max(np.abs(instantiate(reduced, assignment) - expected)) <= 1e-10
