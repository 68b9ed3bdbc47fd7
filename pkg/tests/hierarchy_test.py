import itertools
import math

import numpy as np
import pytest

from nlgame_bounds.algebra import IDENTITY, RelationKind, SchemaError, parse_monomial, relation_term
from nlgame_bounds.games import Game, GameForm, bell_operator, builtin
from nlgame_bounds.hierarchy import (
    BasisTooSmallError,
    Formulation,
    LevelKind,
    LevelResult,
    LevelSpec,
    MonomialBasis,
    build_moment_sdp,
    build_relaxation,
    build_sos_sdp,
    eliminate_last_outcomes,
    generate_basis,
    is_monotone,
    level_sequence,
    moment_index,
    parse_custom_basis,
    relaxation_bound,
)
from nlgame_bounds.sdp import Form, dump_sdpa, parse_sdpa
from nlgame_bounds.solver import Status, solve

CHSH_QUANTUM = 2 * math.sqrt(2)
I3322_BOUNDS = {"full:1": 0.375, "1+AB": 0.25147090, "full:2": 0.25093972}


def monomials(*texts):
    return [parse_monomial(text) for text in texts]


def bound(game_name: str, level: str, formulation: Formulation = Formulation.MOMENT) -> float:
    problem = build_relaxation(builtin(game_name), LevelSpec.parse(level), formulation)
    solution = solve(problem.sdp)
    assert solution.status == Status.OPTIMAL
    return relaxation_bound(solution)


def test_level_spec() -> None:
    level = LevelSpec.parse("full:2")
    assert level.kind == LevelKind.FULL
    assert level.degree == 2
    assert str(level) == "full:2"

    level = LevelSpec.parse("1+AB")
    assert level.kind == LevelKind.SHAPED
    assert level.degree == 1
    assert level.shapes == ((0, 1),)
    assert str(level) == "1+AB"

    assert str(LevelSpec.parse("1+AB+AA+BB")) == "1+AA+AB+BB"
    assert str(LevelSpec.parse("AB")) == "AB"

    level = LevelSpec.parse("custom:yao25.basis")
    assert level.kind == LevelKind.CUSTOM
    assert len(level.monomials) == 25
    assert str(level) == "custom:yao25.basis"
    assert str(LevelSpec.custom(monomials("I", "A1"))) == "custom:2 monomials"


def test_level_spec_errors() -> None:
    with pytest.raises(ValueError) as e:
        LevelSpec.parse("full:x")
    assert str(e.value) == "Could not parse level full:x"

    with pytest.raises(ValueError) as e:
        LevelSpec.parse("full:0")
    assert str(e.value) == "Level must be at least 1, got 0"

    with pytest.raises(ValueError) as e:
        LevelSpec.parse("1+ab")
    assert str(e.value) == "Could not parse level 1+ab"

    with pytest.raises(SchemaError) as e:
        generate_basis(builtin("chsh-correlator"), LevelSpec.parse("1+AC"))
    assert str(e.value) == "Level 1+AC names a party beyond B"


def test_custom_basis() -> None:
    level = parse_custom_basis("# comment\nI\n\nA1 B2  # trailing\n", "custom:test")
    assert level.monomials == tuple(monomials("I", "A1 B2"))
    assert str(level) == "custom:test"

    with pytest.raises(ValueError) as e:
        parse_custom_basis("I\nB1 A1\n")
    assert str(e.value) == "Line 2: B1 A1 is not canonical (reduces to A1 B1)"

    with pytest.raises(ValueError) as e:
        parse_custom_basis("I\nfoo\n")
    assert str(e.value) == "Line 2: Could not parse monomial foo"

    with pytest.raises(ValueError) as e:
        generate_basis(builtin("chsh-correlator"), LevelSpec.custom(monomials("A1", "B1")))
    assert str(e.value) == "Custom basis has no identity"

    with pytest.raises(SchemaError):
        generate_basis(builtin("chsh-correlator"), LevelSpec.custom(monomials("I", "C1")))


def test_custom_basis_file(tmp_path) -> None:
    path = tmp_path / "small.basis"
    path.write_text("A1\nI\nB1\n")
    level = LevelSpec.parse("custom:{}".format(path))
    basis = generate_basis(builtin("chsh-correlator"), level)
    # the identity is moved first
    assert list(basis) == monomials("I", "A1", "B1")


def test_monomial_basis() -> None:
    basis = MonomialBasis(monomials("I", "A1", "B1"))
    assert len(basis) == 3
    assert basis.index(parse_monomial("B1")) == 2
    assert basis[1] == parse_monomial("A1")

    with pytest.raises(ValueError) as e:
        MonomialBasis([])
    assert str(e.value) == "Empty basis"

    with pytest.raises(ValueError) as e:
        MonomialBasis(monomials("A1", "I"))
    assert str(e.value) == "Basis must start with the identity"

    with pytest.raises(ValueError) as e:
        MonomialBasis(monomials("I", "A1", "A1"))
    assert str(e.value) == "Duplicate basis monomial A1"


def test_generate_basis() -> None:
    chsh = builtin("chsh-correlator")
    basis = generate_basis(chsh, LevelSpec.full(1))
    assert [str(m) for m in basis] == ["I", "A1", "A2", "B1", "B2"]
    assert len(generate_basis(chsh, LevelSpec.full(2))) == 13

    game = builtin("chsh-game")
    # the last outcome of every setting is left out
    assert [str(m) for m in generate_basis(game, LevelSpec.full(1))] == ["I", "A1:0", "A2:0", "B1:0", "B2:0"]

    i3322 = builtin("i3322")
    assert len(generate_basis(i3322, LevelSpec.full(1))) == 7
    assert len(generate_basis(i3322, LevelSpec.parse("1+AB"))) == 16
    assert len(generate_basis(i3322, LevelSpec.full(2))) == 28
    assert len(generate_basis(i3322, LevelSpec.full(3))) == 88

    assert len(generate_basis(builtin("yao"), LevelSpec.parse("custom:yao25.basis"))) == 25


def test_moment_index() -> None:
    basis = generate_basis(builtin("chsh-correlator"), LevelSpec.full(1))
    index, annihilated = moment_index(basis)
    assert annihilated == []
    assert index[IDENTITY] == [(i, i) for i in range(5)]
    assert index[parse_monomial("A1 B1")] == [(1, 3), (3, 1)]
    assert index[parse_monomial("A1 A2")] == [(1, 2)]
    assert index[parse_monomial("A2 A1")] == [(2, 1)]

    basis = MonomialBasis(monomials("I", "A1:0", "A1:1"))
    index, annihilated = moment_index(basis)
    assert annihilated == [(1, 2), (2, 1)]
    assert index[parse_monomial("A1:0")] == [(0, 1), (1, 0), (1, 1)]


def test_eliminate_last_outcomes() -> None:
    game = builtin("chsh-game")
    original = bell_operator(game).as_polynomial()
    rewritten, eliminations = eliminate_last_outcomes(original, game.schema)
    assert eliminations
    for m in rewritten:
        assert all(x.outcome == 0 for x in m.word)
    for elimination in eliminations:
        assert elimination.relation.kind == RelationKind.COMPLETENESS

    total = rewritten
    for e in eliminations:
        total = total + e.coefficient * relation_term(e.left, e.relation, e.right)
    assert (total - original).max_abs_coefficient() <= 1e-12

    chsh = builtin("chsh-correlator")
    polynomial = bell_operator(chsh).as_polynomial()
    assert eliminate_last_outcomes(polynomial, chsh.schema) == (polynomial, [])


def test_basis_too_small() -> None:
    with pytest.raises(BasisTooSmallError) as e:
        build_moment_sdp(builtin("chsh-correlator"), LevelSpec.custom(monomials("I", "A1", "A2")))
    assert str(e.value) == (
        "Basis of level custom:3 monomials too small: Bell monomial A1 B1 is not a product of basis elements"
    )


def test_relaxation_forms() -> None:
    game = builtin("chsh-correlator")
    moment = build_moment_sdp(game, LevelSpec.full(1))
    assert moment.sdp.form == Form.STANDARD
    assert moment.formulation == Formulation.MOMENT
    assert moment.sdp.block_sizes == (5,)
    assert moment.sdp.b[0] == 1

    sos = build_sos_sdp(game, LevelSpec.full(1))
    assert sos.sdp.form == Form.INEQUALITY
    assert sos.formulation == Formulation.SOS
    assert sos.sdp.b[0] == 1
    assert all(v == 0 for v in sos.sdp.b[1:])


def test_chsh_bounds() -> None:
    for formulation in Formulation:
        assert bound("chsh-correlator", "full:1", formulation) == pytest.approx(CHSH_QUANTUM, abs=1e-6)
        assert bound("chsh-game", "full:1", formulation) == pytest.approx((2 + math.sqrt(2)) / 4, abs=1e-6)
    assert bound("chsh-correlator", "full:2") == pytest.approx(CHSH_QUANTUM, abs=1e-6)


def test_i3322_bounds() -> None:
    for level, expected in I3322_BOUNDS.items():
        assert bound("i3322", level) == pytest.approx(expected, abs=1e-6)


def test_sos_matches_moment() -> None:
    for name, level in [("i3322", "1+AB"), ("chsh-game", "full:2")]:
        moment = bound(name, level, Formulation.MOMENT)
        sos = bound(name, level, Formulation.SOS)
        assert sos == pytest.approx(moment, abs=1e-6)


def test_yao_bound() -> None:
    for formulation in Formulation:
        assert bound("yao", "custom:yao25.basis", formulation) == pytest.approx(3 * math.sqrt(3), abs=1e-6)


@pytest.mark.slow
def test_i3322_level_3() -> None:
    assert bound("i3322", "full:3") == pytest.approx(0.25087556, abs=1e-6)


def test_sdpa_round_trip() -> None:
    for formulation in Formulation:
        problem = build_relaxation(builtin("i3322"), LevelSpec.parse("1+AB"), formulation)
        parsed = parse_sdpa(dump_sdpa(problem.sdp), problem.sdp.form)
        assert parsed == problem.sdp
        expected = relaxation_bound(solve(problem.sdp))
        assert relaxation_bound(solve(parsed)) == pytest.approx(expected, abs=1e-8)


def test_level_sequence() -> None:
    results = level_sequence(builtin("chsh-correlator"), 2)
    assert [r.level for r in results] == [1, 2]
    for result in results:
        assert result.status == Status.OPTIMAL
        assert result.bound == pytest.approx(CHSH_QUANTUM, abs=1e-6)
        assert result.seconds >= 0
    assert is_monotone(results)

    seen = []

    def progress(levels):
        for level in levels:
            seen.append(level)
            yield level

    level_sequence(builtin("chsh-correlator"), 1, progress=progress)
    assert seen == [1]


def random_game(seed: int) -> Game:
    rng = np.random.default_rng(seed)
    settings = [int(s) for s in rng.integers(2, 4, size=2)]
    inputs = list(itertools.product(*(range(s) for s in settings)))
    weights = rng.uniform(0.1, 1.0, len(inputs))
    payoff = {(a, s): float(rng.uniform()) for s in inputs for a in itertools.product(range(2), repeat=2)}
    return Game(
        "random-{}".format(seed),
        [[2] * s for s in settings],
        GameForm.PROBABILITY,
        distribution=dict(zip(inputs, weights / weights.sum())),
        payoff=payoff,
    )


def test_random_games_monotone() -> None:
    for seed in range(20):
        results = level_sequence(random_game(seed), 2)
        assert all(r.status == Status.OPTIMAL for r in results)
        assert results[1].bound <= results[0].bound + 1e-6
        assert is_monotone(results)


def test_is_monotone() -> None:
    optimal = Status.OPTIMAL
    assert is_monotone([])
    assert is_monotone([LevelResult(1, 0.375, optimal, 0), LevelResult(2, 0.2509, optimal, 0)])
    # solver noise is tolerated
    assert is_monotone([LevelResult(1, 1.0, optimal, 0), LevelResult(2, 1.0 + 1e-7, optimal, 0)])
    assert not is_monotone([LevelResult(1, 1.0, optimal, 0), LevelResult(2, 1.01, optimal, 0)])
    # failed levels are left out
    assert is_monotone(
        [
            LevelResult(1, 1.0, optimal, 0),
            LevelResult(2, 5.0, Status.MAX_ITERATIONS, 0),
            LevelResult(3, 0.9, optimal, 0),
        ]
    )
