import itertools
import math

import numpy as np
import pytest

from nlgame_bounds.algebra import Generator, check_assignment
from nlgame_bounds.games import Game, GameForm, builtin
from nlgame_bounds.hierarchy import LevelSpec, build_moment_sdp, relaxation_bound
from nlgame_bounds.oracles import (
    DeterministicStrategy,
    best_classical_strategy,
    classical_value,
    random_valid_assignment,
    seesaw,
    seesaw_lower_bound,
)
from nlgame_bounds.solver import solve
from tests.hierarchy_test import random_game


def all_win() -> Game:
    payoff = {((a, b), (0, 0)): 1.0 for a, b in itertools.product(range(2), repeat=2)}
    return Game("all-win", [[2], [2]], GameForm.PROBABILITY, distribution={(0, 0): 1.0}, payoff=payoff)


def test_classical_value() -> None:
    assert classical_value(builtin("chsh-game")) == pytest.approx(0.75)
    assert classical_value(builtin("chsh-correlator")) == pytest.approx(2)
    assert classical_value(builtin("i3322")) == pytest.approx(0, abs=1e-12)
    assert classical_value(all_win()) == pytest.approx(1)


def test_best_classical_strategy() -> None:
    value, strategy = best_classical_strategy(builtin("chsh-game"))
    assert value == pytest.approx(0.75)
    # first maximum in lexicographic order
    assert strategy == DeterministicStrategy(((0, 0), (0, 0)))

    value, strategy = best_classical_strategy(builtin("chsh-correlator"))
    assert value == pytest.approx(2)
    assert strategy.outputs == ((0, 0), (0, 0))

    with pytest.raises(ValueError) as e:
        best_classical_strategy(builtin("chsh-game"), limit=15)
    assert str(e.value) == "16 deterministic strategies exceed the limit of 15"


def test_random_valid_assignment() -> None:
    for name in ("chsh-game", "chsh-correlator", "yao"):
        game = builtin(name)
        for dim in (1, 2, 3):
            assignment = random_valid_assignment(game, dim, seed=dim)
            assert check_assignment(assignment) == dim ** game.num_parties

    game = builtin("chsh-game")
    first = random_valid_assignment(game, 2, seed=5)
    second = random_valid_assignment(game, 2, seed=5)
    other = random_valid_assignment(game, 2, seed=6)
    letter = Generator(0, 0, 0)
    assert set(first) == {Generator(p, s, a) for p in range(2) for s in range(2) for a in range(2)}
    np.testing.assert_array_equal(first[letter], second[letter])
    assert not np.allclose(first[Generator(1, 1, 0)], other[Generator(1, 1, 0)])

    with pytest.raises(ValueError) as e:
        random_valid_assignment(game, 0, seed=0)
    assert str(e.value) == "Dimension must be at least 1, got 0"


def test_seesaw_chsh() -> None:
    game = builtin("chsh-correlator")
    state = seesaw(game, dim=2, restarts=10, seed=0)
    assert state.value >= 2 * math.sqrt(2) - 1e-6
    assert state.value <= 2 * math.sqrt(2) + 1e-9
    assert state.sweeps == len(state.history) - 1
    for earlier, later in zip(state.history, state.history[1:]):
        assert later >= earlier - 1e-9
    assert check_assignment(state.assignment(game), tol=1e-8) == 4
    assert repr(state).startswith("SeeSawState(dim=2, value=")

    # the first level is tight for XOR games
    solution = solve(build_moment_sdp(game, LevelSpec.full(1)).sdp)
    assert relaxation_bound(solution) == pytest.approx(state.value, abs=1e-6)


def test_seesaw_chsh_game() -> None:
    value = seesaw_lower_bound(builtin("chsh-game"), dim=2, restarts=10, seed=1)
    assert value == pytest.approx((2 + math.sqrt(2)) / 4, abs=1e-6)


def test_seesaw_deterministic() -> None:
    game = builtin("chsh-correlator")
    assert seesaw(game, restarts=3, seed=4).value == seesaw(game, restarts=3, seed=4).value


def test_seesaw_dimension_one() -> None:
    for name in ("chsh-game", "chsh-correlator", "i3322"):
        game = builtin(name)
        assert seesaw_lower_bound(game, dim=1, restarts=5) <= classical_value(game) + 1e-9


def test_seesaw_progress() -> None:
    seen = []

    def progress(runs):
        for run in runs:
            seen.append(run)
            yield run

    seesaw(builtin("chsh-correlator"), restarts=3, progress=progress)
    assert seen == [0, 1, 2]


def test_seesaw_errors() -> None:
    with pytest.raises(ValueError) as e:
        seesaw(builtin("chsh-correlator"), dim=0)
    assert str(e.value) == "Dimension and restarts must be at least 1"

    with pytest.raises(ValueError) as e:
        seesaw(builtin("chsh-correlator"), restarts=0)
    assert str(e.value) == "Dimension and restarts must be at least 1"


def test_value_sandwich() -> None:
    # classical <= see-saw <= level 2 <= level 1
    for seed in range(20):
        game = random_game(seed)
        classical = classical_value(game)
        quantum = seesaw_lower_bound(game, dim=2, restarts=10, seed=seed)
        bounds = []
        for level in (1, 2):
            solution = solve(build_moment_sdp(game, LevelSpec.full(level)).sdp)
            assert solution.optimal
            bounds.append(relaxation_bound(solution))
        assert classical <= quantum + 1e-6
        assert quantum <= bounds[1] + 1e-6
        assert bounds[1] <= bounds[0] + 1e-6


def test_i3322_sandwich() -> None:
    game = builtin("i3322")
    quantum = seesaw_lower_bound(game, dim=2, restarts=20, seed=7)
    assert quantum >= 0.249999
    assert classical_value(game) <= quantum + 1e-9
    solution = solve(build_moment_sdp(game, LevelSpec.full(2)).sdp)
    assert quantum <= relaxation_bound(solution) + 1e-6
