import itertools
import logging
import math
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.stats import unitary_group

from .algebra import Generator, Mode, evaluate_word, instantiate
from .games import Game, bell_operator

logger = logging.getLogger(__name__)

STRATEGY_LIMIT = 10 ** 7
SEESAW_TOLERANCE = 1e-10
SEESAW_SWEEPS = 500

Term = Tuple[float, Tuple[Generator, ...]]
# measurements[party][setting][outcome] is a projector
Measurements = List[List[List[np.ndarray]]]


class DeterministicStrategy(NamedTuple):
    """outputs[party][setting] is the answer of the party."""

    outputs: Tuple[Tuple[int, ...], ...]


def _letter_value(letter: Generator, answer: int) -> float:
    if letter.outcome is None:
        return 1.0 - 2.0 * answer
    return 1.0 if answer == letter.outcome else 0.0


def _terms(game: Game) -> List[Term]:
    return [(c, m.word) for m, c in bell_operator(game).as_polynomial().items()]


def best_classical_strategy(game: Game, limit: int = STRATEGY_LIMIT) -> Tuple[float, DeterministicStrategy]:
    """Exact maximum of the Bell operator over deterministic strategies.

    The answers of the last party are chosen setting by setting once the other parties are fixed.

    Raises:
    - ValueError: More than `limit` deterministic strategies

    Returns:
    - Tuple[float, DeterministicStrategy]: Value and the first maximizing strategy in lexicographic order
    """
    outcomes = game.outcomes
    count = math.prod(m for row in outcomes for m in row)
    if count > limit:
        raise ValueError("{} deterministic strategies exceed the limit of {}".format(count, limit))
    terms = _terms(game)
    last = game.num_parties - 1
    tables = [list(itertools.product(*(range(m) for m in row))) for row in outcomes]
    split = all(sum(1 for x in word if x.party == last) <= 1 for _, word in terms)

    best: Optional[Tuple[float, DeterministicStrategy]] = None
    for head in itertools.product(*(tables[:last] if split else tables)):
        if split:
            constant = 0.0
            gains = [[0.0] * m for m in outcomes[last]]
            for coefficient, word in terms:
                value = coefficient
                final = None
                for x in word:
                    if x.party == last:
                        final = x
                    else:
                        value *= _letter_value(x, head[x.party][x.setting])
                if final is None:
                    constant += value
                elif value != 0:
                    for a in range(outcomes[last][final.setting]):
                        gains[final.setting][a] += value * _letter_value(final, a)
            choice = tuple(max(range(len(g)), key=lambda a: g[a]) for g in gains)
            total = constant + sum(g[a] for g, a in zip(gains, choice))
            strategy = DeterministicStrategy(tuple(head) + (choice,))
        else:
            total = sum(
                c * math.prod(_letter_value(x, head[x.party][x.setting]) for x in word) for c, word in terms
            )
            strategy = DeterministicStrategy(tuple(head))
        if best is None or total > best[0]:
            best = (total, strategy)
    assert best is not None
    return best


def classical_value(game: Game, limit: int = STRATEGY_LIMIT) -> float:
    """Exact classical value of a game (maximum over deterministic strategies)."""
    return best_classical_strategy(game, limit)[0]


def _random_measurements(game: Game, dim: int, rng: np.random.Generator) -> Measurements:
    measurements: Measurements = []
    for row in game.outcomes:
        party = []
        for m in row:
            rotation = unitary_group.rvs(dim, random_state=rng) if dim > 1 else np.eye(1, dtype=complex)
            labels = rng.integers(m, size=dim)
            party.append(
                [rotation @ np.diag((labels == a).astype(float)) @ rotation.conj().T for a in range(m)]
            )
        measurements.append(party)
    return measurements


def _local_operator(measurements: Measurements, letter: Generator) -> np.ndarray:
    projectors = measurements[letter.party][letter.setting]
    if letter.outcome is None:
        return projectors[0] - projectors[1]
    return projectors[letter.outcome]


def _lift(operator: np.ndarray, party: int, num_parties: int, dim: int) -> np.ndarray:
    before = np.eye(dim ** party)
    after = np.eye(dim ** (num_parties - party - 1))
    return np.kron(np.kron(before, operator), after)


def _assignment(game: Game, measurements: Measurements, dim: int) -> Dict[Generator, np.ndarray]:
    assignment = {}
    for party, row in enumerate(game.outcomes):
        for setting, m in enumerate(row):
            letters = (
                [Generator(party, setting)]
                if game.mode == Mode.OBSERVABLE
                else [Generator(party, setting, a) for a in range(m)]
            )
            for letter in letters:
                assignment[letter] = _lift(
                    _local_operator(measurements, letter), party, game.num_parties, dim
                )
    return assignment


def random_valid_assignment(game: Game, dim: int, seed: int) -> Dict[Generator, np.ndarray]:
    """Random operators satisfying the relations of the game's generators, on (C^dim)^{tensor N}.

    Every setting gets a Haar-random unitary applied to a random pattern of outcome ranks (projectors) or of
    +-1 signs (observables); operators of party j act on the j-th tensor factor.

    Returns:
    - Dict[Generator, np.ndarray]: Matrix of every generator of the game
    """
    if dim < 1:
        raise ValueError("Dimension must be at least 1, got {}".format(dim))
    rng = np.random.default_rng(seed)
    return _assignment(game, _random_measurements(game, dim, rng), dim)


class SeeSawState:
    """Pure state and projective measurements found by the see-saw iteration."""

    def __init__(
        self, dim: int, state: np.ndarray, measurements: Measurements, value: float, history: Sequence[float]
    ) -> None:
        self.dim = dim
        self.state = state
        self.measurements = measurements
        self.value = value
        # top eigenvalue before the first sweep and after every sweep
        self.history = list(history)

    @property
    def sweeps(self) -> int:
        return len(self.history) - 1

    def assignment(self, game: Game) -> Dict[Generator, np.ndarray]:
        return _assignment(game, self.measurements, self.dim)

    def __repr__(self) -> str:
        return "SeeSawState(dim={}, value={}, sweeps={})".format(self.dim, self.value, self.sweeps)


def _bell_matrix(terms: Sequence[Term], assignment: Dict[Generator, np.ndarray], size: int) -> np.ndarray:
    result = np.zeros((size, size), dtype=complex)
    for coefficient, word in terms:
        result += coefficient * evaluate_word(word, assignment, size)
    return (result + result.conj().T) / 2


def _top_eigenvector(matrix: np.ndarray) -> Tuple[float, np.ndarray]:
    values, vectors = scipy.linalg.eigh(matrix)
    return float(values[-1]), vectors[:, -1]


def _gains(
    terms: Sequence[Term], measurements: Measurements, state: np.ndarray, party: int, game: Game, dim: int
) -> List[List[np.ndarray]]:
    """Hermitian operators G[s][a] with <state|B|state> = sum Tr(P^a_s G[s][a]) + terms without the party."""
    n = game.num_parties
    psi = state.reshape((dim,) * n)
    others = [q for q in range(n) if q != party]
    gains = [[np.zeros((dim, dim), dtype=complex) for _ in range(m)] for m in game.outcomes[party]]
    for coefficient, word in terms:
        mine = [x for x in word if x.party == party]
        if not mine:
            continue
        phi = psi
        for x in word:
            if x.party != party:
                applied = np.tensordot(_local_operator(measurements, x), phi, axes=([1], [x.party]))
                phi = np.moveaxis(applied, 0, x.party)
        conditional = coefficient * np.tensordot(phi, psi.conj(), axes=(others, others))
        conditional = (conditional + conditional.conj().T) / 2
        (x,) = mine
        if x.outcome is None:
            gains[x.setting][0] += conditional
            gains[x.setting][1] -= conditional
        else:
            gains[x.setting][x.outcome] += conditional
    return gains


def _best_projectors(projectors: List[np.ndarray], gains: List[np.ndarray]) -> List[np.ndarray]:
    """Improves a projective measurement against linear gains, one pair of outcomes at a time.

    This is the best response for two outcomes. With more outcomes the pairwise sweep only
    never decreases the value and may stop short of the best projective measurement."""
    projectors = list(projectors)
    for a, b in itertools.combinations(range(len(projectors)), 2):
        values, vectors = scipy.linalg.eigh(projectors[a] + projectors[b])
        span = vectors[:, values > 0.5]
        if span.shape[1] == 0:
            continue
        difference = span.conj().T @ (gains[a] - gains[b]) @ span
        weights, directions = scipy.linalg.eigh((difference + difference.conj().T) / 2)
        positive = span @ directions[:, weights > 0]
        negative = span @ directions[:, weights <= 0]
        projectors[a] = positive @ positive.conj().T
        projectors[b] = negative @ negative.conj().T
    return projectors


def _seesaw_run(
    game: Game, terms: Sequence[Term], dim: int, rng: np.random.Generator, tol: float, max_sweeps: int
) -> SeeSawState:
    size = dim ** game.num_parties
    measurements = _random_measurements(game, dim, rng)
    value, state = _top_eigenvector(_bell_matrix(terms, _assignment(game, measurements, dim), size))
    history = [value]
    while len(history) <= max_sweeps:
        for party in range(game.num_parties):
            gains = _gains(terms, measurements, state, party, game, dim)
            measurements[party] = [
                _best_projectors(projectors, setting_gains)
                for projectors, setting_gains in zip(measurements[party], gains)
            ]
        previous = value
        value, state = _top_eigenvector(_bell_matrix(terms, _assignment(game, measurements, dim), size))
        history.append(value)
        if value - previous <= tol:
            break
    return SeeSawState(dim, state, measurements, value, history)


def seesaw(
    game: Game,
    dim: int = 2,
    restarts: int = 10,
    seed: int = 0,
    tol: float = SEESAW_TOLERANCE,
    max_sweeps: int = SEESAW_SWEEPS,
    progress: Optional[Callable[[Iterable[int]], Iterable[int]]] = None,
) -> SeeSawState:
    """Alternating optimization of the state and of every party's projective measurements.

    Args:
    - game (Game): Game (each Bell term has at most one operator per party)
    - dim (int, optional): Local dimension of every party. Defaults to 2.
    - restarts (int, optional): Number of random starting points. Defaults to 10.
    - seed (int, optional): Seed of the starting points. Defaults to 0.
    - tol (float, optional): Stop when a sweep improves the value by at most tol. Defaults to 1e-10.
    - max_sweeps (int, optional): Sweeps per restart. Defaults to 500.
    - progress (Optional[Callable], optional): Wraps the restart iterable (e.g. a task progress bar)

    Raises:
    - ValueError: Invalid arguments, or Bell terms with several operators of one party

    Returns:
    - SeeSawState: Best state; its value is evaluated directly on the final operators
    """
    if dim < 1 or restarts < 1:
        raise ValueError("Dimension and restarts must be at least 1")
    terms = _terms(game)
    if any(len({x.party for x in word}) != len(word) for _, word in terms):
        raise ValueError("See-saw needs at most one operator per party in every Bell term")
    runs: Iterable[int] = range(restarts)
    if progress is not None:
        runs = progress(runs)
    children = np.random.SeedSequence(seed).spawn(restarts)
    best: Optional[SeeSawState] = None
    for run in runs:
        state = _seesaw_run(game, terms, dim, np.random.default_rng(children[run]), tol, max_sweeps)
        logger.debug("See-saw restart {}: {:.10g} after {} sweeps".format(run, state.value, state.sweeps))
        if best is None or state.value > best.value:
            best = state
    assert best is not None

    operator = bell_operator(game)
    matrix = instantiate(operator.polynomial, best.assignment(game), tol=1e-8)
    best.value = float(np.real(best.state.conj() @ matrix @ best.state)) + operator.offset
    logger.info("See-saw lower bound {:.10g} (dimension {}, {} restarts)".format(best.value, dim, restarts))
    return best


def seesaw_lower_bound(game: Game, dim: int = 2, restarts: int = 10, seed: int = 0) -> float:
    """Value of the best see-saw strategy (a lower bound on the quantum value)."""
    return seesaw(game, dim, restarts, seed).value
