"""Levels of the moment / sum-of-squares hierarchy and their semidefinite programs."""
import enum
import itertools
import logging
import os
import time
from typing import Callable, Dict, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pyparsing
import scipy.linalg

from .algebra import (
    Generator,
    Mode,
    Monomial,
    NCPolynomial,
    Relation,
    Schema,
    SchemaError,
    parse_word,
    reduce_word,
)
from .games import BellOperator, Game, bell_operator
from .notation import letter2party, party2letter
from .sdp import Entry, Form, SDPProblem
from .solver import SDPSolution, SolverOptions, Status, solve

logger = logging.getLogger(__name__)

NULLSPACE_TOLERANCE = 1e-10
BASES_DIRECTORY = os.path.join(os.path.dirname(__file__), "bases")
MONOTONICITY_TOLERANCE = 1e-6

Pair = Tuple[int, int]


class BasisTooSmallError(ValueError):
    """The Bell operator has a monomial that is not a product z_i^dagger z_j of the basis."""


class LevelKind(enum.Enum):
    FULL = "full"
    SHAPED = "shaped"
    CUSTOM = "custom"


class LevelSpec:
    """Which monomials make the basis.

    - full(n): every canonical word of degree <= n
    - shaped: a union of per-party degree shapes ("AB" is one letter of A and one of B), each shape bringing
      all shapes of lower total degree along; an integer n stands for every shape of total degree <= n
    - custom: an explicit list of canonical monomials containing the identity
    """

    def __init__(
        self,
        kind: LevelKind,
        degree: int = 0,
        shapes: Iterable[Tuple[int, ...]] = (),
        monomials: Sequence[Monomial] = (),
        label: Optional[str] = None,
    ) -> None:
        self.kind = kind
        self.degree = degree
        self.shapes: Tuple[Tuple[int, ...], ...] = tuple(sorted(set(tuple(sorted(s)) for s in shapes)))
        self.monomials = tuple(monomials)
        self.label = label

    @staticmethod
    def full(n: int) -> "LevelSpec":
        if n < 1:
            raise ValueError("Level must be at least 1, got {}".format(n))
        return LevelSpec(LevelKind.FULL, degree=n)

    @staticmethod
    def shaped(tokens: Sequence[Union[int, str]]) -> "LevelSpec":
        """Shaped level from tokens like [1, "AB"] (party letters, one per operator)."""
        degree = 0
        shapes = []
        for token in tokens:
            if isinstance(token, int):
                degree = max(degree, token)
            else:
                shapes.append(tuple(letter2party(c) for c in token))
        if not shapes and degree < 1:
            raise ValueError("Empty level shape")
        return LevelSpec(LevelKind.SHAPED, degree=degree, shapes=shapes)

    @staticmethod
    def custom(monomials: Sequence[Monomial], label: Optional[str] = None) -> "LevelSpec":
        return LevelSpec(LevelKind.CUSTOM, monomials=monomials, label=label)

    @staticmethod
    def parse(text: str) -> "LevelSpec":
        """Parses `full:<n>`, shapes such as `1+AB` or `1+AB+AA+BB`, or `custom:<path>`.

        Raises:
        - ValueError: Could not parse the level, or the custom basis file
        """
        try:
            parsed = _LEVEL.parseString(text.strip(), parseAll=True)
        except pyparsing.ParseException:
            raise ValueError("Could not parse level {}".format(text))
        if parsed[0] == "full":
            return LevelSpec.full(int(parsed[1]))
        if parsed[0] == "custom":
            return read_custom_basis(parsed[1].strip())
        return LevelSpec.shaped([int(t) if t.isdigit() else t for t in parsed])

    def __str__(self) -> str:
        if self.kind == LevelKind.FULL:
            return "full:{}".format(self.degree)
        if self.kind == LevelKind.CUSTOM:
            return self.label or "custom:{} monomials".format(len(self.monomials))
        tokens = [str(self.degree)] if self.degree else []
        tokens += ["".join(party2letter(p) for p in shape) for shape in self.shapes]
        return "+".join(tokens)

    def __repr__(self) -> str:
        return "LevelSpec({})".format(self)


_LEVEL = (
    (pyparsing.Keyword("full") + pyparsing.Suppress(":") + pyparsing.Word(pyparsing.nums))
    | (pyparsing.Keyword("custom") + pyparsing.Suppress(":") + pyparsing.Regex(r".+"))
    | pyparsing.delimitedList(
        pyparsing.Word(pyparsing.nums) | pyparsing.Word(pyparsing.srange("[A-Z]")), delim="+"
    )
)


def parse_custom_basis(text: str, label: Optional[str] = None) -> LevelSpec:
    """Parses a basis file: one monomial per line (e.g. `I`, `A1 B2 C3`), `#` comments.

    Raises:
    - ValueError: Unparsable or non-canonical monomial (with its line number)
    """
    monomials = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            word = parse_word(line)
            monomial = reduce_word(word)
        except ValueError as e:
            raise ValueError("Line {}: {}".format(number, e))
        if monomial.word != word:
            raise ValueError("Line {}: {} is not canonical (reduces to {})".format(number, line, monomial))
        monomials.append(monomial)
    return LevelSpec.custom(monomials, label)


def read_custom_basis(path: str) -> LevelSpec:
    """Reads a basis file; a bare file name that does not exist is looked up among the shipped bases."""
    source = path
    if not os.path.exists(path) and os.path.basename(path) == path:
        shipped = os.path.join(BASES_DIRECTORY, path)
        if os.path.exists(shipped):
            source = shipped
    with open(source) as f:
        return parse_custom_basis(f.read(), "custom:{}".format(path))


class MonomialBasis:
    """Ordered distinct canonical monomials, identity first."""

    def __init__(self, monomials: Sequence[Monomial]) -> None:
        self.monomials: Tuple[Monomial, ...] = tuple(monomials)
        if not self.monomials:
            raise ValueError("Empty basis")
        if not self.monomials[0].is_identity:
            raise ValueError("Basis must start with the identity")
        self.positions: Dict[Monomial, int] = {}
        for i, m in enumerate(self.monomials):
            if m.is_zero:
                raise ValueError("Basis contains the zero monomial")
            if m in self.positions:
                raise ValueError("Duplicate basis monomial {}".format(m))
            self.positions[m] = i

    def index(self, monomial: Monomial) -> int:
        return self.positions[monomial]

    def __len__(self) -> int:
        return len(self.monomials)

    def __getitem__(self, i: int) -> Monomial:
        return self.monomials[i]

    def __iter__(self) -> Iterator[Monomial]:
        return iter(self.monomials)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MonomialBasis) and self.monomials == other.monomials

    def __repr__(self) -> str:
        return "MonomialBasis({})".format(", ".join(str(m) for m in self.monomials))


def _party_words(letters: Sequence[Generator], length: int) -> List[Tuple[Generator, ...]]:
    # consecutive letters of one party must use different settings, otherwise the word reduces
    words: List[Tuple[Generator, ...]] = [()]
    for _ in range(length):
        words = [w + (x,) for w in words for x in letters if not w or w[-1].setting != x.setting]
    return words


def _shapes(spec: LevelSpec, num_parties: int) -> List[Tuple[int, ...]]:
    explicit = []
    for shape in spec.shapes:
        if any(p >= num_parties for p in shape):
            raise SchemaError("Level {} names a party beyond {}".format(spec, party2letter(num_parties - 1)))
        explicit.append(tuple(shape.count(p) for p in range(num_parties)))
    limit = max([spec.degree] + [sum(s) - 1 for s in explicit])
    shapes = {
        s for s in itertools.product(range(limit + 1), repeat=num_parties) if sum(s) <= limit
    } | set(explicit)
    return sorted(shapes, key=lambda s: (sum(s), tuple(-d for d in s)))


def generate_basis(game: Game, spec: LevelSpec) -> MonomialBasis:
    """Builds the monomial basis of a level.

    Projector-mode bases leave out the last outcome of every setting (it is I minus the others).
    Order: identity, then by total degree, shape (earlier parties first) and lexicographic letters.

    Raises:
    - SchemaError: Custom monomials out of the game schema
    - ValueError: Invalid custom basis
    """
    schema = game.schema
    if spec.kind == LevelKind.CUSTOM:
        for m in spec.monomials:
            for x in m.word:
                schema.check(x)
        identity = [m for m in spec.monomials if m.is_identity]
        if not identity:
            raise ValueError("Custom basis has no identity")
        basis = MonomialBasis(identity + [m for m in spec.monomials if not m.is_identity])
    else:
        alphabets = [schema.letters(p, reduced=True) for p in range(schema.num_parties)]
        monomials = []
        for shape in _shapes(spec, schema.num_parties):
            parts = [_party_words(alphabets[p], d) for p, d in enumerate(shape)]
            for combination in itertools.product(*parts):
                monomials.append(Monomial(itertools.chain.from_iterable(combination)))
        basis = MonomialBasis(monomials)
    logger.info("Level {}: basis of {} monomials".format(spec, len(basis)))
    return basis


def moment_index(basis: MonomialBasis) -> Tuple[Dict[Monomial, List[Pair]], List[Pair]]:
    """Maps every reduced product z_i^dagger z_j to its entries (i, j).

    Returns:
    - Tuple[Dict[Monomial, List[Pair]], List[Pair]]: Entries per monomial, and annihilated entries
    """
    index: Dict[Monomial, List[Pair]] = {}
    annihilated: List[Pair] = []
    for i, left in enumerate(basis):
        prefix = tuple(reversed(left.word))
        for j, right in enumerate(basis):
            m = reduce_word(prefix + right.word)
            if m.is_zero:
                annihilated.append((i, j))
            else:
                index.setdefault(m, []).append((i, j))
    return index, annihilated


class Elimination(NamedTuple):
    """Original operator = rewritten operator + coefficient * left^dagger * relation * right."""

    coefficient: float
    relation: Relation
    left: Monomial
    right: Monomial


def eliminate_last_outcomes(
    polynomial: NCPolynomial, schema: Schema
) -> Tuple[NCPolynomial, List[Elimination]]:
    """Rewrites every last-outcome projector as I minus the other outcomes of its setting.

    Returns:
    - Tuple[NCPolynomial, List[Elimination]]: Rewritten polynomial, and the completeness terms used
    """
    if schema.mode != Mode.PROJECTOR:
        return polynomial, []
    kept: List[Tuple[float, Tuple[Generator, ...]]] = []
    eliminations: List[Elimination] = []
    work = [(m, c) for m, c in polynomial.items()]
    while work:
        monomial, coefficient = work.pop()
        if monomial.is_zero:
            continue
        position = next(
            (
                t
                for t, x in enumerate(monomial.word)
                if x.outcome == schema.outcomes[x.party][x.setting] - 1
            ),
            None,
        )
        if position is None:
            kept.append((coefficient, monomial.word))
            continue
        x = monomial.word[position]
        prefix, suffix = monomial.word[:position], monomial.word[position + 1 :]
        count = schema.outcomes[x.party][x.setting]
        eliminations.append(
            Elimination(
                coefficient,
                Relation.completeness(x.party, x.setting, count),
                reduce_word(reversed(prefix)),
                reduce_word(suffix),
            )
        )
        work.append((reduce_word(prefix + suffix), coefficient))
        for a in range(count - 1):
            work.append((reduce_word(prefix + (Generator(x.party, x.setting, a),) + suffix), -coefficient))
    return NCPolynomial.sum(kept), eliminations


class RelationTerm(NamedTuple):
    """left^dagger * relation * right."""

    relation: Relation
    left: Monomial
    right: Monomial


class _Classes:
    """Symmetric classes {m, m^dagger} of the moment index, with their upper-triangle entries."""

    def __init__(self, index: Dict[Monomial, List[Pair]]) -> None:
        self.key: Dict[Monomial, Monomial] = {}
        pairs: Dict[Monomial, set] = {}
        for m, entries in index.items():
            adjoint = m.adjoint()
            key = min(m, adjoint)
            self.key[m] = key
            bucket = pairs.setdefault(key, set())
            bucket.update((min(i, j), max(i, j)) for i, j in entries)
        self.keys = sorted(pairs)
        self.pairs: Dict[Monomial, List[Pair]] = {k: sorted(v) for k, v in pairs.items()}
        self.hermitian: Dict[Monomial, bool] = {k: k.adjoint() == k for k in self.keys}

    def representative(self, m: Monomial) -> Pair:
        return self.pairs[self.key[m]][0]


class RelaxationProblem:
    """A hierarchy level turned into a semidefinite program.

    The solution vector x of `sdp` (`SDPSolution.vector`) satisfies, in the quotient algebra,
    z^dagger (C + sum_k x_k A_k) z = x_0 I - B + sum_r (x @ relation_weights)_r * relation_terms[r],
    where B is `bell` (the operator after the last-outcome rewrite), and
    B_original = B + sum of the `eliminations` terms.
    """

    def __init__(
        self,
        game: Game,
        level: LevelSpec,
        formulation: "Formulation",
        basis: MonomialBasis,
        bell: NCPolynomial,
        eliminations: List[Elimination],
        index: Dict[Monomial, List[Pair]],
        annihilated: List[Pair],
        sdp: SDPProblem,
        relation_terms: List[RelationTerm],
        relation_weights: np.ndarray,
    ) -> None:
        self.game = game
        self.level = level
        self.formulation = formulation
        self.basis = basis
        self.bell = bell
        self.eliminations = eliminations
        self.moment_index = index
        self.annihilated = annihilated
        self.sdp = sdp
        self.relation_terms = relation_terms
        self.relation_weights = relation_weights

    def __repr__(self) -> str:
        return "RelaxationProblem({}, {}, {}, basis={})".format(
            self.game.name, self.level, self.formulation.value, len(self.basis)
        )


class Formulation(enum.Enum):
    MOMENT = "moment"
    SOS = "sos"


class _Assembly(NamedTuple):
    basis: MonomialBasis
    bell: NCPolynomial
    eliminations: List[Elimination]
    index: Dict[Monomial, List[Pair]]
    annihilated: List[Pair]
    classes: _Classes
    objective: List[Entry]


def _sym_entry(k: int, pair: Pair, weight: float) -> Entry:
    # weight * (E_ij + E_ji) / 2
    i, j = pair
    return (k, 0, i, j, weight if i == j else weight / 2)


def _assemble(game: Game, level: LevelSpec) -> _Assembly:
    basis = generate_basis(game, level)
    operator: BellOperator = bell_operator(game)
    bell, eliminations = eliminate_last_outcomes(operator.as_polynomial(), game.schema)
    index, annihilated = moment_index(basis)
    classes = _Classes(index)
    objective = []
    for m, coefficient in bell.items():
        if m not in index:
            raise BasisTooSmallError(
                "Basis of level {} too small: Bell monomial {} is not a product of basis elements".format(
                    level, m
                )
            )
        objective.append(_sym_entry(0, classes.representative(m), -coefficient))
    return _Assembly(basis, bell, eliminations, index, annihilated, classes, objective)


class _Completeness(NamedTuple):
    left: int
    right: int
    relation: Relation
    coefficients: Dict[Monomial, float]


def _completeness_rows(assembly: _Assembly, schema: Schema) -> List[_Completeness]:
    """Completeness relations u^dagger (sum_a X^a - I) v whose words all lie in the moment index.

    Coefficients are those of (p(u, v) + p(v, u)) / 2 on the class keys.
    """
    if schema.mode != Mode.PROJECTOR:
        return []
    index, classes, basis = assembly.index, assembly.classes, assembly.basis

    def in_domain(m: Monomial) -> bool:
        return m.is_zero or m in index

    rows = []
    for i, u in enumerate(basis):
        prefix = tuple(reversed(u.word))
        for k in range(i, len(basis)):
            v = basis[k]
            base = reduce_word(prefix + v.word)
            if not in_domain(base):
                continue
            for party, row in enumerate(schema.outcomes):
                for setting, count in enumerate(row):
                    words = [
                        reduce_word(prefix + (Generator(party, setting, a),) + v.word) for a in range(count)
                    ]
                    if not all(in_domain(w) for w in words):
                        continue
                    coefficients: Dict[Monomial, float] = {}
                    for w, sign in [(w, 1.0) for w in words] + [(base, -1.0)]:
                        if not w.is_zero:
                            key = classes.key[w]
                            coefficients[key] = coefficients.get(key, 0.0) + sign
                    coefficients = {key: c for key, c in coefficients.items() if c != 0}
                    if coefficients:
                        relation = Relation.completeness(party, setting, count)
                        rows.append(_Completeness(i, k, relation, coefficients))
    logger.debug("{} completeness relations inside the moment index".format(len(rows)))
    return rows


def _relation_terms(rows: List[_Completeness], basis: MonomialBasis) -> Tuple[List[RelationTerm], np.ndarray]:
    """Both orientations of every completeness row, and the (rows x terms) weight matrix."""
    terms: List[RelationTerm] = []
    weights = np.zeros((len(rows), 2 * len(rows)))
    for r, row in enumerate(rows):
        u, v = basis[row.left], basis[row.right]
        if row.left == row.right:
            weights[r, len(terms)] = 1.0
            terms.append(RelationTerm(row.relation, u, v))
        else:
            weights[r, len(terms)] = 0.5
            weights[r, len(terms) + 1] = 0.5
            terms += [RelationTerm(row.relation, u, v), RelationTerm(row.relation, v, u)]
    return terms, weights[:, : len(terms)]


def build_moment_sdp(game: Game, level: LevelSpec) -> RelaxationProblem:
    """Moment relaxation in standard form: maximize L(B) over moment matrices M psd with M[0, 0] = 1.

    Raises:
    - BasisTooSmallError: A Bell monomial is outside the moment index
    """
    assembly = _assemble(game, level)
    classes = assembly.classes
    entries: List[Entry] = list(assembly.objective)
    k = 1
    entries.append((k, 0, 0, 0, 1.0))
    for key in classes.keys:
        first, *others = classes.pairs[key]
        for pair in others:
            k += 1
            entries += [_sym_entry(k, pair, 1.0), _sym_entry(k, first, -1.0)]
    for i, j in assembly.annihilated:
        if i <= j:
            k += 1
            entries.append(_sym_entry(k, (i, j), 1.0))
    structural = k

    rows = _completeness_rows(assembly, game.schema)
    for row in rows:
        k += 1
        for key, coefficient in row.coefficients.items():
            entries.append(_sym_entry(k, classes.pairs[key][0], coefficient))
    b = np.zeros(k)
    b[0] = 1.0
    sdp = SDPProblem.from_entries(Form.STANDARD, [len(assembly.basis)], entries, b)
    terms, completeness_weights = _relation_terms(rows, assembly.basis)
    weights = np.zeros((k, len(terms)))
    weights[structural:, :] = completeness_weights

    if rows:
        keep = sdp.independent_rows(required=[0])
        if len(keep) < k:
            logger.warning("Dropped {} linearly dependent constraints".format(k - len(keep)))
            sdp = sdp.select(keep)
            weights = weights[keep, :]
    logger.info(
        "Moment relaxation: {} constraints on a {}x{} matrix".format(
            sdp.num_constraints, len(assembly.basis), len(assembly.basis)
        )
    )
    return RelaxationProblem(
        game,
        level,
        Formulation.MOMENT,
        assembly.basis,
        assembly.bell,
        assembly.eliminations,
        assembly.index,
        assembly.annihilated,
        sdp,
        terms,
        weights,
    )


def _class_weight(classes: _Classes, key: Monomial, pair: Pair) -> float:
    i, j = pair
    if i != j and classes.hermitian[key]:
        return 2.0
    return 1.0


def build_sos_sdp(game: Game, level: LevelSpec) -> RelaxationProblem:
    """Sum-of-squares relaxation in inequality form: minimize nu subject to
    Gamma = F0 + nu E00 + sum_k x_k F_k psd, where z^dagger F_k z vanishes in the quotient algebra.

    Raises:
    - BasisTooSmallError: A Bell monomial is outside the moment index
    """
    assembly = _assemble(game, level)
    classes = assembly.classes
    n = len(assembly.basis)
    entries: List[Entry] = list(assembly.objective)
    entries.append((1, 0, 0, 0, 1.0))
    rows = _completeness_rows(assembly, game.schema)
    k = 1
    if not rows:
        for key in classes.keys:
            first, *others = classes.pairs[key]
            for pair in others:
                k += 1
                entries += [
                    (k, 0, first[0], first[1], 1.0 / _class_weight(classes, key, first)),
                    (k, 0, pair[0], pair[1], -1.0 / _class_weight(classes, key, pair)),
                ]
        kernel_weights = np.zeros((0, 0))
    else:
        # vanishing combinations of (upper-triangle entries, completeness multipliers)
        pairs = [pair for key in classes.keys for pair in classes.pairs[key]]
        column = {pair: c for c, pair in enumerate(pairs)}
        row_of = {key: r for r, key in enumerate(classes.keys)}
        system = np.zeros((len(classes.keys), len(pairs) + len(rows)))
        for key in classes.keys:
            for pair in classes.pairs[key]:
                system[row_of[key], column[pair]] = _class_weight(classes, key, pair)
        for r, row in enumerate(rows):
            for key, coefficient in row.coefficients.items():
                # class coefficient of (p(u, v) + p(v, u)) / 2
                scale = 1.0 if classes.hermitian[key] else 0.5
                system[row_of[key], len(pairs) + r] = -coefficient * scale
        kernel = scipy.linalg.null_space(system, rcond=NULLSPACE_TOLERANCE)
        left, singular, right = np.linalg.svd(kernel[: len(pairs), :], full_matrices=False)
        rank = int(np.sum(singular > NULLSPACE_TOLERANCE))
        matrices = left[:, :rank]
        kernel_weights = kernel[len(pairs) :, :] @ right[:rank, :].T / singular[:rank]
        for t in range(rank):
            k += 1
            for c, pair in enumerate(pairs):
                if abs(matrices[c, t]) > 0:
                    entries.append((k, 0, pair[0], pair[1], float(matrices[c, t])))
    for i, j in assembly.annihilated:
        if i <= j:
            k += 1
            entries.append((k, 0, i, j, 1.0))
    b = np.zeros(k)
    b[0] = 1.0
    sdp = SDPProblem.from_entries(Form.INEQUALITY, [n], entries, b)

    terms, completeness_weights = _relation_terms(rows, assembly.basis)
    weights = np.zeros((k, len(terms)))
    if rows:
        # rows 2 .. rank+1 carry the kernel vectors
        weights[1 : 1 + kernel_weights.shape[1], :] = kernel_weights.T @ completeness_weights
    logger.info("Sum-of-squares relaxation: {} matrices of size {}x{}".format(k, n, n))
    return RelaxationProblem(
        game,
        level,
        Formulation.SOS,
        assembly.basis,
        assembly.bell,
        assembly.eliminations,
        assembly.index,
        assembly.annihilated,
        sdp,
        terms,
        weights,
    )


def build_relaxation(
    game: Game, level: LevelSpec, formulation: Formulation = Formulation.MOMENT
) -> RelaxationProblem:
    if formulation == Formulation.MOMENT:
        return build_moment_sdp(game, level)
    return build_sos_sdp(game, level)


def relaxation_bound(solution: SDPSolution) -> float:
    """Upper bound on the game value carried by a solution (moment value or nu)."""
    return solution.primal_value


class LevelResult(NamedTuple):
    level: int
    bound: float
    status: Status
    seconds: float


def level_sequence(
    game: Game,
    max_level: int,
    options: Optional[SolverOptions] = None,
    formulation: Formulation = Formulation.MOMENT,
    progress: Optional[Callable[[Iterable[int]], Iterable[int]]] = None,
) -> List[LevelResult]:
    """Solves full levels 1..max_level.

    Args:
    - game (Game): Game
    - max_level (int): Last level
    - options (Optional[SolverOptions], optional): Solver settings
    - formulation (Formulation, optional): Defaults to Formulation.MOMENT.
    - progress (Optional[Callable], optional): Wraps the level iterable (e.g. a task progress bar)

    Returns:
    - List[LevelResult]: One result per level; failures are reported through the status
    """
    levels: Iterable[int] = range(1, max_level + 1)
    if progress is not None:
        levels = progress(levels)
    results = []
    for level in levels:
        start = time.monotonic()
        problem = build_relaxation(game, LevelSpec.full(level), formulation)
        solution = solve(problem.sdp, options)
        seconds = time.monotonic() - start
        results.append(LevelResult(level, relaxation_bound(solution), solution.status, seconds))
        logger.info("Level {}: bound {:.10g} ({})".format(level, results[-1].bound, solution.status.value))
    return results


def is_monotone(results: Sequence[LevelResult], tol: float = MONOTONICITY_TOLERANCE) -> bool:
    """True if the optimal bounds never increase with the level (up to tol, relative)."""
    bounds = [r.bound for r in results if r.status == Status.OPTIMAL]
    return all(later <= earlier + tol * (1 + abs(earlier)) for earlier, later in zip(bounds, bounds[1:]))
