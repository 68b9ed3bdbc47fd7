"""Noncommutative polynomials in measurement operators.

Generators are either projectors X^a_{j,s} (party j, setting s, outcome a) or +-1 observables X_{j,s}.
Words are kept in the quotient of the free algebra by the commuting-operator rules:
- operators of different parties commute (canonical words list party 0 first, then party 1, ...)
- projectors are idempotent (X X = X) and orthogonal within a setting (X^a X^b = 0 for a != b)
- observables square to the identity (X X = I)
"""
import enum
import logging
import re
import types
from typing import Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pyparsing

from .notation import dump_real, letter2party, party2letter

logger = logging.getLogger(__name__)

MAX_WORD_LENGTH = 24

Scalar = Union[int, float]


class SchemaError(ValueError):
    """Generators do not fit a game schema, or a word breaks the word rules."""


class Mode(enum.Enum):
    PROJECTOR = "projector"
    OBSERVABLE = "observable"


class Generator(NamedTuple):
    """One measurement operator. Outcome is None for observables."""

    party: int
    setting: int
    outcome: Optional[int] = None

    @property
    def mode(self) -> Mode:
        return Mode.OBSERVABLE if self.outcome is None else Mode.PROJECTOR

    def sort_key(self) -> Tuple[int, int, int]:
        return (self.party, self.setting, -1 if self.outcome is None else self.outcome)

    def __str__(self) -> str:
        name = "{}{}".format(party2letter(self.party), self.setting + 1)
        if self.outcome is not None:
            name += ":{}".format(self.outcome)
        return name


Word = Tuple[Generator, ...]


class Schema:
    """Party/setting/outcome counts of a game, with the generator mode.

    Args:
    - outcomes (Sequence[Sequence[int]]): outcomes[j][s] is the number of outcomes of setting s of party j
    - mode (Mode): Generator mode
    """

    def __init__(self, outcomes: Sequence[Sequence[int]], mode: Mode) -> None:
        self.outcomes: Tuple[Tuple[int, ...], ...] = tuple(tuple(int(m) for m in row) for row in outcomes)
        self.mode = mode
        if not self.outcomes:
            raise SchemaError("At least one party is required")
        for party, row in enumerate(self.outcomes):
            if not row:
                raise SchemaError("Party {} has no settings".format(party2letter(party)))
            if any(m < 2 for m in row):
                raise SchemaError(
                    "Party {} has a setting with fewer than 2 outcomes".format(party2letter(party))
                )
            if mode == Mode.OBSERVABLE and any(m != 2 for m in row):
                raise SchemaError("Observable generators require 2 outcomes per setting")

    @property
    def num_parties(self) -> int:
        return len(self.outcomes)

    @property
    def settings(self) -> Tuple[int, ...]:
        return tuple(len(row) for row in self.outcomes)

    def letters(self, party: int, reduced: bool = False) -> List[Generator]:
        """Generators of one party, in canonical order.

        Args:
        - party (int): Party index
        - reduced (bool, optional): In projector mode, leave out the last outcome of every setting. Defaults to False.

        Returns:
        - List[Generator]: Generators
        """
        if self.mode == Mode.OBSERVABLE:
            return [Generator(party, s) for s in range(len(self.outcomes[party]))]
        drop = 1 if reduced else 0
        return [
            Generator(party, s, a) for s, m in enumerate(self.outcomes[party]) for a in range(m - drop)
        ]

    def check(self, letter: Generator) -> None:
        if letter.mode != self.mode:
            raise SchemaError("Generator {} is not in {} mode".format(letter, self.mode.value))
        if not 0 <= letter.party < self.num_parties:
            raise SchemaError("Generator {}: no such party".format(letter))
        if not 0 <= letter.setting < len(self.outcomes[letter.party]):
            raise SchemaError("Generator {}: no such setting".format(letter))
        if (
            letter.outcome is not None
            and not 0 <= letter.outcome < self.outcomes[letter.party][letter.setting]
        ):
            raise SchemaError("Generator {}: no such outcome".format(letter))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Schema) and self.outcomes == other.outcomes and self.mode == other.mode

    def __repr__(self) -> str:
        return "Schema({}, {})".format(self.outcomes, self.mode.value)


class RelationKind(enum.Enum):
    COMPLETENESS = "complete"
    IDEMPOTENCE = "idem"
    ORTHOGONALITY = "orth"


class Relation(NamedTuple):
    """An operator relation p that vanishes in the quotient algebra.

    - completeness: letters are all outcomes of one setting, p = sum X^a - I
    - idempotence: one letter X, p = X - X X (projectors) or p = I - X X (observables)
    - orthogonality: two letters X^a X^b of the same setting, p = X^a X^b
    """

    kind: RelationKind
    letters: Word

    @staticmethod
    def completeness(party: int, setting: int, outcomes: int) -> "Relation":
        return Relation(
            RelationKind.COMPLETENESS, tuple(Generator(party, setting, a) for a in range(outcomes))
        )

    def terms(self) -> List[Tuple[float, Word]]:
        """Expansion of p in the free algebra (no rewriting applied).

        Returns:
        - List[Tuple[float, Word]]: List of (coefficient, word)
        """
        if self.kind == RelationKind.COMPLETENESS:
            return [(1.0, (x,)) for x in self.letters] + [(-1.0, ())]
        if self.kind == RelationKind.IDEMPOTENCE:
            x = self.letters[0]
            if x.mode == Mode.PROJECTOR:
                return [(1.0, (x,)), (-1.0, (x, x))]
            return [(1.0, ()), (-1.0, (x, x))]
        return [(1.0, self.letters)]

    def __str__(self) -> str:
        return "{} {}".format(self.kind.value, " ".join(str(x) for x in self.letters))


class Monomial:
    """A reduced word, or the annihilated (zero) monomial.

    Build monomials with `reduce_word` (or `parse_monomial`): the constructor trusts its input.
    """

    __slots__ = ("word", "is_zero")

    def __init__(self, word: Iterable[Generator] = (), zero: bool = False) -> None:
        self.word: Word = () if zero else tuple(word)
        self.is_zero = zero

    @property
    def degree(self) -> int:
        return len(self.word)

    @property
    def is_identity(self) -> bool:
        return not self.is_zero and not self.word

    def sort_key(self) -> Tuple:
        if self.is_zero:
            return (-1,)
        return (len(self.word), tuple(x.sort_key() for x in self.word))

    def shape(self, num_parties: int) -> Tuple[int, ...]:
        """Number of letters of every party."""
        counts = [0] * num_parties
        for x in self.word:
            counts[x.party] += 1
        return tuple(counts)

    def adjoint(self) -> "Monomial":
        if self.is_zero:
            return self
        return reduce_word(reversed(self.word))

    def is_hermitian(self) -> bool:
        return self.adjoint() == self

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Monomial) and self.word == other.word and self.is_zero == other.is_zero

    def __hash__(self) -> int:
        return hash((self.word, self.is_zero))

    def __lt__(self, other: "Monomial") -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        if self.is_zero:
            return "0"
        if not self.word:
            return "I"
        return " ".join(str(x) for x in self.word)

    def __repr__(self) -> str:
        return "Monomial('{}')".format(self)


IDENTITY = Monomial()
ZERO = Monomial(zero=True)


class RewriteStep(NamedTuple):
    """One rule application while reducing a word: the word changed by coefficient * prefix * p * suffix."""

    prefix: Word
    relation: Relation
    suffix: Word
    coefficient: float


def _reduce(
    word: Iterable[Generator], schema: Optional[Schema], steps: Optional[List[RewriteStep]]
) -> Monomial:
    letters = tuple(word)
    if len(letters) > MAX_WORD_LENGTH:
        raise SchemaError(
            "Word of length {} exceeds the maximum of {} letters".format(len(letters), MAX_WORD_LENGTH)
        )
    if len({x.mode for x in letters}) > 1:
        raise SchemaError("Word mixes projector and observable generators")
    if schema is not None:
        for x in letters:
            schema.check(x)

    # sorted() is stable: letters of the same party keep their order
    ordered = sorted(letters, key=lambda x: x.party)
    done: List[Generator] = []
    start = 0
    while start < len(ordered):
        end = start
        while end < len(ordered) and ordered[end].party == ordered[start].party:
            end += 1
        segment = ordered[start:end]
        stack: List[Generator] = []
        for position, x in enumerate(segment):
            if stack and stack[-1] == x:
                if steps is not None:
                    steps.append(
                        RewriteStep(
                            tuple(done + stack[:-1]),
                            Relation(RelationKind.IDEMPOTENCE, (x,)),
                            tuple(segment[position + 1 :] + ordered[end:]),
                            -1.0,
                        )
                    )
                if x.outcome is None:
                    stack.pop()
            elif stack and x.outcome is not None and stack[-1].setting == x.setting:
                if steps is not None:
                    steps.append(
                        RewriteStep(
                            tuple(done + stack[:-1]),
                            Relation(RelationKind.ORTHOGONALITY, (stack[-1], x)),
                            tuple(segment[position + 1 :] + ordered[end:]),
                            1.0,
                        )
                    )
                return ZERO
            else:
                stack.append(x)
        done.extend(stack)
        start = end
    return Monomial(done)


def reduce_word(word: Iterable[Generator], schema: Optional[Schema] = None) -> Monomial:
    """Rewrites a word into its canonical form.

    Args:
    - word (Iterable[Generator]): Letters, in operator order
    - schema (Optional[Schema], optional): If given, every letter is checked against it. Defaults to None.

    Raises:
    - SchemaError: Word too long, mixing modes or out of the schema

    Returns:
    - Monomial: Canonical monomial (ZERO if annihilated)
    """
    return _reduce(word, schema, None)


def reduce_with_trace(
    word: Iterable[Generator], schema: Optional[Schema] = None
) -> Tuple[Monomial, List[RewriteStep]]:
    """Same as `reduce_word`, also listing the rules applied.

    With letters of different parties commuted freely, the input word equals
    reduced + sum(step.coefficient * step.prefix * step.relation * step.suffix) in the free algebra.

    Returns:
    - Tuple[Monomial, List[RewriteStep]]: Canonical monomial and rewrite steps
    """
    steps: List[RewriteStep] = []
    monomial = _reduce(word, schema, steps)
    return monomial, steps


class NCPolynomial:
    """Finite real combination of canonical monomials. Zero coefficients are never stored."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Optional[Mapping[Monomial, Scalar]] = None) -> None:
        self._terms: Dict[Monomial, float] = {}
        if terms:
            for monomial, coefficient in terms.items():
                self._accumulate(monomial, coefficient)

    def _accumulate(self, monomial: Monomial, coefficient: Scalar) -> None:
        if monomial.is_zero or coefficient == 0:
            return
        value = self._terms.get(monomial, 0.0) + float(coefficient)
        if value == 0:
            self._terms.pop(monomial, None)
        else:
            self._terms[monomial] = value

    @staticmethod
    def constant(value: Scalar) -> "NCPolynomial":
        return NCPolynomial({IDENTITY: value})

    @staticmethod
    def from_word(word: Iterable[Generator], coefficient: Scalar = 1.0) -> "NCPolynomial":
        return NCPolynomial({reduce_word(word): coefficient})

    @staticmethod
    def sum(terms: Iterable[Tuple[Scalar, Iterable[Generator]]]) -> "NCPolynomial":
        """Builds a polynomial from (coefficient, word) pairs, reducing every word."""
        p = NCPolynomial()
        for coefficient, word in terms:
            p._accumulate(reduce_word(word), coefficient)
        return p

    @property
    def terms(self) -> Mapping[Monomial, float]:
        return types.MappingProxyType(self._terms)

    def items(self) -> List[Tuple[Monomial, float]]:
        """Terms in canonical monomial order."""
        return sorted(self._terms.items(), key=lambda item: item[0].sort_key())

    def coefficient(self, monomial: Monomial) -> float:
        return self._terms.get(monomial, 0.0)

    def monomials(self) -> List[Monomial]:
        return [m for m, _ in self.items()]

    @property
    def degree(self) -> int:
        return max((m.degree for m in self._terms), default=0)

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def adjoint(self) -> "NCPolynomial":
        return adjoint(self)

    def is_hermitian(self, tol: float = 0.0) -> bool:
        return (self - self.adjoint()).max_abs_coefficient() <= tol

    def _coerce(self, other: Union["NCPolynomial", Scalar]) -> "NCPolynomial":
        if isinstance(other, NCPolynomial):
            return other
        return NCPolynomial.constant(other)

    def __add__(self, other: Union["NCPolynomial", Scalar]) -> "NCPolynomial":
        result = NCPolynomial(self._terms)
        for monomial, coefficient in self._coerce(other)._terms.items():
            result._accumulate(monomial, coefficient)
        return result

    __radd__ = __add__

    def __neg__(self) -> "NCPolynomial":
        return NCPolynomial({m: -c for m, c in self._terms.items()})

    def __sub__(self, other: Union["NCPolynomial", Scalar]) -> "NCPolynomial":
        return self + (-self._coerce(other))

    def __rsub__(self, other: Scalar) -> "NCPolynomial":
        return self._coerce(other) - self

    def __mul__(self, other: Union["NCPolynomial", Scalar]) -> "NCPolynomial":
        if isinstance(other, NCPolynomial):
            return multiply(self, other)
        return NCPolynomial({m: c * other for m, c in self._terms.items()})

    def __rmul__(self, other: Scalar) -> "NCPolynomial":
        return self * other

    def __eq__(self, other: object) -> bool:
        return isinstance(other, NCPolynomial) and self._terms == other._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[Monomial]:
        return iter(self.monomials())

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        return " ".join("{:+} {}".format(c, m) for m, c in self.items())

    def __repr__(self) -> str:
        return "NCPolynomial('{}')".format(self)


def multiply(p: NCPolynomial, q: NCPolynomial) -> NCPolynomial:
    """Product p q, reduced."""
    return NCPolynomial.sum(
        (cp * cq, mp.word + mq.word) for mp, cp in p.terms.items() for mq, cq in q.terms.items()
    )


def adjoint(p: NCPolynomial) -> NCPolynomial:
    """Adjoint of p: every word reversed then reduced (coefficients are real)."""
    result = NCPolynomial()
    for monomial, coefficient in p.terms.items():
        result._accumulate(monomial.adjoint(), coefficient)
    return result


def relation_term(left: Monomial, relation: Relation, right: Monomial) -> NCPolynomial:
    """Reduced form of left^dagger * p * right for a relation p (the zero polynomial in the quotient,
    except for completeness relations, which reduction does not apply).
    """
    prefix = tuple(reversed(left.word))
    return NCPolynomial.sum((c, prefix + w + right.word) for c, w in relation.terms())


def _distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def check_assignment(assignment: Mapping[Generator, np.ndarray], tol: float = 1e-10) -> int:
    """Checks that matrices satisfy the operator relations of their mode.

    Args:
    - assignment (Mapping[Generator, np.ndarray]): One square matrix per generator
    - tol (float, optional): Entry-wise tolerance. Defaults to 1e-10.

    Raises:
    - SchemaError: Generators mix modes
    - ValueError: A matrix does not satisfy the relations

    Returns:
    - int: Dimension of the matrices
    """
    if not assignment:
        raise ValueError("Empty assignment")
    if len({g.mode for g in assignment}) > 1:
        raise SchemaError("Assignment mixes projector and observable generators")
    dimension = next(iter(assignment.values())).shape[0]
    identity = np.eye(dimension)
    groups: Dict[Tuple[int, int], List[Generator]] = {}
    for g, x in assignment.items():
        if x.shape != (dimension, dimension):
            raise ValueError(
                "Matrix for {} has shape {}, expected {}".format(g, x.shape, (dimension, dimension))
            )
        if _distance(x, x.conj().T) > tol:
            raise ValueError("Matrix for {} is not Hermitian".format(g))
        if g.mode == Mode.PROJECTOR:
            if _distance(x @ x, x) > tol:
                raise ValueError("Matrix for {} is not a projector".format(g))
        elif _distance(x @ x, identity) > tol:
            raise ValueError("Matrix for {} does not square to the identity".format(g))
        groups.setdefault((g.party, g.setting), []).append(g)

    for (party, setting), letters in groups.items():
        if letters[0].mode != Mode.PROJECTOR:
            continue
        for i, a in enumerate(letters):
            for b in letters[i + 1 :]:
                if _distance(assignment[a] @ assignment[b], np.zeros_like(identity)) > tol:
                    raise ValueError("Projectors {} and {} are not orthogonal".format(a, b))
        if _distance(sum(assignment[a] for a in letters), identity) > tol:
            raise ValueError(
                "Projectors of {}{} do not sum to the identity".format(party2letter(party), setting + 1)
            )

    letters = list(assignment)
    for i, a in enumerate(letters):
        for b in letters[i + 1 :]:
            if a.party != b.party:
                x, y = assignment[a], assignment[b]
                if _distance(x @ y, y @ x) > tol:
                    raise ValueError("Operators {} and {} of different parties do not commute".format(a, b))
    return dimension


def evaluate_word(
    word: Iterable[Generator], assignment: Mapping[Generator, np.ndarray], dimension: int
) -> np.ndarray:
    """Product of the matrices of a word, in operator order (no rewriting)."""
    result = np.eye(dimension, dtype=complex)
    for x in word:
        try:
            result = result @ assignment[x]
        except KeyError:
            raise ValueError("No matrix assigned to {}".format(x))
    return result


def instantiate(
    p: NCPolynomial, assignment: Mapping[Generator, np.ndarray], tol: float = 1e-10
) -> np.ndarray:
    """Evaluates a polynomial on matrices.

    Args:
    - p (NCPolynomial): Polynomial
    - assignment (Mapping[Generator, np.ndarray]): One matrix per generator (checked with `check_assignment`)
    - tol (float, optional): Tolerance of the relation checks. Defaults to 1e-10.

    Returns:
    - np.ndarray: Complex matrix
    """
    dimension = check_assignment(assignment, tol)
    result = np.zeros((dimension, dimension), dtype=complex)
    for monomial, coefficient in p.terms.items():
        result += coefficient * evaluate_word(monomial.word, assignment, dimension)
    return result


_LETTER_RE = re.compile(r"^([A-Z]+)([0-9]+)(?::([0-9]+))?$")


def _to_generator(token: str) -> Generator:
    match = _LETTER_RE.match(token)
    if not match or int(match.group(2)) < 1:
        raise ValueError("Could not parse generator {}".format(token))
    outcome = None if match.group(3) is None else int(match.group(3))
    return Generator(letter2party(match.group(1)), int(match.group(2)) - 1, outcome)


_GENERATOR = pyparsing.Regex(r"[A-Z]+[0-9]+(:[0-9]+)?")
_WORD = pyparsing.Keyword("I") | pyparsing.Keyword("0") | pyparsing.OneOrMore(_GENERATOR)


def parse_word(text: str) -> Word:
    """Parses a word written as space-separated generators, e.g. "A1 B2" or "A1:0 B1:1" ("I" is the empty word).

    Raises:
    - ValueError: Could not parse the word
    """
    try:
        tokens = _WORD.parseString(text.strip(), parseAll=True).asList()
    except pyparsing.ParseException:
        raise ValueError("Could not parse monomial {}".format(text.strip()))
    if tokens == ["I"]:
        return ()
    if tokens == ["0"]:
        raise ValueError("The zero monomial is not a word")
    return tuple(_to_generator(token) for token in tokens)


def parse_monomial(text: str, schema: Optional[Schema] = None) -> Monomial:
    """Parses a monomial and reduces it ("0" gives ZERO).

    Raises:
    - ValueError: Could not parse the monomial
    - SchemaError: Generators out of the schema
    """
    if text.strip() == "0":
        return ZERO
    return reduce_word(parse_word(text), schema)


def dump_polynomial(p: NCPolynomial) -> str:
    """Serializes a polynomial as "coefficient * monomial" terms separated by " + "."""
    if not p.terms:
        return "0"
    return " + ".join("{} * {}".format(dump_real(c), m) for m, c in p.items())
