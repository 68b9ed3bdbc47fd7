"""Sum-of-squares certificates, checked by rewriting in the quotient algebra."""
import logging
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .algebra import (
    Mode,
    Monomial,
    NCPolynomial,
    Relation,
    RelationKind,
    Schema,
    SchemaError,
    parse_monomial,
    parse_word,
    reduce_with_trace,
    reduce_word,
)
from .games import Game, bell_operator
from .hierarchy import MonomialBasis, RelaxationProblem
from .notation import dump_real, str2index, str2real
from .solver import SDPSolution

logger = logging.getLogger(__name__)

NEGATIVE_EIGENVALUE_TOLERANCE = 1e-8


class CertificateError(ValueError):
    """Certificate cannot be built or is malformed."""


class CertificateParseError(CertificateError):
    """Certificate file could not be parsed. `line` is the 1-based line number when known."""

    def __init__(self, line: Optional[int], message: str) -> None:
        self.line = line
        super().__init__(message if line is None else "Line {}: {}".format(line, message))


class Square(NamedTuple):
    """weight * r^dagger r, with r = sum_j coefficients[j] z_j."""

    weight: float
    coefficients: np.ndarray


class Multiplier(NamedTuple):
    """weight * left^dagger * relation * right."""

    relation: Relation
    left: Monomial
    right: Monomial
    weight: float


class Certificate:
    """Upper bound witness for a game.

    Args:
    - bound (float): nu
    - basis (MonomialBasis): Basis z
    - gram (np.ndarray): Gram matrix Gamma as returned by the solver
    - squares (Sequence[Square]): Weighted squares (weights >= 0)
    - multipliers (Sequence[Multiplier]): Relation terms
    - residual (float): Largest coefficient of the residual polynomial when the certificate was made
    """

    def __init__(
        self,
        bound: float,
        basis: MonomialBasis,
        gram: np.ndarray,
        squares: Sequence[Square],
        multipliers: Sequence[Multiplier],
        residual: float,
    ) -> None:
        self.bound = bound
        self.basis = basis
        self.gram = gram
        self.squares = list(squares)
        self.multipliers = list(multipliers)
        self.residual = residual

    def square_gram(self) -> np.ndarray:
        """sum_i d_i c_i c_i^T."""
        n = len(self.basis)
        result = np.zeros((n, n))
        for square in self.squares:
            result += square.weight * np.outer(square.coefficients, square.coefficients)
        return result

    def square_sum(self) -> NCPolynomial:
        """sum_i d_i r_i^dagger r_i, reduced."""
        return _quadratic_form(self.basis, self.square_gram())

    def multiplier_sum(self) -> NCPolynomial:
        terms: Dict[Monomial, float] = {}
        for multiplier in self.multipliers:
            prefix = tuple(reversed(multiplier.left.word))
            for coefficient, word in multiplier.relation.terms():
                m = reduce_word(prefix + word + multiplier.right.word)
                if not m.is_zero:
                    terms[m] = terms.get(m, 0.0) + multiplier.weight * coefficient
        return NCPolynomial(terms)

    def __repr__(self) -> str:
        return "Certificate(bound={}, basis={}, squares={}, multipliers={})".format(
            self.bound, len(self.basis), len(self.squares), len(self.multipliers)
        )


def _quadratic_form(basis: MonomialBasis, gram: np.ndarray) -> NCPolynomial:
    terms: Dict[Monomial, float] = {}
    for i, left in enumerate(basis):
        prefix = tuple(reversed(left.word))
        for j, right in enumerate(basis):
            if gram[i, j] == 0:
                continue
            m = reduce_word(prefix + right.word)
            if not m.is_zero:
                terms[m] = terms.get(m, 0.0) + float(gram[i, j])
    return NCPolynomial(terms)


def residual_polynomial(certificate: Certificate, bell: NCPolynomial) -> NCPolynomial:
    """nu I - B - squares - multipliers, in the quotient algebra."""
    return (
        NCPolynomial.constant(certificate.bound)
        - bell
        - certificate.square_sum()
        - certificate.multiplier_sum()
    )


def extract(solution: SDPSolution, problem: RelaxationProblem) -> Certificate:
    """Builds a certificate from an optimal solution of a relaxation.

    The Gram matrix is eigendecomposed; eigenvalues in [-1e-8, 0) are clipped to 0. Completeness multipliers
    come from the solution vector, idempotence and orthogonality multipliers from the rewriting of every
    z_i^dagger z_j.

    Raises:
    - CertificateError: Solution not optimal, or Gram matrix with an eigenvalue below -1e-8
    """
    if not solution.optimal:
        raise CertificateError(
            "Cannot extract a certificate from a {} solution".format(solution.status.value)
        )
    gram = np.asarray(solution.gram[0])
    gram = (gram + gram.T) / 2
    values, vectors = scipy.linalg.eigh(gram)
    if values[0] < -NEGATIVE_EIGENVALUE_TOLERANCE:
        raise CertificateError(
            "Gram matrix is not positive semidefinite (eigenvalue {:.3e})".format(values[0])
        )
    values = np.where(values < 0, 0.0, values)
    squares = [Square(float(d), vectors[:, t].copy()) for t, d in enumerate(values) if d > 0]
    clipped = (vectors * values) @ vectors.T

    multipliers: Dict[Tuple[Relation, Monomial, Monomial], float] = {}

    def add(relation: Relation, left: Monomial, right: Monomial, weight: float) -> None:
        if weight != 0:
            key = (relation, left, right)
            multipliers[key] = multipliers.get(key, 0.0) + weight

    if problem.relation_terms:
        weights = solution.vector @ problem.relation_weights
        for term, weight in zip(problem.relation_terms, weights):
            add(term.relation, term.left, term.right, -float(weight))
    for elimination in problem.eliminations:
        add(elimination.relation, elimination.left, elimination.right, -elimination.coefficient)
    basis = problem.basis
    for i, left in enumerate(basis):
        prefix = tuple(reversed(left.word))
        for j, right in enumerate(basis):
            entry = float(clipped[i, j])
            if entry == 0:
                continue
            _, steps = reduce_with_trace(prefix + right.word)
            for step in steps:
                add(
                    step.relation,
                    reduce_word(reversed(step.prefix)),
                    reduce_word(step.suffix),
                    -entry * step.coefficient,
                )

    ordered = sorted(
        multipliers.items(),
        key=lambda item: (
            item[0][0].kind.value,
            tuple(x.sort_key() for x in item[0][0].letters),
            item[0][1].sort_key(),
            item[0][2].sort_key(),
        ),
    )
    certificate = Certificate(
        float(solution.vector[0]),
        basis,
        gram,
        squares,
        [
            Multiplier(relation, left, right, weight)
            for (relation, left, right), weight in ordered
            if weight != 0
        ],
        0.0,
    )
    certificate.residual = verify(certificate, problem.game)
    logger.info(
        "Certificate: bound {:.10g}, {} squares, {} multipliers, residual {:.2e}".format(
            certificate.bound, len(certificate.squares), len(certificate.multipliers), certificate.residual
        )
    )
    return certificate


def _check_relation(relation: Relation, schema: Schema) -> None:
    letters = relation.letters
    for x in letters:
        schema.check(x)
    if relation.kind == RelationKind.IDEMPOTENCE:
        valid = len(letters) == 1
    elif relation.kind == RelationKind.ORTHOGONALITY:
        valid = (
            len(letters) == 2
            and schema.mode == Mode.PROJECTOR
            and letters[0].party == letters[1].party
            and letters[0].setting == letters[1].setting
            and letters[0].outcome != letters[1].outcome
        )
    else:
        valid = (
            schema.mode == Mode.PROJECTOR
            and len(letters) > 0
            and relation == Relation.completeness(
                letters[0].party, letters[0].setting, schema.outcomes[letters[0].party][letters[0].setting]
            )
        )
    if not valid:
        raise SchemaError("Invalid relation {}".format(relation))


def verify(certificate: Certificate, game: Game) -> float:
    """Checks a certificate against a game.

    Args:
    - certificate (Certificate): Certificate
    - game (Game): Game whose Bell operator is bounded

    Raises:
    - SchemaError: Monomials or relations do not fit the game
    - CertificateError: Negative square weight, or coefficient vectors of the wrong size

    Returns:
    - float: Largest absolute coefficient of nu I - B - squares - multipliers
    """
    schema = game.schema
    for m in certificate.basis:
        for x in m.word:
            schema.check(x)
    for square in certificate.squares:
        if square.weight < 0:
            raise CertificateError("Negative square weight {}".format(square.weight))
        if len(square.coefficients) != len(certificate.basis):
            raise CertificateError(
                "Square has {} coefficients, expected {}".format(
                    len(square.coefficients), len(certificate.basis)
                )
            )
    for multiplier in certificate.multipliers:
        _check_relation(multiplier.relation, schema)
        for x in multiplier.left.word + multiplier.right.word:
            schema.check(x)
    residual = residual_polynomial(certificate, bell_operator(game).as_polynomial())
    return residual.max_abs_coefficient()


def serialize_certificate(certificate: Certificate) -> str:
    """Text form: bound, basis, gram, squares, multipliers and residual sections, 17 significant digits."""
    lines = ["bound {}".format(dump_real(certificate.bound)), "basis {}".format(len(certificate.basis))]
    lines += [str(m) for m in certificate.basis]
    lines.append("gram")
    lines += [" ".join(dump_real(v) for v in row) for row in certificate.gram]
    lines.append("squares {}".format(len(certificate.squares)))
    lines += [
        " ".join([dump_real(s.weight)] + [dump_real(v) for v in s.coefficients]) for s in certificate.squares
    ]
    lines.append("multipliers {}".format(len(certificate.multipliers)))
    lines += [
        "{} ; {} ; {} ; {}".format(m.relation, m.left, m.right, dump_real(m.weight))
        for m in certificate.multipliers
    ]
    lines.append("residual {}".format(dump_real(certificate.residual)))
    return "\n".join(lines) + "\n"


class _Reader:
    def __init__(self, text: str) -> None:
        self.lines = [(n, line.strip()) for n, line in enumerate(text.splitlines(), start=1)]
        self.lines = [(n, line) for n, line in self.lines if line and not line.startswith("#")]
        self.position = 0
        self.last = len(text.splitlines()) + 1

    def next(self) -> Tuple[int, str]:
        if self.position >= len(self.lines):
            raise CertificateParseError(self.last, "unexpected end of file")
        line = self.lines[self.position]
        self.position += 1
        return line

    def section(self, name: str, counted: bool) -> Tuple[int, int]:
        number, line = self.next()
        tokens = line.split()
        if not tokens or tokens[0] != name or len(tokens) != (2 if counted else 1):
            raise CertificateParseError(number, "expected '{}' section".format(name))
        if not counted:
            return number, 0
        try:
            return number, str2index(tokens[1])
        except ValueError as e:
            raise CertificateParseError(number, str(e))

    def reals(self, number: int, tokens: Sequence[str], count: int) -> List[float]:
        if len(tokens) != count:
            raise CertificateParseError(number, "expected {} values, got {}".format(count, len(tokens)))
        try:
            return [str2real(t) for t in tokens]
        except ValueError as e:
            raise CertificateParseError(number, str(e))


def parse_certificate(text: str) -> Certificate:
    """Parses the text form written by `serialize_certificate`.

    Raises:
    - CertificateParseError: Truncated or malformed file (with its line number)
    """
    reader = _Reader(text)
    number, line = reader.next()
    tokens = line.split()
    if not tokens or tokens[0] != "bound":
        raise CertificateParseError(number, "expected 'bound' section")
    (bound,) = reader.reals(number, tokens[1:], 1)

    _, n = reader.section("basis", True)
    monomials = []
    for _ in range(n):
        number, line = reader.next()
        try:
            monomials.append(parse_monomial(line))
        except ValueError as e:
            raise CertificateParseError(number, str(e))
    try:
        basis = MonomialBasis(monomials)
    except ValueError as e:
        raise CertificateParseError(None, str(e))

    reader.section("gram", False)
    gram = np.zeros((n, n))
    for i in range(n):
        number, line = reader.next()
        gram[i, :] = reader.reals(number, line.split(), n)

    _, count = reader.section("squares", True)
    squares = []
    for _ in range(count):
        number, line = reader.next()
        values = reader.reals(number, line.split(), n + 1)
        squares.append(Square(values[0], np.asarray(values[1:])))

    _, count = reader.section("multipliers", True)
    multipliers = []
    for _ in range(count):
        number, line = reader.next()
        parts = [p.strip() for p in line.split(";")]
        if len(parts) != 4:
            raise CertificateParseError(number, "expected 'relation ; left ; right ; weight'")
        kind, _, letters = parts[0].partition(" ")
        try:
            relation = Relation(RelationKind(kind), parse_word(letters))
            left, right = parse_monomial(parts[1]), parse_monomial(parts[2])
        except ValueError as e:
            raise CertificateParseError(number, str(e))
        (weight,) = reader.reals(number, [parts[3]], 1)
        multipliers.append(Multiplier(relation, left, right, weight))

    number, line = reader.next()
    tokens = line.split()
    if not tokens or tokens[0] != "residual":
        raise CertificateParseError(number, "expected 'residual' section")
    (residual,) = reader.reals(number, tokens[1:], 1)
    return Certificate(bound, basis, gram, squares, multipliers, residual)


def read_certificate(path: str) -> Certificate:
    with open(path) as f:
        return parse_certificate(f.read())


def write_certificate(certificate: Certificate, path: str) -> None:
    with open(path, "w") as f:
        f.write(serialize_certificate(certificate))
