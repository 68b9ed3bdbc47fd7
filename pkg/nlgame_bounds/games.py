import enum
import hashlib
import itertools
import logging
import math
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import pyparsing

from .algebra import IDENTITY, Generator, Mode, NCPolynomial, Schema, SchemaError
from .notation import dump_real, party2letter, str2index, str2real

logger = logging.getLogger(__name__)

Inputs = Tuple[int, ...]
Outputs = Tuple[int, ...]

DISTRIBUTION_TOLERANCE = 1e-12


class GameError(ValueError):
    """Invalid game content."""


class GameParseError(GameError):
    """Game file could not be parsed. `line` is the 1-based line number when known."""

    def __init__(self, line: Optional[int], message: str) -> None:
        self.line = line
        super().__init__(message if line is None else "Line {}: {}".format(line, message))


class GameForm(enum.Enum):
    PROBABILITY = "probability"
    CORRELATOR = "correlator"


class Game:
    """A nonlocal game, in probability form (distribution pi over inputs, payoff V over outputs given inputs)
    or in correlator form (coefficients on products of one operator per party, plus single-party marginals
    and a constant).

    Args:
    - name (str): Game name
    - outcomes (Sequence[Sequence[int]]): outcomes[j][s] is the number of outcomes of setting s of party j
    - form (GameForm): Game form
    - distribution (Optional[Mapping[Inputs, float]], optional): pi (probability form). Defaults to uniform.
    - payoff (Optional[Mapping[Tuple[Outputs, Inputs], float]], optional): V, entries in [0, 1], missing entries are 0
    - correlators (Optional[Mapping[Inputs, float]], optional): Full-correlator coefficients (correlator form)
    - marginals (Optional[Mapping[Tuple[int, int], float]], optional): Coefficients of single operators, keyed (party, setting)
    - constant (float, optional): Identity coefficient (correlator form). Defaults to 0.
    - mode (Optional[Mode], optional): Generator mode of a correlator-form game. Defaults to observables.

    Raises:
    - GameError: Inconsistent game
    - SchemaError: Invalid party/setting/outcome counts
    """

    def __init__(
        self,
        name: str,
        outcomes: Sequence[Sequence[int]],
        form: GameForm,
        distribution: Optional[Mapping[Inputs, float]] = None,
        payoff: Optional[Mapping[Tuple[Outputs, Inputs], float]] = None,
        correlators: Optional[Mapping[Inputs, float]] = None,
        marginals: Optional[Mapping[Tuple[int, int], float]] = None,
        constant: float = 0.0,
        mode: Optional[Mode] = None,
    ) -> None:
        self.name = name
        self.form = form
        self.notes: List[str] = []
        if form == GameForm.PROBABILITY:
            if mode not in (None, Mode.PROJECTOR):
                raise GameError("Probability-form games use projector generators")
            self.schema = Schema(outcomes, Mode.PROJECTOR)
        else:
            if any(m != 2 for row in outcomes for m in row):
                raise GameError("Correlator form requires 2 outcomes for every setting")
            self.schema = Schema(outcomes, mode or Mode.OBSERVABLE)

        self.distribution: Dict[Inputs, float] = {}
        self.payoff: Dict[Tuple[Outputs, Inputs], float] = {}
        self.correlators: Dict[Inputs, float] = {}
        self.marginals: Dict[Tuple[int, int], float] = {}
        self.constant = float(constant)

        if form == GameForm.PROBABILITY:
            if correlators or marginals or constant:
                raise GameError("Probability-form games have no correlator coefficients")
            if distribution is None:
                count = math.prod(self.settings)
                distribution = {s: 1.0 / count for s in self.inputs()}
                self.notes.append("no pi lines, uniform distribution applied")
                logger.warning("Game {}: no distribution given, using the uniform distribution".format(name))
            for inputs, value in distribution.items():
                self._check_inputs(tuple(inputs), "pi")
                if value < 0:
                    raise GameError("pi: negative probability {} for inputs {}".format(value, inputs))
                if value != 0:
                    self.distribution[tuple(inputs)] = float(value)
            total = math.fsum(self.distribution.values())
            if abs(total - 1) > DISTRIBUTION_TOLERANCE:
                raise GameError("pi: distribution sums to {}, expected 1".format(total))
            for (outputs, inputs), value in (payoff or {}).items():
                self._check_inputs(tuple(inputs), "v")
                self._check_outputs(tuple(outputs), tuple(inputs))
                if not 0 <= value <= 1:
                    raise GameError("v: payoff {} is not in [0, 1]".format(value))
                if value != 0:
                    self.payoff[(tuple(outputs), tuple(inputs))] = float(value)
        else:
            if distribution or payoff:
                raise GameError("Correlator-form games have no distribution or payoff")
            for inputs, value in (correlators or {}).items():
                self._check_inputs(tuple(inputs), "c")
                if value != 0:
                    self.correlators[tuple(inputs)] = float(value)
            for (party, setting), value in (marginals or {}).items():
                if not 0 <= party < self.num_parties or not 0 <= setting < self.settings[party]:
                    raise GameError("m: no setting {} for party {}".format(setting, party))
                if value != 0:
                    self.marginals[(party, setting)] = float(value)

    @property
    def num_parties(self) -> int:
        return self.schema.num_parties

    @property
    def settings(self) -> Tuple[int, ...]:
        return self.schema.settings

    @property
    def outcomes(self) -> Tuple[Tuple[int, ...], ...]:
        return self.schema.outcomes

    @property
    def mode(self) -> Mode:
        return self.schema.mode

    def inputs(self) -> List[Inputs]:
        """All input tuples, in lexicographic order."""
        return list(itertools.product(*(range(s) for s in self.settings)))

    def _check_inputs(self, inputs: Inputs, section: str) -> None:
        if len(inputs) != self.num_parties or any(
            not 0 <= s < count for s, count in zip(inputs, self.settings)
        ):
            raise GameError("{}: invalid inputs {}".format(section, inputs))

    def _check_outputs(self, outputs: Outputs, inputs: Inputs) -> None:
        if len(outputs) != self.num_parties or any(
            not 0 <= a < self.outcomes[j][s] for j, (a, s) in enumerate(zip(outputs, inputs))
        ):
            raise GameError("v: invalid outputs {} for inputs {}".format(outputs, inputs))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Game)
            and self.name == other.name
            and self.form == other.form
            and self.schema == other.schema
            and self.distribution == other.distribution
            and self.payoff == other.payoff
            and self.correlators == other.correlators
            and self.marginals == other.marginals
            and self.constant == other.constant
        )

    def __repr__(self) -> str:
        return "Game({}, {}, {})".format(self.name, self.form.value, self.schema)


class BellOperator(NamedTuple):
    """Hermitian Bell polynomial, split into its non-identity part and the identity coefficient."""

    polynomial: NCPolynomial
    offset: float
    mode: Mode

    def as_polynomial(self) -> NCPolynomial:
        return self.polynomial + self.offset


def _letter(game: Game, party: int, setting: int, outcome: int = 0) -> Generator:
    if game.mode == Mode.OBSERVABLE:
        return Generator(party, setting)
    return Generator(party, setting, outcome)


def bell_operator(game: Game) -> BellOperator:
    """Builds the Bell operator of a game.

    Probability form: sum of pi(s) V(a|s) X^{a_1}_{1,s_1} ... X^{a_N}_{N,s_N}.
    Correlator form: sum of c(s) X_{1,s_1} ... X_{N,s_N}, plus marginal terms and the constant.

    Returns:
    - BellOperator: Bell operator (Hermitian)
    """
    terms: List[Tuple[float, Tuple[Generator, ...]]] = []
    if game.form == GameForm.PROBABILITY:
        for (outputs, inputs), value in game.payoff.items():
            weight = game.distribution.get(inputs, 0.0) * value
            letters = tuple(_letter(game, j, s, a) for j, (s, a) in enumerate(zip(inputs, outputs)))
            terms.append((weight, letters))
    else:
        for inputs, value in game.correlators.items():
            terms.append((value, tuple(_letter(game, j, s) for j, s in enumerate(inputs))))
        for (party, setting), value in game.marginals.items():
            terms.append((value, (_letter(game, party, setting),)))
        terms.append((game.constant, ()))

    full = NCPolynomial.sum(terms)
    offset = full.coefficient(IDENTITY)
    polynomial = full - offset
    if not polynomial.is_hermitian():
        raise GameError("Bell operator of {} is not Hermitian".format(game.name))
    return BellOperator(polynomial, offset, game.mode)


def _chsh_game() -> Game:
    payoff = {
        ((a, b), (s, t)): 1.0
        for s, t, a, b in itertools.product(range(2), repeat=4)
        if (a ^ b) == (s & t)
    }
    distribution = {(s, t): 0.25 for s, t in itertools.product(range(2), repeat=2)}
    return Game("chsh-game", [[2, 2], [2, 2]], GameForm.PROBABILITY, distribution=distribution, payoff=payoff)


def _chsh_correlator() -> Game:
    return Game(
        "chsh-correlator",
        [[2, 2], [2, 2]],
        GameForm.CORRELATOR,
        correlators={(0, 0): 1, (0, 1): 1, (1, 0): 1, (1, 1): -1},
    )


def _i3322() -> Game:
    return Game(
        "i3322",
        [[2, 2, 2], [2, 2, 2]],
        GameForm.CORRELATOR,
        correlators={
            (0, 0): 1,
            (0, 1): 1,
            (0, 2): 1,
            (1, 0): 1,
            (1, 1): 1,
            (1, 2): -1,
            (2, 0): 1,
            (2, 1): -1,
        },
        marginals={(0, 0): -1, (1, 0): -2, (1, 1): -1},
        mode=Mode.PROJECTOR,
    )


def _yao() -> Game:
    return Game(
        "yao",
        [[2, 2, 2]] * 3,
        GameForm.CORRELATOR,
        correlators={
            (0, 1, 2): 1,
            (1, 2, 0): 1,
            (2, 0, 1): 1,
            (0, 2, 1): -1,
            (1, 0, 2): -1,
            (2, 1, 0): -1,
        },
    )


BUILTINS = {
    "chsh-game": _chsh_game,
    "chsh-correlator": _chsh_correlator,
    "i3322": _i3322,
    "yao": _yao,
}


def builtin(name: str) -> Game:
    """Returns a built-in game: chsh-game, chsh-correlator, i3322 or yao.

    Raises:
    - ValueError: Unknown name
    """
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ValueError("Unknown built-in game {} (available: {})".format(name, ", ".join(sorted(BUILTINS))))


_KEYWORDS = "game form mode parties settings outcomes pi v c m const"
_LINE = pyparsing.oneOf(_KEYWORDS, asKeyword=True)("keyword") + pyparsing.Group(
    pyparsing.ZeroOrMore(pyparsing.Word(pyparsing.printables, excludeChars="#"))
)("args")


class _Directive(NamedTuple):
    line: int
    keyword: str
    args: List[str]


def _tokenize(text: str) -> List[_Directive]:
    directives = []
    for number, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        try:
            parsed = _LINE.parseString(stripped, parseAll=True)
        except pyparsing.ParseException:
            raise GameParseError(number, "unknown directive {}".format(stripped.split()[0]))
        directives.append(_Directive(number, parsed["keyword"], list(parsed["args"])))
    return directives


def _indices(directive: _Directive, args: Sequence[str]) -> Tuple[int, ...]:
    try:
        return tuple(str2index(a) for a in args)
    except ValueError as e:
        raise GameParseError(directive.line, str(e))


def _real(directive: _Directive, arg: str) -> float:
    try:
        return str2real(arg)
    except ValueError as e:
        raise GameParseError(directive.line, str(e))


def _expect(directive: _Directive, count: int) -> None:
    if len(directive.args) != count:
        raise GameParseError(
            directive.line,
            "'{}' expects {} values, got {}".format(directive.keyword, count, len(directive.args)),
        )


def parse_game(text: str) -> Game:
    """Parses a game file.

    Header lines (game, form, parties, settings, outcomes, and optionally mode) may appear anywhere. Lines:
    - `outcomes <m>` or `outcomes <party> <setting> <m>` (0-based party and setting)
    - `pi <s_1..s_N> <value>`, `v <s_1..s_N> <a_1..a_N> <value>` (probability form)
    - `c <s_1..s_N> <value>`, `m <party> <setting> <value>`, `const <value>` (correlator form)
    `#` starts a comment. Missing `pi` lines mean a uniform distribution (recorded in `Game.notes`).

    Args:
    - text (str): File content

    Raises:
    - GameParseError: Syntax error (with its line number), missing header
    - GameError: Inconsistent content (e.g. distribution not summing to 1)

    Returns:
    - Game: Parsed game
    """
    directives = _tokenize(text)
    headers: Dict[str, _Directive] = {}
    for d in directives:
        if d.keyword in ("game", "form", "mode", "parties", "settings"):
            if d.keyword in headers:
                raise GameParseError(d.line, "duplicate '{}' line".format(d.keyword))
            headers[d.keyword] = d
    for keyword in ("game", "form", "parties", "settings"):
        if keyword not in headers:
            raise GameParseError(None, "missing '{}' line".format(keyword))

    _expect(headers["game"], 1)
    name = headers["game"].args[0]
    _expect(headers["form"], 1)
    try:
        form = GameForm(headers["form"].args[0])
    except ValueError:
        raise GameParseError(headers["form"].line, "unknown form {}".format(headers["form"].args[0]))
    mode = None
    if "mode" in headers:
        _expect(headers["mode"], 1)
        try:
            mode = Mode(headers["mode"].args[0])
        except ValueError:
            raise GameParseError(headers["mode"].line, "unknown mode {}".format(headers["mode"].args[0]))
    _expect(headers["parties"], 1)
    (parties,) = _indices(headers["parties"], headers["parties"].args)
    if parties < 1:
        raise GameParseError(headers["parties"].line, "at least one party is required")
    _expect(headers["settings"], parties)
    settings = _indices(headers["settings"], headers["settings"].args)

    outcomes: List[List[Optional[int]]] = [[None] * s for s in settings]
    for d in directives:
        if d.keyword != "outcomes":
            continue
        if len(d.args) == 1:
            (m,) = _indices(d, d.args)
            outcomes = [[m] * s for s in settings]
        elif len(d.args) == 3:
            party, setting, m = _indices(d, d.args)
            if party >= parties or setting >= settings[party]:
                raise GameParseError(d.line, "no setting {} for party {}".format(setting, party))
            outcomes[party][setting] = m
        else:
            raise GameParseError(d.line, "'outcomes' expects 1 or 3 values, got {}".format(len(d.args)))
    if any(m is None for row in outcomes for m in row):
        raise GameParseError(None, "missing 'outcomes' line")

    distribution: Dict[Inputs, float] = {}
    payoff: Dict[Tuple[Outputs, Inputs], float] = {}
    correlators: Dict[Inputs, float] = {}
    marginals: Dict[Tuple[int, int], float] = {}
    constant = 0.0
    seen_constant = False
    for d in directives:
        if d.keyword == "pi":
            _expect(d, parties + 1)
            key = _indices(d, d.args[:-1])
            if key in distribution:
                raise GameParseError(d.line, "duplicate pi entry")
            distribution[key] = _real(d, d.args[-1])
        elif d.keyword == "v":
            _expect(d, 2 * parties + 1)
            values = _indices(d, d.args[:-1])
            vkey = (values[parties:], values[:parties])
            if vkey in payoff:
                raise GameParseError(d.line, "duplicate v entry")
            payoff[vkey] = _real(d, d.args[-1])
        elif d.keyword == "c":
            _expect(d, parties + 1)
            key = _indices(d, d.args[:-1])
            if key in correlators:
                raise GameParseError(d.line, "duplicate c entry")
            correlators[key] = _real(d, d.args[-1])
        elif d.keyword == "m":
            _expect(d, 3)
            party, setting = _indices(d, d.args[:2])
            if (party, setting) in marginals:
                raise GameParseError(d.line, "duplicate m entry")
            marginals[(party, setting)] = _real(d, d.args[2])
        elif d.keyword == "const":
            _expect(d, 1)
            if seen_constant:
                raise GameParseError(d.line, "duplicate const line")
            constant = _real(d, d.args[0])
            seen_constant = True
        else:
            continue
        if form == GameForm.PROBABILITY and d.keyword in ("c", "m", "const"):
            raise GameParseError(d.line, "'{}' lines need the correlator form".format(d.keyword))
        if form == GameForm.CORRELATOR and d.keyword in ("pi", "v"):
            raise GameParseError(d.line, "'{}' lines need the probability form".format(d.keyword))

    try:
        return Game(
            name,
            [[int(m or 0) for m in row] for row in outcomes],
            form,
            distribution=distribution or None,
            payoff=payoff,
            correlators=correlators,
            marginals=marginals,
            constant=constant,
            mode=mode,
        )
    except SchemaError as e:
        raise GameParseError(None, str(e))


def serialize_game(game: Game) -> str:
    """Writes a game in the format read by `parse_game` (all entries explicit, sorted)."""
    lines = [
        "game {}".format(game.name),
        "form {}".format(game.form.value),
    ]
    if game.form == GameForm.CORRELATOR:
        lines.append("mode {}".format(game.mode.value))
    lines.append("parties {}".format(game.num_parties))
    lines.append("settings {}".format(" ".join(str(s) for s in game.settings)))
    counts = {m for row in game.outcomes for m in row}
    if len(counts) == 1:
        lines.append("outcomes {}".format(counts.pop()))
    else:
        for party, row in enumerate(game.outcomes):
            for setting, m in enumerate(row):
                lines.append("outcomes {} {} {}".format(party, setting, m))

    def indices(values: Sequence[int]) -> str:
        return " ".join(str(v) for v in values)

    for inputs, value in sorted(game.distribution.items()):
        lines.append("pi {} {}".format(indices(inputs), dump_real(value)))
    for (outputs, inputs), value in sorted(game.payoff.items(), key=lambda item: (item[0][1], item[0][0])):
        lines.append("v {} {} {}".format(indices(inputs), indices(outputs), dump_real(value)))
    for inputs, value in sorted(game.correlators.items()):
        lines.append("c {} {}".format(indices(inputs), dump_real(value)))
    for (party, setting), value in sorted(game.marginals.items()):
        comment = "{}{}".format(party2letter(party), setting + 1)
        lines.append("m {} {} {}  # {}".format(party, setting, dump_real(value), comment))
    if game.constant:
        lines.append("const {}".format(dump_real(game.constant)))
    return "\n".join(lines) + "\n"


def load_game(reference: str) -> Tuple[Game, str]:
    """Loads a game from `builtin:<name>` or a file path.

    Returns:
    - Tuple[Game, str]: Game and SHA-256 of its source (file bytes, or serialized built-in)
    """
    if reference.startswith("builtin:"):
        game = builtin(reference[len("builtin:") :])
        return game, hashlib.sha256(serialize_game(game).encode("utf-8")).hexdigest()
    with open(reference, "rb") as f:
        content = f.read()
    return parse_game(content.decode("utf-8")), hashlib.sha256(content).hexdigest()
