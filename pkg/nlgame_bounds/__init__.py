from .algebra import Generator, Mode, Monomial, NCPolynomial, Relation, RelationKind, Schema, SchemaError
from .certificates import Certificate, extract, read_certificate, verify, write_certificate
from .games import Game, GameForm, bell_operator, builtin, load_game, parse_game
from .hierarchy import (
    Formulation,
    LevelSpec,
    build_moment_sdp,
    build_relaxation,
    build_sos_sdp,
    level_sequence,
)
from .oracles import classical_value, random_valid_assignment, seesaw, seesaw_lower_bound
from .sdp import Form, SDPProblem, parse_sdpa
from .solver import SDPSolution, SolverOptions, Status, solve

__version__ = "0.1.0"

__all__ = [
    "Generator",
    "Mode",
    "Monomial",
    "NCPolynomial",
    "Relation",
    "RelationKind",
    "Schema",
    "SchemaError",
    "Certificate",
    "extract",
    "read_certificate",
    "verify",
    "write_certificate",
    "Game",
    "GameForm",
    "bell_operator",
    "builtin",
    "load_game",
    "parse_game",
    "Formulation",
    "LevelSpec",
    "build_moment_sdp",
    "build_relaxation",
    "build_sos_sdp",
    "level_sequence",
    "classical_value",
    "random_valid_assignment",
    "seesaw",
    "seesaw_lower_bound",
    "Form",
    "SDPProblem",
    "parse_sdpa",
    "SDPSolution",
    "SolverOptions",
    "Status",
    "solve",
]
