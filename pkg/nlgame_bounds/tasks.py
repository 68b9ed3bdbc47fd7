"""Tasks run by the command-line front end, and the report every run produces."""
import time
from typing import Any, Dict, Iterable, List, Optional, TypeVar

from simpletasks import Task

from . import __version__
from .certificates import Certificate, CertificateError, extract, read_certificate, verify, write_certificate
from .games import Game
from .hierarchy import (
    Formulation,
    LevelResult,
    LevelSpec,
    RelaxationProblem,
    build_relaxation,
    is_monotone,
    level_sequence,
    relaxation_bound,
)
from .notation import dump_bound, dump_real, party2letter
from .oracles import DeterministicStrategy, SeeSawState, best_classical_strategy, seesaw
from .sdp import export_sdpa
from .solver import SDPSolution, SolverOptions, solve

T = TypeVar("T")


class RunReport:
    """Flat `key = value` record of a run; keys keep their insertion order."""

    def __init__(self, command: str) -> None:
        self.fields: Dict[str, str] = {}
        self.add("command", command)

    def add(self, key: str, value: Any) -> None:
        if " " in key or "=" in key:
            raise ValueError("Invalid report key '{}'".format(key))
        text = value if isinstance(value, str) else str(value)
        self.fields[key] = text.replace("\n", " ")

    def __getitem__(self, key: str) -> str:
        return self.fields[key]

    def __contains__(self, key: object) -> bool:
        return key in self.fields

    def dumps(self) -> str:
        return "".join("{} = {}\n".format(key, value) for key, value in self.fields.items())

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.dumps())

    @staticmethod
    def parse(text: str) -> "RunReport":
        """Reads back the output of `dumps`.

        Raises:
        - ValueError: A line is not of the form `key = value`
        """
        report = RunReport("")
        report.fields.clear()
        for n, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            key, sep, value = line.partition(" = ")
            if not sep:
                raise ValueError("Line {}: expected 'key = value'".format(n))
            report.fields[key] = value
        return report

    def __repr__(self) -> str:
        return "RunReport({})".format(self.fields.get("command"))


def _game_fields(report: RunReport, game: Game, game_hash: str) -> None:
    report.add("game", game.name)
    report.add("hash", game_hash)


def _finish(report: RunReport, start: float, path: Optional[str]) -> RunReport:
    report.add("seconds", "{:.3f}".format(time.monotonic() - start))
    report.add("version", __version__)
    if path is not None:
        report.write(path)
    return report


def _dump_options(options: SolverOptions) -> str:
    return " ".join(
        "{}={}".format(key, dump_real(value) if isinstance(value, float) else value)
        for key, value in options.as_dict().items()
    )


class SolveTask(Task):
    """Solves one hierarchy level of a game, with optional certificate, SDPA export and report."""

    def __init__(
        self,
        game: Game,
        game_hash: str,
        level: LevelSpec,
        formulation: Formulation = Formulation.MOMENT,
        solver_options: Optional[SolverOptions] = None,
        solver: str = "ipm",
        certificate_path: Optional[str] = None,
        export_path: Optional[str] = None,
        report_path: Optional[str] = None,
        *args,
        **kwargs
    ):
        """Initializes the task

        Args:
        - game (Game): Game to bound
        - game_hash (str): SHA-256 of the game source, copied to the report
        - level (LevelSpec): Hierarchy level
        - formulation (Formulation, optional): Moment or SOS program. Defaults to Formulation.MOMENT.
        - solver_options (Optional[SolverOptions], optional): Interior-point settings. Defaults to SolverOptions().
        - solver (str, optional): "ipm" to solve, "export" to only write the SDPA file. Defaults to "ipm".
        - certificate_path (Optional[str], optional): Where to write the certificate of an optimal solve
        - export_path (Optional[str], optional): Where to write the program in SDPA format
        - report_path (Optional[str], optional): Where to write the run report

        Raises:
        - ValueError: Unknown solver, or "export" without an export path
        """
        super().__init__(*args, **kwargs)
        if solver not in ("ipm", "export"):
            raise ValueError("Unknown solver '{}'".format(solver))
        if solver == "export" and export_path is None:
            raise ValueError("Solver 'export' needs an SDPA output path")
        self.game = game
        self.game_hash = game_hash
        self.level = level
        self.formulation = formulation
        self.solver_options = solver_options or SolverOptions()
        self.solver = solver
        self.certificate_path = certificate_path
        self.export_path = export_path
        self.report_path = report_path
        self.problem: Optional[RelaxationProblem] = None
        self.solution: Optional[SDPSolution] = None
        self.certificate: Optional[Certificate] = None

    def do(self) -> RunReport:
        start = time.monotonic()
        report = RunReport("solve")
        _game_fields(report, self.game, self.game_hash)
        report.add("level", self.level)
        report.add("formulation", self.formulation.value)
        report.add("solver", self.solver)
        report.add("options", _dump_options(self.solver_options))

        self.problem = build_relaxation(self.game, self.level, self.formulation)
        self.logger.info(
            "Level {}: basis of {} monomials, {} constraints".format(
                self.level, len(self.problem.basis), self.problem.sdp.num_constraints
            )
        )
        report.add("basis", len(self.problem.basis))
        report.add("constraints", self.problem.sdp.num_constraints)
        if self.export_path is not None:
            export_sdpa(self.problem.sdp, self.export_path)
            self.logger.info("Wrote {}".format(self.export_path))
        if self.solver == "export":
            report.add("status", "exported")
            return _finish(report, start, self.report_path)

        self.solution = solve(self.problem.sdp, self.solver_options)
        bound = relaxation_bound(self.solution)
        report.add("bound", dump_bound(bound))
        report.add("bound_exact", dump_real(bound))
        report.add("status", self.solution.status.value)
        report.add("iterations", self.solution.iterations)
        report.add("primal_residual", "{:.3e}".format(self.solution.primal_residual))
        report.add("dual_residual", "{:.3e}".format(self.solution.dual_residual))
        report.add("gap", "{:.3e}".format(self.solution.gap))

        if self.certificate_path is not None:
            try:
                self.certificate = extract(self.solution, self.problem)
            except CertificateError as e:
                self.logger.warning("No certificate: {}".format(e))
            else:
                write_certificate(self.certificate, self.certificate_path)
                report.add("certificate_residual", "{:.3e}".format(self.certificate.residual))
        return _finish(report, start, self.report_path)


class SequenceTask(Task):
    """Solves the full levels 1..max_level and checks that the bounds never increase."""

    def __init__(
        self,
        game: Game,
        game_hash: str,
        max_level: int,
        formulation: Formulation = Formulation.MOMENT,
        solver_options: Optional[SolverOptions] = None,
        report_path: Optional[str] = None,
        *args,
        **kwargs
    ):
        super().__init__(*args, **kwargs)
        if max_level < 1:
            raise ValueError("Maximum level must be at least 1, got {}".format(max_level))
        self.game = game
        self.game_hash = game_hash
        self.max_level = max_level
        self.formulation = formulation
        self.solver_options = solver_options or SolverOptions()
        self.report_path = report_path
        self.results: List[LevelResult] = []
        self.monotone = True

    def _levels(self, levels: Iterable[T]) -> Iterable[T]:
        return self.progress(levels, desc="Levels")

    def do(self) -> RunReport:
        start = time.monotonic()
        report = RunReport("sequence")
        _game_fields(report, self.game, self.game_hash)
        report.add("formulation", self.formulation.value)
        report.add("options", _dump_options(self.solver_options))
        self.results = level_sequence(
            self.game, self.max_level, self.solver_options, self.formulation, progress=self._levels
        )
        for result in self.results:
            report.add("bound_{}".format(result.level), dump_bound(result.bound))
            report.add("status_{}".format(result.level), result.status.value)
            report.add("seconds_{}".format(result.level), "{:.3f}".format(result.seconds))
        self.monotone = is_monotone(self.results)
        if not self.monotone:
            self.logger.warning("Bounds increase with the level")
        report.add("monotone", "yes" if self.monotone else "no")
        return _finish(report, start, self.report_path)


def dump_strategy(strategy: DeterministicStrategy) -> str:
    """A1=0 A2=1 B1=1 ... (settings 1-based)."""
    return " ".join(
        "{}{}={}".format(party2letter(party), setting + 1, answer)
        for party, answers in enumerate(strategy.outputs)
        for setting, answer in enumerate(answers)
    )


class ClassicalTask(Task):
    """Exact classical value by enumeration of deterministic strategies."""

    def __init__(self, game: Game, game_hash: str, report_path: Optional[str] = None, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.game = game
        self.game_hash = game_hash
        self.report_path = report_path
        self.value: Optional[float] = None

    def do(self) -> RunReport:
        start = time.monotonic()
        report = RunReport("classical")
        _game_fields(report, self.game, self.game_hash)
        self.value, strategy = best_classical_strategy(self.game)
        self.logger.info("Classical value {:.10g} with {}".format(self.value, dump_strategy(strategy)))
        report.add("value", dump_bound(self.value))
        report.add("value_exact", dump_real(self.value))
        report.add("strategy", dump_strategy(strategy))
        return _finish(report, start, self.report_path)


class SeesawTask(Task):
    """Quantum lower bound from the see-saw iteration at a fixed local dimension."""

    def __init__(
        self,
        game: Game,
        game_hash: str,
        dim: int = 2,
        restarts: int = 10,
        seed: int = 0,
        report_path: Optional[str] = None,
        *args,
        **kwargs
    ):
        super().__init__(*args, **kwargs)
        self.game = game
        self.game_hash = game_hash
        self.dim = dim
        self.restarts = restarts
        self.seed = seed
        self.report_path = report_path
        self.state: Optional[SeeSawState] = None

    def do(self) -> RunReport:
        start = time.monotonic()
        report = RunReport("seesaw")
        _game_fields(report, self.game, self.game_hash)
        report.add("dim", self.dim)
        report.add("restarts", self.restarts)
        report.add("seed", self.seed)
        self.state = seesaw(
            self.game,
            self.dim,
            self.restarts,
            self.seed,
            progress=lambda runs: self.progress(runs, desc="Restarts"),
        )
        report.add("value", dump_bound(self.state.value))
        report.add("value_exact", dump_real(self.state.value))
        report.add("sweeps", self.state.sweeps)
        return _finish(report, start, self.report_path)


class VerifyCertificateTask(Task):
    """Re-checks a certificate file against a game."""

    def __init__(
        self,
        certificate_path: str,
        game: Game,
        game_hash: str,
        tol: float = 1e-6,
        report_path: Optional[str] = None,
        *args,
        **kwargs
    ):
        super().__init__(*args, **kwargs)
        self.certificate_path = certificate_path
        self.game = game
        self.game_hash = game_hash
        self.tol = tol
        self.report_path = report_path
        self.residual: Optional[float] = None
        self.verified = False

    def do(self) -> RunReport:
        """Reads and verifies the certificate.

        A certificate that parses but is unsound (invalid relation, negative weight) is reported as not
        verified, with an infinite residual.

        Raises:
        - CertificateParseError: Malformed certificate file
        """
        start = time.monotonic()
        report = RunReport("verify-cert")
        _game_fields(report, self.game, self.game_hash)
        certificate = read_certificate(self.certificate_path)
        report.add("bound", dump_bound(certificate.bound))
        try:
            self.residual = verify(certificate, self.game)
        except ValueError as e:
            self.logger.warning("Certificate rejected: {}".format(e))
            self.residual = float("inf")
        self.verified = self.residual <= self.tol
        report.add("residual", dump_bound(self.residual))
        report.add("tolerance", dump_real(self.tol))
        report.add("verified", "yes" if self.verified else "no")
        return _finish(report, start, self.report_path)
