import logging
import sys
from typing import Any, Dict, Optional, Sequence

import click

from .games import load_game
from .hierarchy import Formulation, LevelSpec
from .notation import dump_bound
from .solver import SolverOptions, Status
from .tasks import ClassicalTask, SeesawTask, SequenceTask, SolveTask, VerifyCertificateTask

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAILED = 2
EXIT_NOT_MONOTONE = 3


class ExitCodeGroup(click.Group):
    """Group whose commands return their exit code.

    Usage errors, unreadable files and invalid inputs all exit with 1 and a one-line diagnostic on stderr.
    """

    def main(self, *args: Any, **kwargs: Any) -> Any:
        kwargs.pop("standalone_mode", None)
        try:
            code = super().main(*args, standalone_mode=False, **kwargs)
        except click.ClickException as e:
            e.show()
            code = EXIT_ERROR
        except click.Abort:
            click.echo("Aborted!", err=True)
            code = EXIT_ERROR
        except (ValueError, OSError) as e:
            click.echo("Error: {}".format(e), err=True)
            code = EXIT_ERROR
        sys.exit(code if isinstance(code, int) else EXIT_OK)


def _task_kwargs(ctx: click.Context) -> Dict[str, Any]:
    return {"progress": ctx.obj["progress"]}


def _solver_options(tol: Optional[float], pairs: Sequence[str]) -> SolverOptions:
    kwargs = {} if tol is None else {"tol": tol}
    return SolverOptions.from_pairs(pairs, **kwargs)


_FORMULATIONS = click.Choice([f.value for f in Formulation])
_OUTPUT = click.Path(dir_okay=False, writable=True)


@click.group(cls=ExitCodeGroup)
@click.option("-v", "--verbose", count=True, help="Log INFO messages (-vv for DEBUG)")
@click.option("--progress/--no-progress", default=False, help="Show progress bars")
@click.pass_context
def cli(ctx: click.Context, verbose: int, progress: bool) -> None:
    """Upper and lower bounds on the value of nonlocal games."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True
    )
    ctx.obj = {"progress": progress}


@cli.command("solve")
@click.argument("game")
@click.option(
    "--level",
    "level_text",
    default="full:1",
    show_default=True,
    help="full:<n>, shapes like 1+AB, or custom:<file>",
)
@click.option(
    "--form", "formulation", type=_FORMULATIONS, default=Formulation.MOMENT.value, show_default=True
)
@click.option("--solver", type=click.Choice(["ipm", "export"]), default="ipm", show_default=True)
@click.option("--tol", type=float, default=None, help="Solver tolerance [default: 1e-8]")
@click.option(
    "--option", "pairs", multiple=True, metavar="KEY=VALUE", help="Other solver option (repeatable)"
)
@click.option("--cert", type=_OUTPUT, default=None, help="Write the certificate of the bound")
@click.option("--export-sdpa", type=_OUTPUT, default=None, help="Write the program in SDPA format")
@click.option("--report", type=_OUTPUT, default=None, help="Write the run report")
@click.pass_context
def solve_command(
    ctx: click.Context,
    game: str,
    level_text: str,
    formulation: str,
    solver: str,
    tol: Optional[float],
    pairs: Sequence[str],
    cert: Optional[str],
    export_sdpa: Optional[str],
    report: Optional[str],
) -> int:
    """Upper bound of GAME (a file or builtin:NAME) at one hierarchy level."""
    loaded, digest = load_game(game)
    task = SolveTask(
        loaded,
        digest,
        LevelSpec.parse(level_text),
        Formulation(formulation),
        _solver_options(tol, pairs),
        solver,
        cert,
        export_sdpa,
        report,
        **_task_kwargs(ctx)
    )
    result = task.run()
    if solver == "export":
        return EXIT_OK
    click.echo(result["bound"])
    return EXIT_OK if result["status"] == Status.OPTIMAL.value else EXIT_FAILED


@cli.command("sequence")
@click.argument("game")
@click.option("--max-level", type=int, required=True, help="Last full level")
@click.option(
    "--form", "formulation", type=_FORMULATIONS, default=Formulation.MOMENT.value, show_default=True
)
@click.option("--tol", type=float, default=None, help="Solver tolerance [default: 1e-8]")
@click.option(
    "--option", "pairs", multiple=True, metavar="KEY=VALUE", help="Other solver option (repeatable)"
)
@click.option("--report", type=_OUTPUT, default=None, help="Write the run report")
@click.pass_context
def sequence_command(
    ctx: click.Context,
    game: str,
    max_level: int,
    formulation: str,
    tol: Optional[float],
    pairs: Sequence[str],
    report: Optional[str],
) -> int:
    """Bounds of GAME at the full levels 1..MAX_LEVEL, one line per level (level, bound, status, seconds)."""
    loaded, digest = load_game(game)
    task = SequenceTask(
        loaded,
        digest,
        max_level,
        Formulation(formulation),
        _solver_options(tol, pairs),
        report,
        **_task_kwargs(ctx),
    )
    task.run()
    for result in task.results:
        click.echo(
            "{} {} {} {:.2f}".format(
                result.level, dump_bound(result.bound), result.status.value, result.seconds
            )
        )
    if not task.monotone:
        click.echo("Bounds increase with the level", err=True)
        return EXIT_NOT_MONOTONE
    return EXIT_OK if all(r.status == Status.OPTIMAL for r in task.results) else EXIT_FAILED


@cli.command("classical")
@click.argument("game")
@click.option("--report", type=_OUTPUT, default=None, help="Write the run report")
@click.pass_context
def classical_command(ctx: click.Context, game: str, report: Optional[str]) -> int:
    """Classical value of GAME, by enumeration of deterministic strategies."""
    loaded, digest = load_game(game)
    result = ClassicalTask(loaded, digest, report, **_task_kwargs(ctx)).run()
    click.echo(result["value"])
    return EXIT_OK


@cli.command("seesaw")
@click.argument("game")
@click.option("--dim", type=int, default=2, show_default=True, help="Local dimension of every party")
@click.option("--restarts", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--report", type=_OUTPUT, default=None, help="Write the run report")
@click.pass_context
def seesaw_command(
    ctx: click.Context, game: str, dim: int, restarts: int, seed: int, report: Optional[str]
) -> int:
    """Quantum lower bound of GAME from see-saw optimization of explicit strategies."""
    loaded, digest = load_game(game)
    result = SeesawTask(loaded, digest, dim, restarts, seed, report, **_task_kwargs(ctx)).run()
    click.echo(result["value"])
    return EXIT_OK


@cli.command("verify-cert")
@click.argument("certificate", type=click.Path(exists=True, dir_okay=False))
@click.argument("game")
@click.option(
    "--tol", type=float, default=1e-6, show_default=True, help="Largest accepted residual coefficient"
)
@click.option("--report", type=_OUTPUT, default=None, help="Write the run report")
@click.pass_context
def verify_command(ctx: click.Context, certificate: str, game: str, tol: float, report: Optional[str]) -> int:
    """Checks that CERTIFICATE proves its bound for GAME; prints the residual."""
    loaded, digest = load_game(game)
    task = VerifyCertificateTask(certificate, loaded, digest, tol, report, **_task_kwargs(ctx))
    result = task.run()
    click.echo(result["residual"])
    return EXIT_OK if task.verified else EXIT_FAILED
