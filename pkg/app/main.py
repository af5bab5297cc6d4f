import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from pydantic import ValidationError

from app.commands import bound, catalogue, sweep, verify
from app.commands.base import CommandOutput
from app.core.config import settings
from app.core.errors import EXIT_INPUT_ERROR, HypothesisError, SLBoundsError
from app.core.logging import configure_logging
from app.schemas.run import Command, RunConfig
from app.services.bounds import DEFAULT_ETA_GRID, DEFAULT_S_GRID
from app.utils.exponents import parse_exponent_list
from app.utils.formatters import hypothesis_text

logger = logging.getLogger(__name__)

COMMANDS: Dict[Command, Callable[[RunConfig], CommandOutput]] = {
    Command.BOUND: bound.run,
    Command.VERIFY: verify.run,
    Command.SWEEP: sweep.run,
    Command.CATALOGUE: catalogue.run,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", help="problem JSON file or built-in problem name")
    common.add_argument("--s", default="default", help='exponents, e.g. "1,3/2,inf" or "1:0.1:3"')
    common.add_argument("--eta", default="default", help="exponents for 1/p")
    common.add_argument("--g", default="auto", help="auto | c=VALUE | inv_r")
    common.add_argument("--tol", type=float, default=settings.DEFAULT_TOL)
    common.add_argument("--format", choices=["json", "text", "csv"], default=None)
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(
        prog="slbounds",
        description="Explicit lower bounds for min sigma(T) of Sturm-Liouville operators.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("bound", parents=[common], help="evaluate every bound")
    commands.add_parser("verify", parents=[common], help="check bounds against the oracle")
    commands.add_parser("sweep", parents=[common], help="best bound along an s grid")
    commands.add_parser("catalogue", parents=[common], help="verify the built-in problems")
    return parser


def _grid(text: str, default) -> List[float]:
    return list(default) if text == "default" else parse_exponent_list(text)


def to_config(args: argparse.Namespace) -> RunConfig:
    command = Command(args.command)
    fmt = args.format or ("csv" if command == Command.SWEEP else "json")
    return RunConfig(
        command=command,
        problem_path=args.problem,
        s_grid=_grid(args.s, DEFAULT_S_GRID),
        eta_grid=_grid(args.eta, DEFAULT_ETA_GRID),
        g_strategy=args.g,
        tol=args.tol,
        output=args.output,
        format=fmt,
        seed=args.seed,
    )


def write_output(config: RunConfig, output: CommandOutput) -> None:
    if config.output is None:
        sys.stdout.write(output.text)
        if output.side_files:
            logger.warning(f"{', '.join(output.side_files)} output needs --output; not written")
        return
    path = Path(config.output)
    path.write_text(output.text, encoding="utf-8", newline="\n")
    for suffix, content in output.side_files.items():
        side = path.with_name(f"{path.stem}.{suffix}{path.suffix}")
        side.write_text(content, encoding="utf-8", newline="\n")
        logger.info(f"Wrote {side}")


def run(config: RunConfig) -> int:
    try:
        output = COMMANDS[config.command](config)
    except HypothesisError as exc:
        sys.stdout.write(exc.report.model_dump_json(indent=2) + "\n")
        sys.stderr.write(hypothesis_text(exc.report))
        return exc.exit_code
    except SLBoundsError as exc:
        logger.error(exc.detail)
        sys.stderr.write(f"error: {exc.detail}\n")
        return exc.exit_code
    try:
        write_output(config, output)
    except OSError as exc:
        sys.stderr.write(f"error: cannot write {config.output}: {exc}\n")
        return EXIT_INPUT_ERROR
    return output.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        config = to_config(args)
    except (SLBoundsError, ValidationError) as exc:
        detail = exc.detail if isinstance(exc, SLBoundsError) else str(exc)
        sys.stderr.write(f"error: {detail}\n")
        return EXIT_INPUT_ERROR
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
