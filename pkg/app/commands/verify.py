from app.commands.base import CommandOutput
from app.core.errors import EXIT_OK, EXIT_VERIFICATION_FAILED
from app.schemas.run import OutputFormat, RunConfig
from app.services.catalogue import resolve_problem
from app.services.spectral import history_rows
from app.services.verification import fuzz_rows, validate_bounds
from app.utils.formatters import csv_text, verification_text

HISTORY_HEADER = ("L", "n", "lambda_min")
FUZZ_HEADER = ("trial_seed", "inequality", "lhs", "rhs")


def run(config: RunConfig) -> CommandOutput:
    prob = resolve_problem(config.problem_path)
    report = validate_bounds(
        prob,
        config.s_grid,
        config.eta_grid,
        config.g_strategy,
        tol=config.tol,
        oracle_tol=config.oracle_tol,
        trials=config.trials,
        seed=config.seed,
    )
    exit_code = EXIT_OK if report.passed else EXIT_VERIFICATION_FAILED

    if config.format == OutputFormat.TEXT:
        return CommandOutput(verification_text(report), exit_code)
    if config.format == OutputFormat.CSV:
        output = CommandOutput(csv_text(HISTORY_HEADER, history_rows(report.oracle)), exit_code)
        if report.lemma_fuzz is not None:
            output.side_files["fuzz"] = csv_text(FUZZ_HEADER, fuzz_rows(report.lemma_fuzz))
        return output
    return CommandOutput(report.model_dump_json(indent=2) + "\n", exit_code)
