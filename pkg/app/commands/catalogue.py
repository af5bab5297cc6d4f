import json

from app.commands.base import CommandOutput
from app.core.errors import EXIT_OK, EXIT_VERIFICATION_FAILED
from app.schemas.run import OutputFormat, RunConfig
from app.services.catalogue import run_catalogue
from app.utils.formatters import catalogue_text, csv_text

CSV_HEADER = ("problem", "best_theorem", "best_bound", "lambda_min", "margin", "passed", "detail")


def run(config: RunConfig) -> CommandOutput:
    rows = run_catalogue(
        s_grid=config.s_grid,
        eta_grid=config.eta_grid,
        g_strategy=config.g_strategy,
        tol=config.tol,
        oracle_tol=config.oracle_tol,
        trials=config.trials,
        seed=config.seed,
    )
    exit_code = EXIT_OK if all(row.passed for row in rows) else EXIT_VERIFICATION_FAILED

    if config.format == OutputFormat.TEXT:
        return CommandOutput(catalogue_text(rows), exit_code)
    if config.format == OutputFormat.CSV:
        table = [
            (
                row.problem_id,
                row.best_theorem or "",
                row.best_bound,
                row.lambda_min,
                row.margin,
                row.passed,
                row.detail,
            )
            for row in rows
        ]
        return CommandOutput(csv_text(CSV_HEADER, table), exit_code)
    payload = [row.model_dump(mode="json") for row in rows]
    return CommandOutput(json.dumps(payload, indent=2) + "\n", exit_code)
