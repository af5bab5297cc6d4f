from app.commands.base import CommandOutput
from app.core.errors import EXIT_INAPPLICABLE, EXIT_OK
from app.schemas.bounds import BoundReport
from app.schemas.run import OutputFormat, RunConfig
from app.services.bounds import evaluate_bounds, select_best
from app.services.catalogue import resolve_problem
from app.utils.formatters import bound_report_text, csv_text

CSV_HEADER = ("theorem", "s", "eta", "g", "omega_measure", "bound", "applicable", "reason")


def run(config: RunConfig) -> CommandOutput:
    prob = resolve_problem(config.problem_path)
    results = evaluate_bounds(
        prob, config.s_grid, config.eta_grid, config.g_strategy, config.tol
    )
    report = BoundReport(problem_id=prob.identifier, bounds=results, best=select_best(results))
    exit_code = EXIT_OK if report.best.applicable else EXIT_INAPPLICABLE

    if config.format == OutputFormat.TEXT:
        return CommandOutput(bound_report_text(report), exit_code)
    if config.format == OutputFormat.CSV:
        rows = [
            (
                r.theorem.value if r.theorem else "",
                r.s,
                r.eta,
                r.g,
                r.omega_measure,
                r.bound,
                r.applicable,
                r.reason or "",
            )
            for r in results
        ]
        return CommandOutput(csv_text(CSV_HEADER, rows), exit_code)
    return CommandOutput(report.model_dump_json(indent=2) + "\n", exit_code)
