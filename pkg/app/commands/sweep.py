import json

from app.commands.base import CommandOutput
from app.core.errors import EXIT_INAPPLICABLE, EXIT_OK, HypothesisError
from app.schemas.bounds import SweepRow
from app.schemas.run import OutputFormat, RunConfig
from app.services.bounds import collect_norms, evaluate_bounds, select_best
from app.services.catalogue import map_ordered, resolve_problem
from app.services.coefficients import check_hypotheses
from app.utils.formatters import csv_text

CSV_HEADER = ("s", "theorem", "bound")


def run(config: RunConfig) -> CommandOutput:
    """Best bound at each s of the grid, the other parameters held fixed."""
    prob = resolve_problem(config.problem_path)
    report = check_hypotheses(prob)
    if not report.passed:
        raise HypothesisError(report)

    def best_at(s: float) -> SweepRow:
        norms = collect_norms(prob, [s], config.eta_grid, report, config.tol)
        results = evaluate_bounds(
            prob, [s], config.eta_grid, config.g_strategy, config.tol, report, norms
        )
        best = select_best(results)
        return SweepRow(s=s, theorem=best.label if best.applicable else None, bound=best.bound)

    rows = map_ordered(best_at, list(config.s_grid))
    exit_code = EXIT_OK if any(row.bound is not None for row in rows) else EXIT_INAPPLICABLE

    if config.format == OutputFormat.CSV:
        return CommandOutput(
            csv_text(CSV_HEADER, [(row.s, row.theorem or "", row.bound) for row in rows]),
            exit_code,
        )
    payload = [row.model_dump(mode="json") for row in rows]
    return CommandOutput(json.dumps(payload, indent=2) + "\n", exit_code)
