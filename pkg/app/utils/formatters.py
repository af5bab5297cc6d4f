import csv
import io
import math
from typing import Iterable, List, Optional, Sequence

from app.schemas.bounds import BoundReport, BoundResult
from app.schemas.hypothesis import HypothesisReport
from app.schemas.verification import CatalogueRow, VerificationReport


def format_number(value: Optional[float], digits: int = 10) -> str:
    """Format a number for text and CSV output"""
    if value is None:
        return ""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{digits}g}"


def csv_text(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    """Header row, comma separated, LF line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [format_number(cell) if isinstance(cell, float) else cell for cell in row]
        )
    return buffer.getvalue()


def _bound_line(result: BoundResult) -> str:
    if result.applicable:
        return f"  {result.label:<32} {format_number(result.bound)}"
    return f"  {result.label:<32} n/a ({result.reason})"


def bound_report_text(report: BoundReport) -> str:
    lines = [f"problem: {report.problem_id}"]
    lines += [_bound_line(result) for result in report.bounds]
    lines.append(f"best: {_bound_line(report.best).strip()}")
    return "\n".join(lines) + "\n"


def verification_text(report: VerificationReport) -> str:
    oracle = report.oracle
    lines = [
        f"problem: {report.problem_id}",
        f"best bound: {report.best.label} {format_number(report.best.bound)}",
        f"oracle: lambda_min={format_number(oracle.lambda_min)} (L={oracle.L:g}, n={oracle.n}, "
        f"converged={oracle.converged})",
        f"margin: {format_number(report.margin, 4)}",
        f"all bounds below oracle: {report.all_bounds_below_oracle}",
        f"agreement: {report.agreement.value}",
    ]
    fuzz = report.lemma_fuzz
    if fuzz is not None:
        lines.append(
            f"lemma fuzz: {fuzz.trials} trials, {fuzz.violations} violations, "
            f"worst slack {format_number(fuzz.worst_slack, 4)}, "
            f"{fuzz.lemma_a6_qualifying} form-nonpositive"
        )
    lines.append("PASS" if report.passed else "FAIL")
    return "\n".join(lines) + "\n"


def catalogue_text(rows: List[CatalogueRow]) -> str:
    width = max([len(row.problem_id) for row in rows] + [7])
    lines = [f"{'problem':<{width}}  {'best bound':>14}  {'lambda_min':>14}  result"]
    for row in rows:
        if row.passed:
            status = f"pass ({row.detail})" if row.detail else "pass"
        else:
            status = f"FAIL {row.detail}".strip()
        lines.append(
            f"{row.problem_id:<{width}}  {format_number(row.best_bound):>14}  "
            f"{format_number(row.lambda_min):>14}  {status}"
        )
    return "\n".join(lines) + "\n"


def hypothesis_text(report: HypothesisReport) -> str:
    lines = ["hypotheses not satisfied:"]
    for name in report.failures():
        lines.append(f"  {name}")
    return "\n".join(lines) + "\n"
