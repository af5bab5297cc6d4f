import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, List, Optional, Sequence, TypeVar

from app.core.config import settings
from app.core.errors import ProblemFileError, SLBoundsError
from app.schemas.verification import CatalogueRow, OracleAgreement, VerificationReport
from app.services.coefficients import Problem, load_problem
from app.services.verification import validate_bounds

logger = logging.getLogger(__name__)

CATALOGUE_DIR = Path(__file__).resolve().parent.parent / "catalogue"

T = TypeVar("T")
R = TypeVar("R")


def catalogue_names() -> List[str]:
    return sorted(path.stem for path in CATALOGUE_DIR.glob("*.json"))


def load_catalogue() -> List[Problem]:
    return [load_problem(CATALOGUE_DIR / f"{name}.json") for name in catalogue_names()]


def resolve_problem(path_or_name: str) -> Problem:
    """Load a problem file, falling back to a built-in problem of that name."""
    path = Path(path_or_name)
    if path.exists():
        return load_problem(path)
    builtin = CATALOGUE_DIR / f"{path.stem}.json"
    if path.suffix in ("", ".json") and builtin.exists():
        logger.info(f"Using built-in problem {builtin.stem}")
        return load_problem(builtin)
    raise ProblemFileError(f"problem file {path_or_name} not found")


def map_ordered(
    func: Callable[[T], R], items: Sequence[T], max_workers: Optional[int] = None
) -> List[R]:
    """Thread-pool map; results come back in input order."""
    workers = max(1, min(max_workers or settings.MAX_WORKERS, len(items) or 1))
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items))


def catalogue_row(
    prob: Problem, report: Optional[VerificationReport], detail: str = ""
) -> CatalogueRow:
    if report is None:
        return CatalogueRow(
            problem_id=prob.identifier,
            best_theorem=None,
            best_bound=None,
            lambda_min=None,
            margin=None,
            passed=False,
            detail=detail,
        )
    if report.agreement == OracleAgreement.ABOVE:
        detail = detail or "a bound exceeds the oracle"
    elif report.lemma_fuzz is not None and not report.passed:
        detail = detail or f"{report.lemma_fuzz.violations} lemma violations"
    elif report.agreement == OracleAgreement.CONSISTENT_UNCONVERGED:
        detail = detail or "consistent, oracle unconverged"
    return CatalogueRow(
        problem_id=report.problem_id,
        best_theorem=report.best.label if report.best.applicable else None,
        best_bound=report.best.bound,
        lambda_min=report.oracle.lambda_min,
        margin=report.margin,
        passed=report.passed,
        detail=detail,
    )


def run_catalogue(max_workers: Optional[int] = None, **validate_kwargs) -> List[CatalogueRow]:
    """validate_bounds over every built-in problem; a failing entry never stops the others."""
    problems = load_catalogue()

    def verify(prob: Problem) -> CatalogueRow:
        logger.info(f"Catalogue entry {prob.identifier}")
        try:
            return catalogue_row(prob, validate_bounds(prob, **validate_kwargs))
        except SLBoundsError as exc:
            logger.error(f"Catalogue entry {prob.identifier} failed: {exc.detail}")
            return catalogue_row(prob, None, exc.detail)

    return map_ordered(verify, problems, max_workers)
