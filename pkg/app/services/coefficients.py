import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import ProblemFileError
from app.schemas.hypothesis import HypothesisReport, Verdict
from app.schemas.problem import ProblemFile, TailDecay
from app.services.expressions import (
    CoefficientExpr,
    negative_part,
    parse_coefficient_expr,
    positive_part,
    reciprocal,
)
from app.services.norms import (
    essential_extremum,
    grows_at_cap,
    lp_norm,
    region_pieces,
    sample_grid,
    tail_dominance,
    uniform_local_norm,
)

logger = logging.getLogger(__name__)

ONE_OVER_P_EXPONENTS = (1.0, 2.0, math.inf)
POLE_SCAN_WIDTH = 1024.0


@dataclass(frozen=True)
class Problem:
    """The coefficient triple of (1/r)(-(p f')' + q f) with its hypothesis metadata."""

    p: CoefficientExpr
    q: CoefficientExpr
    r: CoefficientExpr
    compact_ab: Tuple[float, float]
    tail_decay: Dict[str, TailDecay] = field(default_factory=dict)
    domain: str = "line"
    name: Optional[str] = None

    def __post_init__(self):
        a, b = self.compact_ab
        if not a < b:
            raise ProblemFileError(f"compact set needs a < b, got [{a}, {b}]")

    @property
    def half_line(self) -> bool:
        return self.domain == "half_line"

    @cached_property
    def start(self) -> float:
        """First half-length of every doubling scan: past [a, b] and every jump or pole."""
        a, b = self.compact_ab
        landmarks = [abs(a), abs(b), settings.DOUBLING_START]
        for expr in (self.p, self.q, self.r):
            landmarks += [abs(x) + 1 for x in expr.breakpoints()]
            landmarks += [
                abs(x) + 1 for x in expr.singular_points(-POLE_SCAN_WIDTH, POLE_SCAN_WIDTH)
            ]
        return max(landmarks)

    @property
    def inv_p(self) -> CoefficientExpr:
        return reciprocal(self.p)

    @property
    def inv_r(self) -> CoefficientExpr:
        return reciprocal(self.r)

    @property
    def q_minus(self) -> CoefficientExpr:
        return negative_part(self.q)

    @property
    def q_plus(self) -> CoefficientExpr:
        return positive_part(self.q)

    def tail(self, key: str) -> Optional[TailDecay]:
        return self.tail_decay.get(key)

    @property
    def identifier(self) -> str:
        return self.name or f"p={self.p}; q={self.q}; r={self.r}"

    def sample_window(self) -> Tuple[float, float]:
        return (0.0 if self.half_line else -self.start, self.start)

    @classmethod
    def from_file(cls, problem_file: ProblemFile) -> "Problem":
        return cls(
            p=parse_coefficient_expr(problem_file.p),
            q=parse_coefficient_expr(problem_file.q),
            r=parse_coefficient_expr(problem_file.r),
            compact_ab=(problem_file.ab[0], problem_file.ab[1]),
            tail_decay=dict(problem_file.tail_decay),
            domain=problem_file.domain,
            name=problem_file.name,
        )


def load_problem_text(text: str, name: Optional[str] = None) -> Problem:
    try:
        problem_file = ProblemFile.model_validate_json(text)
    except ValidationError as exc:
        raise ProblemFileError(f"invalid problem file: {exc}") from exc
    if name and not problem_file.name:
        problem_file = problem_file.model_copy(update={"name": name})
    return Problem.from_file(problem_file)


def load_problem(path: str | Path) -> Problem:
    """Read a UTF-8 JSON problem file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemFileError(f"cannot read problem file {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ProblemFileError(f"problem file {path} is not UTF-8") from exc
    return load_problem_text(text, name=path.stem)


def decompose_q(q: CoefficientExpr) -> Tuple[CoefficientExpr, CoefficientExpr]:
    """(max(q, 0), max(-q, 0)); q = q_plus - q_minus pointwise."""
    return positive_part(q), negative_part(q)


def is_identically(expr: CoefficientExpr, value: float, half_line: bool = False) -> bool:
    """Sampled test that ``expr`` equals ``value`` everywhere."""
    if expr.is_constant:
        return float(expr.evaluate_safe(np.zeros(1))[0]) == value
    lo = 0.0 if half_line else -math.inf
    grid = sample_grid(expr, region_pieces(lo, math.inf, settings.DOUBLING_START))
    values = expr.evaluate_safe(grid)
    return bool(np.all(values == value))


def _positive_verdict(expr: CoefficientExpr, prob: Problem) -> Verdict:
    lo = 0.0 if prob.half_line else -math.inf
    grid = sample_grid(expr, region_pieces(lo, math.inf, prob.start))
    values = expr.evaluate_safe(grid)
    bad = ~(values > 0) & ~np.isnan(values)
    # isolated zeros are a null set; two adjacent bad samples are not
    runs = bad[:-1] & bad[1:]
    passed = not bool(np.any(runs))
    finite = values[np.isfinite(values)]
    evidence = {
        "sample_min": float(np.min(finite)) if finite.size else None,
        "nonpositive_samples": float(np.sum(bad)),
        "samples": float(values.size),
    }
    detail = "" if passed else f"{expr} <= 0 on a sampled set of positive measure"
    return Verdict(passed=passed, evidence=evidence, detail=detail)


def _essinf_outside(prob: Problem) -> Tuple[Verdict, Optional[float]]:
    a, b = prob.compact_ab
    width = prob.start + settings.DOUBLING_START
    pieces = region_pieces(b, math.inf, width)
    if not prob.half_line:
        pieces += region_pieces(-math.inf, a, width)
    elif a > 0:
        pieces.append((0.0, a, settings.ESS_SAMPLES))
    value, location, converged = essential_extremum(prob.r, pieces, mode="inf")
    evidence: Dict[str, float | str | None] = {
        "essinf": value,
        "location": location,
        "converged": str(converged),
    }

    decay = prob.tail("1/r")
    if decay is not None and decay.exponent < 0:
        return Verdict(passed=False, evidence=evidence, detail="declared: r decays to 0"), None
    if decay is None and grows_at_cap(prob.inv_r, prob.half_line):
        return Verdict(passed=False, evidence=evidence, detail="r decays towards 0"), None
    if not value > 0:
        detail = f"ess inf of r outside [{a}, {b}] is {value:.3g}"
        return Verdict(passed=False, evidence=evidence, detail=detail), None
    return Verdict(passed=True, evidence=evidence), value


def _tail_verdicts(prob: Problem) -> Dict[str, Verdict]:
    targets = {"q": prob.q, "1/p": prob.inv_p, "1/r": prob.inv_r}
    verdicts = {}
    for key, decay in prob.tail_decay.items():
        fraction = tail_dominance(targets[key], decay, prob.half_line)
        passed = fraction >= 0.99
        verdicts[key] = Verdict(
            passed=passed,
            evidence={"dominated_fraction": fraction, "cutoff": decay.cutoff},
            detail="" if passed else f"declared envelope for {key} is violated",
        )
    return verdicts


def one_over_p_class(
    prob: Problem, exponents: Iterable[float] = ONE_OVER_P_EXPONENTS
) -> List[float]:
    """Exponents eta for which ||1/p||_eta came out finite."""
    found = []
    for eta in exponents:
        norm = lp_norm(
            prob.inv_p, eta, tail=prob.tail("1/p"), start=prob.start, half_line=prob.half_line
        )
        if norm.finite:
            found.append(eta)
    return found


def check_hypotheses(prob: Problem) -> HypothesisReport:
    """Verdicts for positivity of p and r, q in L1_u and r bounded away from 0 off [a, b].

    Failures are verdicts, never exceptions.
    """
    logger.info(f"Checking hypotheses for {prob.identifier}")
    p_verdict = _positive_verdict(prob.p, prob)
    r_verdict = _positive_verdict(prob.r, prob)

    q_norm = uniform_local_norm(
        prob.q, tail=prob.tail("q"), start=prob.start, half_line=prob.half_line
    )
    q_verdict = Verdict(
        passed=q_norm.finite,
        evidence={
            "norm": q_norm.value if q_norm.finite else "+inf",
            "error": q_norm.abs_error_estimate,
        },
        detail="" if q_norm.finite else "sup over unit intervals diverges",
    )

    essinf_verdict, essinf = _essinf_outside(prob)
    window = prob.sample_window()
    poles = {
        name: [float(x) for x in expr.singular_points(*window)]
        for name, expr in (("p", prob.p), ("q", prob.q), ("r", prob.r))
    }

    report = HypothesisReport(
        p_positive=p_verdict,
        q_in_L1u=q_verdict,
        r_positive=r_verdict,
        r_essinf_outside_ab=essinf_verdict,
        tail_declarations=_tail_verdicts(prob),
        one_over_p_class=one_over_p_class(prob) if p_verdict.passed else [],
        poles=poles,
        q_uniform_norm=q_norm.value if q_norm.finite else None,
        r_essinf=essinf,
    )
    if not report.passed:
        logger.warning(f"Hypotheses fail for {prob.identifier}: {', '.join(report.failures())}")
    return report
