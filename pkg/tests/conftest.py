import json
from pathlib import Path
from typing import Callable, Dict, Optional

import pytest

from app.schemas.bounds import BoundResult, TheoremTag
from app.schemas.spectral import RefinementStep, SpectralEstimate
from app.schemas.verification import VerificationReport
from app.services.catalogue import CATALOGUE_DIR
from app.services.coefficients import Problem, load_problem, load_problem_text


@pytest.fixture
def make_problem() -> Callable[..., Problem]:
    """Build a Problem from coefficient strings"""

    def _make(
        p: str = "1",
        q: str = "0",
        r: str = "1",
        ab=(-1.0, 1.0),
        tail_decay: Optional[Dict[str, dict]] = None,
        domain: str = "line",
        name: str = "test_problem",
    ) -> Problem:
        payload = {
            "name": name,
            "p": p,
            "q": q,
            "r": r,
            "ab": list(ab),
            "tail_decay": tail_decay or {},
            "domain": domain,
        }
        return load_problem_text(json.dumps(payload))

    return _make


@pytest.fixture
def free_problem() -> Problem:
    return load_problem(CATALOGUE_DIR / "free.json")


@pytest.fixture
def poschl_teller() -> Problem:
    return load_problem(CATALOGUE_DIR / "poschl_teller.json")


@pytest.fixture
def square_well() -> Problem:
    return load_problem(CATALOGUE_DIR / "square_well_1.json")


@pytest.fixture
def growing_p() -> Problem:
    return load_problem(CATALOGUE_DIR / "growing_p.json")


@pytest.fixture
def vanishing_weight() -> Problem:
    return load_problem(CATALOGUE_DIR / "vanishing_weight.json")


@pytest.fixture
def problem_file(tmp_path: Path) -> Callable[[dict], Path]:
    """Write a problem dict to a JSON file and return its path"""

    def _write(payload: dict, name: str = "problem.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(payload), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def make_report() -> Callable[..., VerificationReport]:
    """Build a VerificationReport with a single warm-up bound"""

    def _make(problem_id: str, bound: float, lambda_min: float, converged: bool = True):
        best = BoundResult(theorem=TheoremTag.WARMUP, s=1.0, bound=bound, applicable=True)
        oracle = SpectralEstimate(
            lambda_min=lambda_min,
            L=16.0,
            n=8192,
            refinement_history=[RefinementStep(L=16.0, n=8192, lambda_min=lambda_min)],
            converged=converged,
        )
        return VerificationReport(
            problem_id=problem_id,
            bounds=[best],
            best=best,
            oracle=oracle,
            margin=1e-6,
            all_bounds_below_oracle=bound <= lambda_min,
            oracle_converged=converged,
        )

    return _make
