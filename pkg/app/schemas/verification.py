from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from app.schemas.bounds import BoundResult
from app.schemas.spectral import SpectralEstimate


class WorstCase(BaseModel):
    model_config = ConfigDict(frozen=True)

    trial_seed: int
    inequality: str
    lhs: float
    rhs: float


class InequalityStats(BaseModel):
    trials: int = 0
    violations: int = 0
    # min over trials of (rhs - lhs) / (1 + rhs); negative means violated
    worst_slack: Optional[float] = None
    worst_case: Optional[WorstCase] = None


class LemmaA6Verdict(BaseModel):
    """Outcome for one test function; ``qualifies`` is False when its form value is positive."""

    model_config = ConfigDict(frozen=True)

    qualifies: bool
    passed: bool
    form: float
    energy: Optional[float] = None
    q_minus: Optional[float] = None
    q_abs: Optional[float] = None
    kinetic_vanishes: Optional[bool] = None


class LemmaFuzzCounts(BaseModel):
    trials: int
    seed: int
    violations: int = 0
    worst_slack: Optional[float] = None
    inequalities: Dict[str, InequalityStats] = Field(default_factory=dict)
    form_identity_max_slack: float = 0.0
    form_identity_failures: int = 0
    lemma_a6_qualifying: int = 0

    @property
    def worst_cases(self) -> List[WorstCase]:
        return [s.worst_case for s in self.inequalities.values() if s.worst_case is not None]


class OracleAgreement(str, Enum):
    BELOW = "below"
    # every bound sits under the last estimate of a ladder that did not settle
    CONSISTENT_UNCONVERGED = "consistent_unconverged"
    ABOVE = "above"


class VerificationReport(BaseModel):
    problem_id: str
    bounds: List[BoundResult]
    best: BoundResult
    oracle: SpectralEstimate
    margin: float
    # against the last estimate when the oracle did not converge; None when not compared
    all_bounds_below_oracle: Optional[bool]
    oracle_converged: bool
    lemma_fuzz: Optional[LemmaFuzzCounts] = None

    @model_validator(mode="after")
    def converged_reports_compare(self):
        if self.oracle_converged and self.all_bounds_below_oracle is None:
            raise ValueError("a converged oracle needs a bound comparison")
        return self

    @computed_field
    @property
    def agreement(self) -> OracleAgreement:
        if self.all_bounds_below_oracle is False:
            return OracleAgreement.ABOVE
        if self.oracle_converged:
            return OracleAgreement.BELOW
        return OracleAgreement.CONSISTENT_UNCONVERGED

    @property
    def passed(self) -> bool:
        if self.agreement == OracleAgreement.ABOVE:
            return False
        if self.lemma_fuzz is not None:
            return self.lemma_fuzz.violations == 0 and self.lemma_fuzz.form_identity_failures == 0
        return True


class CatalogueRow(BaseModel):
    problem_id: str
    best_theorem: Optional[str]
    best_bound: Optional[float]
    lambda_min: Optional[float]
    margin: Optional[float]
    passed: bool
    detail: str = ""
