from enum import Enum
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.schemas.types import Exponent

INVERSE_R = "g=1/r"
NO_CERTIFIED_BOUND = "no certified bound"


class TheoremTag(str, Enum):
    WARMUP = "warmup"
    THM1 = "thm1"
    THM2 = "thm2"
    THM3 = "thm3"
    PROP = "prop"


# lower rank wins a tie between equal bounds
TIE_RANK = {
    TheoremTag.PROP: 0,
    TheoremTag.WARMUP: 1,
    TheoremTag.THM2: 2,
    TheoremTag.THM3: 3,
    TheoremTag.THM1: 4,
}


class BoundResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    theorem: Optional[TheoremTag] = None
    s: Exponent | None = None
    eta: Exponent | None = None
    alpha: Optional[float] = Field(default=None, ge=0)
    beta: Optional[float] = Field(default=None, ge=0)
    g: Union[Literal["g=1/r"], float, None] = None
    omega_measure: Optional[float] = Field(default=None, ge=0)
    bound: Optional[float] = None
    verdict: Optional[Literal["nonnegative"]] = None
    applicable: bool
    reason: Optional[str] = None

    @model_validator(mode="after")
    def check_applicability(self):
        if self.applicable:
            if self.bound is None or self.theorem is None:
                raise ValueError("an applicable result needs a theorem and a bound")
            if self.bound > 0:
                raise ValueError("lower bounds reported here are never positive")
        else:
            if self.bound is not None:
                raise ValueError("an inapplicable result carries no bound")
            if not self.reason:
                raise ValueError("an inapplicable result must give a reason")
        return self

    @classmethod
    def inapplicable(cls, theorem: Optional[TheoremTag], reason: str, **fields) -> "BoundResult":
        return cls(theorem=theorem, applicable=False, reason=reason, **fields)

    @property
    def label(self) -> str:
        if self.theorem is None:
            return "none"
        parts = [self.theorem.value]
        if self.eta is not None:
            parts.append(f"eta={self.eta:g}")
        if self.s is not None:
            parts.append(f"s={self.s:g}")
        if isinstance(self.g, float):
            parts.append(f"g={self.g:.6g}")
        elif self.g is not None:
            parts.append(self.g)
        return " ".join(parts)


class GOptimum(BaseModel):
    model_config = ConfigDict(frozen=True)

    g_star: float = Field(gt=0)
    bound: float
    omega_measure: float = Field(ge=0)
    feasible_from: float
    evaluations: int = 0


class RemarkRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    s: Exponent
    thm2_constant: float
    warmup_constant: float
    lieb_thirring_constant: Optional[float] = None


class BoundReport(BaseModel):
    """Output of the bound command."""

    problem_id: str
    bounds: List[BoundResult]
    best: BoundResult


class SweepRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    s: Exponent
    theorem: Optional[str] = None
    bound: Optional[float] = None
