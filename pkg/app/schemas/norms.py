from enum import Enum
from typing import Literal, Union

from pydantic import BaseModel, ConfigDict, model_validator

from app.schemas.types import Exponent

INFINITE = "+inf"


class NormKind(str, Enum):
    LP = "Lp"
    ESS_SUP = "ess_sup"
    L1_UNIFORM = "L1_uniform"
    OMEGA_MEASURE = "omega_measure"


class NormValue(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: Union[Literal["+inf"], float]
    abs_error_estimate: float = 0.0
    finite: bool = True
    kind: NormKind
    s: Exponent | None = None
    converged: bool = True

    @model_validator(mode="after")
    def check_sentinel(self):
        if self.finite == (self.value == INFINITE):
            raise ValueError("finite must be false exactly when value is the +inf sentinel")
        if self.abs_error_estimate < 0:
            raise ValueError("abs_error_estimate must be nonnegative")
        if self.finite and self.value < 0:
            raise ValueError("norm values are nonnegative")
        return self

    @classmethod
    def infinite(cls, kind: NormKind, s: float | None = None) -> "NormValue":
        return cls(value=INFINITE, finite=False, kind=kind, s=s, converged=False)

    @property
    def magnitude(self) -> float:
        """The finite value; callers must branch on `finite` first."""
        if not self.finite:
            raise ValueError("norm is infinite")
        return float(self.value)

    @property
    def inflated(self) -> float:
        """Value pushed up by its error estimate (pessimistic for lower bounds)."""
        return self.magnitude + self.abs_error_estimate
