from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class RefinementStep(BaseModel):
    model_config = ConfigDict(frozen=True)

    L: float = Field(gt=0)
    n: int = Field(ge=2)
    lambda_min: float


class SpectralEstimate(BaseModel):
    """Dirichlet-truncated estimate of min sigma(T) with its refinement ladder."""

    model_config = ConfigDict(frozen=True)

    lambda_min: float
    L: float
    n: int
    refinement_history: List[RefinementStep]
    converged: bool
    reason: Optional[str] = None

    @model_validator(mode="after")
    def history_is_monotone(self):
        steps = self.refinement_history
        for before, after in zip(steps, steps[1:]):
            if after.L < before.L or (after.L == before.L and after.n < before.n):
                raise ValueError("refinement history must be ordered by (L, n)")
        return self

    @property
    def previous_lambda(self) -> Optional[float]:
        if len(self.refinement_history) < 2:
            return None
        return self.refinement_history[-2].lambda_min
