from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

TAIL_KEYS = {"q": "q", "1/p": "1/p", "inv_p": "1/p", "1/r": "1/r", "inv_r": "1/r"}


class TailDecay(BaseModel):
    """|h(x)| <= C |x|^(-exponent) for |x| >= cutoff; a negative exponent declares growth."""

    model_config = ConfigDict(frozen=True)

    cutoff: float = Field(gt=0)
    exponent: float


class ProblemFile(BaseModel):
    """On-disk problem description (JSON)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    p: str
    q: str
    r: str
    ab: List[float]
    tail_decay: Dict[str, TailDecay] = Field(default_factory=dict)
    domain: Literal["line", "half_line"] = "line"
    name: Optional[str] = None

    @field_validator("ab")
    def ab_ordered(cls, v):
        if len(v) != 2 or not v[0] < v[1]:
            raise ValueError("ab must be [a, b] with a < b")
        return v

    @field_validator("tail_decay")
    def known_tail_keys(cls, v):
        unknown = [key for key in v if key not in TAIL_KEYS]
        if unknown:
            raise ValueError(f"unknown tail_decay keys: {unknown}")
        return {TAIL_KEYS[key]: decay for key, decay in v.items()}

    @model_validator(mode="after")
    def half_line_ab(self):
        if self.domain == "half_line" and self.ab[0] < 0:
            raise ValueError("on the half line the compact set must lie in [0, inf)")
        return self
