from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class Verdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    passed: bool
    evidence: Dict[str, float | str | None] = Field(default_factory=dict)
    detail: str = ""


class HypothesisReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    p_positive: Verdict
    q_in_L1u: Verdict
    r_positive: Verdict
    r_essinf_outside_ab: Verdict
    tail_declarations: Dict[str, Verdict] = Field(default_factory=dict)
    one_over_p_class: List[float] = Field(default_factory=list)
    poles: Dict[str, List[float]] = Field(default_factory=dict)
    q_uniform_norm: Optional[float] = None
    r_essinf: Optional[float] = None

    @property
    def passed(self) -> bool:
        return (
            self.p_positive.passed
            and self.q_in_L1u.passed
            and self.r_positive.passed
            and self.r_essinf_outside_ab.passed
            and all(verdict.passed for verdict in self.tail_declarations.values())
            and bool(self.one_over_p_class)
        )

    def failures(self) -> List[str]:
        names = [
            name
            for name in ("p_positive", "q_in_L1u", "r_positive", "r_essinf_outside_ab")
            if not getattr(self, name).passed
        ]
        names += [f"tail_decay[{key}]" for key, v in self.tail_declarations.items() if not v.passed]
        if not self.one_over_p_class:
            names.append("one_over_p_class")
        return names
