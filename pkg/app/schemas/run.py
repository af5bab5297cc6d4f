from enum import Enum
from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.schemas.types import Exponent


class Command(str, Enum):
    BOUND = "bound"
    VERIFY = "verify"
    SWEEP = "sweep"
    CATALOGUE = "catalogue"


class OutputFormat(str, Enum):
    JSON = "json"
    TEXT = "text"
    CSV = "csv"


def parse_g_strategy(text: str) -> Union[str, float]:
    """ "auto", "inv_r" or "c=VALUE" (VALUE > 0)."""
    text = text.strip()
    if text in ("auto", "inv_r"):
        return text
    if text.startswith("c="):
        try:
            value = float(text[2:])
        except ValueError:
            raise ValueError(f"invalid constant in --g {text!r}")
        if not value > 0:
            raise ValueError("the constant g must be positive")
        return value
    raise ValueError(f"--g must be auto, inv_r or c=VALUE, got {text!r}")


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: Command
    problem_path: Optional[str] = None
    s_grid: List[Exponent]
    eta_grid: List[Exponent]
    g_strategy: Union[float, str] = "auto"
    tol: float = Field(gt=0)
    oracle_tol: Optional[float] = Field(default=None, gt=0)
    output: Optional[str] = None
    format: OutputFormat = OutputFormat.JSON
    seed: int = 0
    trials: Optional[int] = Field(default=None, ge=0)

    @field_validator("g_strategy", mode="before")
    def known_g_strategy(cls, v):
        return parse_g_strategy(v) if isinstance(v, str) else v

    @field_validator("s_grid", "eta_grid")
    def nonempty(cls, v):
        if not v:
            raise ValueError("exponent grids must be nonempty")
        return v

    @model_validator(mode="after")
    def command_requirements(self):
        if self.command != Command.CATALOGUE and not self.problem_path:
            raise ValueError(f"{self.command.value} needs --problem")
        if self.command == Command.SWEEP and self.format == OutputFormat.TEXT:
            raise ValueError("sweep writes csv or json")
        return self
