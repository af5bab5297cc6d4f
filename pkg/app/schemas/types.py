import math
from typing import Annotated, Union

from pydantic import BeforeValidator, PlainSerializer

from app.utils.exponents import parse_exponent


def _serialize_exponent(value: float) -> Union[float, str]:
    return "inf" if math.isinf(value) else value


Exponent = Annotated[
    float,
    BeforeValidator(parse_exponent),
    PlainSerializer(_serialize_exponent, when_used="json"),
]
