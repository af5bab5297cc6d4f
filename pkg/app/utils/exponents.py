import math
from fractions import Fraction
from typing import List, Union

from app.core.errors import InvalidExponentError

ExponentLike = Union[str, float, int]


def parse_exponent(value: ExponentLike) -> float:
    """Parse "a/b", "inf" or a decimal into a float exponent >= 1 (inf allowed)."""
    if isinstance(value, (int, float)):
        exponent = float(value)
    else:
        text = value.strip().lower()
        if text in ("inf", "infinity", "+inf"):
            exponent = math.inf
        else:
            try:
                exponent = float(Fraction(text))
            except (ValueError, ZeroDivisionError):
                raise InvalidExponentError(f"invalid exponent {value!r}")
    if math.isnan(exponent) or exponent < 1:
        raise InvalidExponentError(f"exponent must lie in [1, inf], got {value!r}")
    return exponent


def parse_exponent_list(text: str) -> List[float]:
    """Comma-separated exponents; an item "lo:step:hi" expands to an inclusive range."""
    out: List[float] = []
    for item in (part.strip() for part in text.split(",")):
        if not item:
            continue
        if item.count(":") == 2:
            out.extend(_expand_range(item))
        else:
            out.append(parse_exponent(item))
    if not out:
        raise InvalidExponentError("exponent list is empty")
    return out


def _expand_range(item: str) -> List[float]:
    try:
        lo, step, hi = (Fraction(part.strip()) for part in item.split(":"))
    except (ValueError, ZeroDivisionError):
        raise InvalidExponentError(f"invalid exponent range {item!r}")
    if step <= 0 or hi < lo:
        raise InvalidExponentError(f"invalid exponent range {item!r}")
    count = int((hi - lo) / step)
    return [parse_exponent(float(lo + k * step)) for k in range(count + 1)]


def format_exponent(exponent: float) -> str:
    if math.isinf(exponent):
        return "inf"
    fraction = Fraction(exponent).limit_denominator(64)
    if float(fraction) == exponent:
        return str(fraction)
    return repr(exponent)
