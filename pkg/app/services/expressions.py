"""
Coefficient expressions: a closed grammar over the variable ``x``.

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | 'inf' | 'x' | '(' expr ')' | NAME '(' args ')'

Named functions: exp, abs, tanh, sech (one argument), min, max (two or more),
indicator(lo, hi) and piecewise((lo, hi, expr), ...). Interval bounds must be
constant. Intervals are half-open [lo, hi).
"""

import logging
import math
import re
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from app.core.errors import (
    ArityError,
    CoefficientEvaluationError,
    ExpressionSyntaxError,
    PoleEvaluationError,
    UnknownIdentifierError,
)

logger = logging.getLogger(__name__)


class Node:
    """Base class of all AST nodes."""

    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Num(Node):
    value: float


@dataclass(frozen=True, slots=True)
class Var(Node):
    pass


@dataclass(frozen=True, slots=True)
class Neg(Node):
    operand: Node


@dataclass(frozen=True, slots=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True, slots=True)
class Call(Node):
    name: str
    args: Tuple[Node, ...]


@dataclass(frozen=True, slots=True)
class Indicator(Node):
    lo: float
    hi: float


@dataclass(frozen=True, slots=True)
class Piece:
    lo: float
    hi: float
    expr: Node


@dataclass(frozen=True, slots=True)
class Piecewise(Node):
    pieces: Tuple[Piece, ...]


UNARY_FUNCTIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "exp": np.exp,
    "abs": np.abs,
    "tanh": np.tanh,
    "sech": lambda v: 1.0 / np.cosh(v),
}
VARIADIC_FUNCTIONS: Dict[str, Callable[..., np.ndarray]] = {
    "min": np.minimum,
    "max": np.maximum,
}
SPECIAL_FORMS = ("indicator", "piecewise")
MAX_NESTING = 100


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


@dataclass(frozen=True, slots=True)
class Token:
    kind: str
    text: str
    offset: int


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.end() == pos:
            stripped = len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionSyntaxError(
                f"unexpected character {text[pos + stripped]!r}",
                _byte_offset(text, pos + stripped),
            )
        kind = match.lastgroup or "op"
        start = match.start(kind)
        tokens.append(Token(kind, match.group(kind), _byte_offset(text, start)))
        pos = match.end()
    tokens.append(Token("end", "", _byte_offset(text, len(text))))
    return tokens


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0
        self.depth = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, text: str) -> Token:
        if self.current.text != text:
            found = self.current.text or "end of input"
            raise ExpressionSyntaxError(
                f"expected {text!r}, found {found!r}", self.current.offset
            )
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.current.kind != "end":
            raise ExpressionSyntaxError(
                f"unexpected {self.current.text!r}", self.current.offset
            )
        return node

    def enter(self) -> None:
        """Count one level of AST depth; chains and nested operands both add one."""
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise ExpressionSyntaxError(
                f"expression nested deeper than {MAX_NESTING} levels", self.current.offset
            )

    def expr(self) -> Node:
        entered = self.depth
        node = self.term()
        while self.current.text in ("+", "-"):
            self.enter()
            op = self.advance().text
            node = BinOp(op, node, self.term())
        self.depth = entered
        return node

    def term(self) -> Node:
        entered = self.depth
        node = self.unary()
        while self.current.text in ("*", "/"):
            self.enter()
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        self.depth = entered
        return node

    def unary(self) -> Node:
        self.enter()
        try:
            if self.current.text == "-":
                self.advance()
                return Neg(self.unary())
            if self.current.text == "+":
                self.advance()
                return self.unary()
            return self.power()
        finally:
            self.depth -= 1

    def power(self) -> Node:
        base = self.atom()
        if self.current.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        token = self.current
        if token.kind == "number":
            self.advance()
            return Num(float(token.text))
        if token.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if token.kind == "name":
            self.advance()
            if token.text == "x":
                return Var()
            if token.text == "inf":
                return Num(math.inf)
            if self.current.text != "(":
                raise UnknownIdentifierError(token.text, token.offset)
            return self.call(token)
        found = token.text or "end of input"
        raise ExpressionSyntaxError(f"unexpected {found!r}", token.offset)

    def call(self, name_token: Token) -> Node:
        name = name_token.text
        if name not in UNARY_FUNCTIONS and name not in VARIADIC_FUNCTIONS:
            if name not in SPECIAL_FORMS:
                raise UnknownIdentifierError(name, name_token.offset)
        self.expect("(")
        if name == "piecewise":
            return self.piecewise(name_token)
        args = [self.expr()]
        while self.current.text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")

        if name in UNARY_FUNCTIONS:
            if len(args) != 1:
                raise ArityError(name, "1", len(args), name_token.offset)
            return Call(name, tuple(args))
        if name in VARIADIC_FUNCTIONS:
            if len(args) < 2:
                raise ArityError(name, "2 or more", len(args), name_token.offset)
            return Call(name, tuple(args))
        # indicator
        if len(args) != 2:
            raise ArityError(name, "2", len(args), name_token.offset)
        lo, hi = (self.constant(arg, name_token) for arg in args)
        if not lo < hi:
            raise ExpressionSyntaxError(
                "indicator bounds must satisfy lo < hi", name_token.offset
            )
        return Indicator(lo, hi)

    def piecewise(self, name_token: Token) -> Node:
        pieces: List[Piece] = []
        while True:
            start = self.expect("(")
            lo = self.constant(self.expr(), start)
            self.expect(",")
            hi = self.constant(self.expr(), start)
            self.expect(",")
            body = self.expr()
            self.expect(")")
            pieces.append(Piece(lo, hi, body))
            if self.current.text != ",":
                break
            self.advance()
        self.expect(")")

        pieces.sort(key=lambda piece: piece.lo)
        edges_ok = pieces[0].lo == -math.inf and pieces[-1].hi == math.inf
        for left, right in zip(pieces, pieces[1:]):
            edges_ok = edges_ok and left.hi == right.lo
        if not edges_ok or any(not piece.lo < piece.hi for piece in pieces):
            raise ExpressionSyntaxError(
                "piecewise intervals must be disjoint and cover the real line",
                name_token.offset,
            )
        return Piecewise(tuple(pieces))

    @staticmethod
    def constant(node: Node, token: Token) -> float:
        if contains_variable(node):
            raise ExpressionSyntaxError("interval bounds must be constant", token.offset)
        return float(_evaluate(node, np.zeros(1), strict=True)[0])


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _evaluate(node: Node, xs: np.ndarray, strict: bool) -> np.ndarray:
    """Vectorized evaluation; poles raise when ``strict`` and become NaN otherwise."""
    if isinstance(node, Num):
        return np.full(xs.shape, node.value)
    if isinstance(node, Var):
        return xs.astype(float, copy=True)
    if isinstance(node, Neg):
        return -_evaluate(node.operand, xs, strict)
    if isinstance(node, BinOp):
        left = _evaluate(node.left, xs, strict)
        right = _evaluate(node.right, xs, strict)
        with np.errstate(all="ignore"):
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            if node.op == "*":
                return left * right
            if node.op == "/":
                poles = right == 0
                _flag_poles(poles, xs, strict)
                out = left / np.where(poles, 1.0, right)
                out[poles] = np.nan
                return out
            poles = (left == 0) & (right < 0)
            _flag_poles(poles, xs, strict)
            out = np.power(np.where(poles, 1.0, left), right)
            out[poles] = np.nan
            return out
    if isinstance(node, Call):
        values = [_evaluate(arg, xs, strict) for arg in node.args]
        with np.errstate(over="ignore"):
            if node.name in UNARY_FUNCTIONS:
                return UNARY_FUNCTIONS[node.name](values[0])
            result = values[0]
            for other in values[1:]:
                result = VARIADIC_FUNCTIONS[node.name](result, other)
            return result
    if isinstance(node, Indicator):
        return ((xs >= node.lo) & (xs < node.hi)).astype(float)
    if isinstance(node, Piecewise):
        out = np.empty(xs.shape)
        for piece in node.pieces:
            mask = (xs >= piece.lo) & (xs < piece.hi)
            if np.any(mask):
                out[mask] = _evaluate(piece.expr, xs[mask], strict)
        return out
    raise TypeError(f"unsupported node {node!r}")


def _flag_poles(poles: np.ndarray, xs: np.ndarray, strict: bool) -> None:
    if strict and np.any(poles):
        raise PoleEvaluationError(float(xs[np.argmax(poles)]))


def contains_variable(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Piecewise):
        return True
    if isinstance(node, Indicator):
        return True
    return any(contains_variable(child) for child in _children(node))


def _children(node: Node) -> Tuple[Node, ...]:
    if isinstance(node, Neg):
        return (node.operand,)
    if isinstance(node, BinOp):
        return (node.left, node.right)
    if isinstance(node, Call):
        return node.args
    if isinstance(node, Piecewise):
        return tuple(piece.expr for piece in node.pieces)
    return ()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PRECEDENCE = 3


def _format_number(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _to_text(node: Node) -> Tuple[str, int]:
    """Return (text, precedence of the outermost operator)."""
    if isinstance(node, Num):
        text = _format_number(node.value)
        return (f"({text})", 5) if node.value < 0 else (text, 5)
    if isinstance(node, Var):
        return "x", 5
    if isinstance(node, Neg):
        inner, prec = _to_text(node.operand)
        if prec <= _NEG_PRECEDENCE:
            inner = f"({inner})"
        return f"-{inner}", _NEG_PRECEDENCE
    if isinstance(node, BinOp):
        prec = _PRECEDENCE[node.op]
        left, left_prec = _to_text(node.left)
        right, right_prec = _to_text(node.right)
        if node.op == "^":
            if left_prec <= prec:
                left = f"({left})"
            if right_prec < prec and right_prec != _NEG_PRECEDENCE:
                right = f"({right})"
            return f"{left}^{right}", prec
        if left_prec < prec:
            left = f"({left})"
        if right_prec <= prec or right_prec == _NEG_PRECEDENCE:
            right = f"({right})"
        return f"{left}{node.op}{right}", prec
    if isinstance(node, Call):
        args = ",".join(_to_text(arg)[0] for arg in node.args)
        return f"{node.name}({args})", 5
    if isinstance(node, Indicator):
        return f"indicator({_format_number(node.lo)},{_format_number(node.hi)})", 5
    if isinstance(node, Piecewise):
        pieces = ",".join(
            f"({_format_number(p.lo)},{_format_number(p.hi)},{_to_text(p.expr)[0]})"
            for p in node.pieces
        )
        return f"piecewise({pieces})", 5
    raise TypeError(f"unsupported node {node!r}")


# ---------------------------------------------------------------------------
# Public type
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class CoefficientExpr:
    ast: Node

    def __str__(self) -> str:
        return self.to_text()

    def to_text(self) -> str:
        return _to_text(self.ast)[0]

    def __call__(self, xs: np.ndarray) -> np.ndarray:
        return self.evaluate_array(xs)

    def evaluate_array(self, xs: np.ndarray, strict: bool = True) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        values = _evaluate(self.ast, np.atleast_1d(xs), strict)
        if strict and not np.all(np.isfinite(values)):
            bad = np.atleast_1d(xs)[np.argmax(~np.isfinite(values))]
            raise CoefficientEvaluationError(self.to_text(), float(bad))
        return values.reshape(xs.shape)

    def evaluate_safe(self, xs: np.ndarray) -> np.ndarray:
        """Evaluate without raising; poles and overflow come back as NaN/inf."""
        xs = np.asarray(xs, dtype=float)
        return _evaluate(self.ast, np.atleast_1d(xs), strict=False).reshape(xs.shape)

    def breakpoints(self) -> Tuple[float, ...]:
        """Finite jump locations contributed by indicator and piecewise nodes."""
        points = set()
        stack: List[Node] = [self.ast]
        while stack:
            node = stack.pop()
            if isinstance(node, Indicator):
                points.update((node.lo, node.hi))
            elif isinstance(node, Piecewise):
                for piece in node.pieces:
                    points.update((piece.lo, piece.hi))
            stack.extend(_children(node))
        return tuple(sorted(p for p in points if math.isfinite(p)))

    @property
    def is_constant(self) -> bool:
        return not contains_variable(self.ast)

    def singular_points(self, lo: float, hi: float, samples: int = 4097) -> Tuple[float, ...]:
        """Points of [lo, hi] where a denominator or a negatively powered base vanishes."""
        found: List[float] = []
        for denominator in _denominators(self.ast):
            found.extend(_zeros(denominator, lo, hi, samples, self.breakpoints()))
        return tuple(sorted(set(round(point, 12) for point in found)))


def _denominators(node: Node) -> List[Node]:
    out: List[Node] = []
    stack = [node]
    while stack:
        current = stack.pop()
        if isinstance(current, BinOp) and current.op == "/":
            out.append(current.right)
        if isinstance(current, BinOp) and current.op == "^":
            if not contains_variable(current.right):
                if float(_evaluate(current.right, np.zeros(1), strict=False)[0]) < 0:
                    out.append(current.left)
        stack.extend(_children(current))
    return out


def _zeros(
    node: Node, lo: float, hi: float, samples: int, extra: Sequence[float]
) -> List[float]:
    def scalar(x: float) -> float:
        return float(_evaluate(node, np.array([x]), strict=False)[0])

    grid = np.union1d(np.linspace(lo, hi, samples), [p for p in extra if lo <= p <= hi])
    values = _evaluate(node, grid, strict=False)
    roots: List[float] = [float(x) for x in grid[values == 0]]

    finite = np.isfinite(values)
    crossings = np.flatnonzero(finite[:-1] & finite[1:] & (values[:-1] * values[1:] < 0))
    for i in crossings:
        roots.append(brentq(scalar, grid[i], grid[i + 1], xtol=1e-14))

    # touching zeros (x^2, |x|) show up as sharp local minima of |value|
    magnitude = np.abs(values)
    middle = magnitude[1:-1]
    neighbours = np.maximum(magnitude[:-2], magnitude[2:])
    dips = np.flatnonzero(
        (middle > 0)
        & (middle <= magnitude[:-2])
        & (middle <= magnitude[2:])
        & (middle < 0.5 * neighbours)
    )
    for i in dips + 1:
        result = minimize_scalar(
            lambda x: abs(scalar(x)),
            bounds=(grid[i - 1], grid[i + 1]),
            method="bounded",
            options={"xatol": 1e-13},
        )
        if abs(result.fun) <= 1e-12 * max(1.0, float(neighbours[i - 1])):
            roots.append(float(result.x))
    return roots


def parse_coefficient_expr(text: str) -> CoefficientExpr:
    """Parse ``text`` into an expression; errors carry the byte offset of the fault."""
    return CoefficientExpr(Parser(text).parse())


def evaluate_expr(e: CoefficientExpr, x: float) -> float:
    """Evaluate at a single point; raises PoleEvaluationError at a pole."""
    value = float(_evaluate(e.ast, np.array([float(x)]), strict=True)[0])
    if not math.isfinite(value):
        raise CoefficientEvaluationError(e.to_text(), float(x))
    return value


def constant(value: float) -> CoefficientExpr:
    return CoefficientExpr(Num(float(value)))


def reciprocal(e: CoefficientExpr) -> CoefficientExpr:
    return CoefficientExpr(BinOp("/", Num(1.0), e.ast))


def absolute(e: CoefficientExpr) -> CoefficientExpr:
    return CoefficientExpr(Call("abs", (e.ast,)))


def scaled(e: CoefficientExpr, factor: float) -> CoefficientExpr:
    return CoefficientExpr(BinOp("*", Num(float(factor)), e.ast))


def shifted(e: CoefficientExpr, offset: float) -> CoefficientExpr:
    return CoefficientExpr(BinOp("+", e.ast, Num(float(offset))))


def positive_part(e: CoefficientExpr) -> CoefficientExpr:
    return CoefficientExpr(Call("max", (e.ast, Num(0.0))))


def negative_part(e: CoefficientExpr) -> CoefficientExpr:
    return CoefficientExpr(Call("max", (Neg(e.ast), Num(0.0))))

