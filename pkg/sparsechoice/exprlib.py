"""Base-function expression language.

Expressions are small immutable trees built from covariate references (``x3``),
references to previously built library columns (``c12``), numeric constants and a
fixed vocabulary of elementwise functions.  A bare ``x`` is the free slot of a
library template; :func:`substitute_slot` binds it to a concrete column.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | func '(' args ')' | 'x' INT | 'c' INT | 'x'
            | NUMBER | 'inf' | '(' expr ')'

``power(e, k)`` needs a numeric ``k`` and ``clip(e, lo, hi)`` numeric bounds
(``inf`` allowed).  A ``np.`` prefix on names is accepted so listings written
against numpy parse unchanged.

Evaluation is vectorised over rows.  Infinite values propagate; NaN never does.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from sparsechoice.errors import (
    DivisionByZeroError,
    DomainError,
    EvaluationError,
    ExprSyntaxError,
    ExprValidationError,
    NaNProducedError,
    UnknownFunctionError,
)

__all__ = [
    "Expr",
    "VariableRef",
    "ColumnRef",
    "Slot",
    "Constant",
    "Unary",
    "Binary",
    "Clip",
    "UNARY_OPS",
    "BINARY_OPS",
    "parse_expr",
    "format_expr",
    "eval_expr",
    "substitute_slot",
    "has_slot",
    "walk",
]

UNARY_OPS = frozenset(
    {
        "neg", "abs", "sqrt", "exp", "log", "sin", "cos", "tan",
        "arcsin", "arccos", "arctan", "sinh", "cosh", "tanh",
    }
)
BINARY_OPS = frozenset({"add", "sub", "mul", "div", "pow"})


class Expr:
    """Marker base class for expression nodes."""

    __slots__ = ()

    def __str__(self) -> str:
        return format_expr(self)


@dataclass(frozen=True, slots=True)
class VariableRef(Expr):
    index: int

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ExprValidationError(f"covariate index must be non-negative, got {self.index}")


@dataclass(frozen=True, slots=True)
class ColumnRef(Expr):
    index: int

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ExprValidationError(f"column index must be non-negative, got {self.index}")


@dataclass(frozen=True, slots=True)
class Slot(Expr):
    pass


@dataclass(frozen=True, slots=True)
class Constant(Expr):
    value: float

    def __post_init__(self) -> None:
        if math.isnan(self.value):
            raise ExprValidationError("constants must not be NaN")


@dataclass(frozen=True, slots=True)
class Unary(Expr):
    op: str
    child: Expr

    def __post_init__(self) -> None:
        if self.op not in UNARY_OPS:
            raise ExprValidationError(f"unknown unary operator {self.op!r}")


@dataclass(frozen=True, slots=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self) -> None:
        if self.op not in BINARY_OPS:
            raise ExprValidationError(f"unknown binary operator {self.op!r}")
        if self.op == "pow" and not isinstance(self.right, Constant):
            raise ExprValidationError("power exponent must be a numeric constant")


@dataclass(frozen=True, slots=True)
class Clip(Expr):
    child: Expr
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self) -> None:
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ExprValidationError("clip bounds must not be NaN")
        if self.lo > self.hi:
            raise ExprValidationError(f"clip requires lo <= hi, got lo={self.lo} hi={self.hi}")


def walk(expr: Expr) -> Iterator[Expr]:
    """Yield every node of ``expr`` in pre-order."""

    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Binary):
            stack.extend((node.right, node.left))
        elif isinstance(node, (Unary, Clip)):
            stack.append(node.child)


def has_slot(expr: Expr) -> bool:
    return any(isinstance(node, Slot) for node in walk(expr))


def substitute_slot(expr: Expr, replacement: Expr) -> Expr:
    """Return ``expr`` with every :class:`Slot` replaced by ``replacement``."""

    if isinstance(expr, Slot):
        return replacement
    if isinstance(expr, Unary):
        return Unary(expr.op, substitute_slot(expr.child, replacement))
    if isinstance(expr, Binary):
        return Binary(
            expr.op,
            substitute_slot(expr.left, replacement),
            substitute_slot(expr.right, replacement),
        )
    if isinstance(expr, Clip):
        return Clip(substitute_slot(expr.child, replacement), expr.lo, expr.hi)
    return expr


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<op>[-+*/(),])
    """,
    re.VERBOSE,
)

_FUNCTIONS = {
    "power": 2,
    "clip": 3,
    **{name: 1 for name in UNARY_OPS if name != "neg"},
}

_BINARY_SYMBOLS = {"+": "add", "-": "sub", "*": "mul", "/": "div"}


@dataclass(frozen=True, slots=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(src: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos + 1)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(src)))
    return tokens


def _strip_np(name: str) -> str:
    return name[3:] if name.startswith("np.") else name


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def _advance(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def _error(self, message: str, tok: _Token | None = None) -> ExprSyntaxError:
        tok = tok or self.tok
        if tok.kind == "eof":
            message = f"{message}: unexpected end of input"
        else:
            message = f"{message}: unexpected {tok.text!r}"
        return ExprSyntaxError(message, tok.pos + 1)

    def _expect(self, text: str) -> _Token:
        if self.tok.kind == "op" and self.tok.text == text:
            return self._advance()
        raise self._error(f"expected {text!r}")

    def parse(self) -> Expr:
        if self.tok.kind == "eof":
            raise ExprSyntaxError("empty expression", 1)
        node = self.expr()
        if self.tok.kind != "eof":
            raise self._error("expected end of expression")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = _BINARY_SYMBOLS[self._advance().text]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = _BINARY_SYMBOLS[self._advance().text]
            node = Binary(op, node, self.factor())
        return node

    def _number_literal(self) -> float | None:
        t = self.tok
        if t.kind == "number":
            self._advance()
            return float(t.text)
        if t.kind == "ident" and _strip_np(t.text) == "inf":
            nxt = self.tokens[self.i + 1]
            if not (nxt.kind == "op" and nxt.text == "("):
                self._advance()
                return math.inf
        return None

    def factor(self) -> Expr:
        t = self.tok
        if t.kind == "op" and t.text == "-":
            self._advance()
            value = self._number_literal()
            if value is not None:
                return Constant(-value)
            return Unary("neg", self.factor())
        value = self._number_literal()
        if value is not None:
            return Constant(value)
        if t.kind == "op" and t.text == "(":
            self._advance()
            node = self.expr()
            self._expect(")")
            return node
        if t.kind == "ident":
            self._advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(t)
            return self.name(t)
        raise self._error("expected an operand")

    def name(self, t: _Token) -> Expr:
        if t.text == "x":
            return Slot()
        m = re.fullmatch(r"([xc])(\d+)", t.text)
        if m is None:
            raise ExprSyntaxError(f"unknown name {t.text!r}", t.pos + 1)
        index = int(m.group(2))
        return VariableRef(index) if m.group(1) == "x" else ColumnRef(index)

    def call(self, t: _Token) -> Expr:
        fname = _strip_np(t.text)
        if fname not in _FUNCTIONS:
            raise UnknownFunctionError(fname, t.pos + 1)
        self._expect("(")
        args = [self.expr()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self._advance()
            args.append(self.expr())
        self._expect(")")
        if len(args) != _FUNCTIONS[fname]:
            raise ExprSyntaxError(
                f"{fname} takes {_FUNCTIONS[fname]} argument(s), got {len(args)}", t.pos + 1
            )
        if fname == "power":
            if not isinstance(args[1], Constant):
                raise ExprValidationError(
                    f"power exponent must be a numeric constant (offset {t.pos + 1})"
                )
            return Binary("pow", args[0], args[1])
        if fname == "clip":
            lo, hi = args[1], args[2]
            if not (isinstance(lo, Constant) and isinstance(hi, Constant)):
                raise ExprValidationError(f"clip bounds must be numeric (offset {t.pos + 1})")
            return Clip(args[0], lo.value, hi.value)
        return Unary(fname, args[0])


def parse_expr(src: str) -> Expr:
    """Parse DSL text into an expression tree.

    Raises :class:`ExprSyntaxError` (1-based offset), :class:`UnknownFunctionError`
    or :class:`ExprValidationError`.
    """

    return _Parser(src).parse()


# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_ATOM = 1, 2, 3, 4
_BINARY_TEXT = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def _format_number(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(float(value))


def _precedence(expr: Expr) -> int:
    if isinstance(expr, Binary):
        if expr.op in ("add", "sub"):
            return _PREC_ADD
        if expr.op in ("mul", "div"):
            return _PREC_MUL
        return _PREC_ATOM
    if isinstance(expr, Unary) and expr.op == "neg":
        return _PREC_UNARY
    if isinstance(expr, Constant) and expr.value < 0:
        return _PREC_UNARY
    return _PREC_ATOM


def format_expr(expr: Expr) -> str:
    """Render ``expr`` as DSL text that parses back to the same tree."""

    if isinstance(expr, VariableRef):
        return f"x{expr.index}"
    if isinstance(expr, ColumnRef):
        return f"c{expr.index}"
    if isinstance(expr, Slot):
        return "x"
    if isinstance(expr, Constant):
        return _format_number(expr.value)
    if isinstance(expr, Clip):
        return f"clip({format_expr(expr.child)}, {_format_number(expr.lo)}, {_format_number(expr.hi)})"
    if isinstance(expr, Unary):
        if expr.op != "neg":
            return f"{expr.op}({format_expr(expr.child)})"
        child = expr.child
        if _precedence(child) < _PREC_UNARY or (
            isinstance(child, Constant) and _precedence(child) == _PREC_ATOM
        ):
            return f"-({format_expr(child)})"
        return f"-{format_expr(child)}"
    if isinstance(expr, Binary):
        if expr.op == "pow":
            return f"power({format_expr(expr.left)}, {format_expr(expr.right)})"
        prec = _precedence(expr)
        left = format_expr(expr.left)
        if _precedence(expr.left) < prec:
            left = f"({left})"
        right = format_expr(expr.right)
        if _precedence(expr.right) <= prec:
            right = f"({right})"
        return f"{left} {_BINARY_TEXT[expr.op]} {right}"
    raise TypeError(f"not an expression node: {expr!r}")


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

def _first_row(mask: np.ndarray) -> int:
    return int(np.flatnonzero(mask)[0])


def _check_domain(op: str, arg: np.ndarray) -> None:
    if op == "sqrt":
        bad = arg < 0
        what = "sqrt of a negative value"
    elif op == "log":
        bad = arg <= 0
        what = "log of a non-positive value"
    elif op in ("arcsin", "arccos"):
        bad = np.abs(arg) > 1
        what = f"{op} argument outside [-1, 1]"
    else:
        return
    if bad.any():
        raise DomainError(what, row=_first_row(bad))


_UNARY_FUNCS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "neg": np.negative,
    "abs": np.abs,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "arcsin": np.arcsin,
    "arccos": np.arccos,
    "arctan": np.arctan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
}


def _covariate_matrix(covariates: Any) -> np.ndarray:
    values = np.asarray(getattr(covariates, "values", covariates), dtype=float)
    if values.ndim != 2:
        raise EvaluationError(f"covariates must be a 2-D table, got shape {values.shape}")
    return values


class _Evaluator:
    def __init__(self, X: np.ndarray, built: Sequence[np.ndarray]):
        self.X = X
        self.built = built
        self.rows = X.shape[0]

    def run(self, node: Expr) -> np.ndarray:
        out = self._eval(node)
        nan = np.isnan(out)
        if nan.any():
            raise NaNProducedError(f"NaN produced by {format_expr(node)}", row=_first_row(nan))
        return out

    def _eval(self, node: Expr) -> np.ndarray:
        if isinstance(node, VariableRef):
            if node.index >= self.X.shape[1]:
                raise EvaluationError(
                    f"covariate x{node.index} out of range (table has {self.X.shape[1]} columns)"
                )
            return self.X[:, node.index].copy()
        if isinstance(node, ColumnRef):
            if node.index >= len(self.built):
                raise EvaluationError(
                    f"library column c{node.index} is not built yet ({len(self.built)} available)"
                )
            return np.array(self.built[node.index], dtype=float, copy=True)
        if isinstance(node, Constant):
            return np.full(self.rows, node.value, dtype=float)
        if isinstance(node, Slot):
            raise EvaluationError("template slot 'x' is unbound")

        if isinstance(node, Clip):
            out = np.clip(self.run(node.child), node.lo, node.hi)
        elif isinstance(node, Unary):
            arg = self.run(node.child)
            _check_domain(node.op, arg)
            out = _UNARY_FUNCS[node.op](arg)
        elif isinstance(node, Binary):
            left = self.run(node.left)
            right = self.run(node.right)
            if node.op == "add":
                out = left + right
            elif node.op == "sub":
                out = left - right
            elif node.op == "mul":
                out = left * right
            elif node.op == "div":
                zero = right == 0
                if zero.any():
                    raise DivisionByZeroError(
                        f"division by zero in {format_expr(node)}", row=_first_row(zero)
                    )
                out = left / right
            else:
                out = np.power(left, right)
        else:
            raise TypeError(f"not an expression node: {node!r}")
        return out


def eval_expr(
    expr: Expr,
    covariates: Any,
    built_columns: Sequence[np.ndarray] = (),
) -> np.ndarray:
    """Evaluate ``expr`` row-wise.

    ``covariates`` is a :class:`~sparsechoice.synthgen.CovariateTable` or any
    J x r array; ``built_columns`` holds the library columns ``c0, c1, ...``
    available to :class:`ColumnRef` nodes. Inputs are never modified.
    """

    X = _covariate_matrix(covariates)
    with np.errstate(all="ignore"):
        return _Evaluator(X, built_columns).run(expr)
