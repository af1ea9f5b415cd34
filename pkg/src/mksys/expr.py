"""Arithmetic expression language for maps, probabilities and observables.

Grammar (recursive descent, left-associative binary operators)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := NUMBER | 'x' ('[' INT ']')? | '(' expr ')' | '-' factor
            | FUNC '(' expr ')'

``FUNC`` is one of ``abs``, ``exp``, ``log``, ``sqrt``. Bare ``x`` means
``x[0]`` and is only legal in one dimension. Parsing is total: anything that
is syntactically valid yields a tree, and domain problems such as ``log(0)``
surface as :class:`NumericError` when the tree is evaluated.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import ArityError, NumericError, ParseError

FUNCTIONS = ("abs", "exp", "log", "sqrt")
MAX_DEPTH = 200


class Expr:
    """Base class of expression tree nodes."""

    def __str__(self):
        return to_source(self)


@dataclass(frozen=True)
class Lit(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    index: int


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    left: Expr
    right: Expr


class Add(BinOp):
    pass


class Sub(BinOp):
    pass


class Mul(BinOp):
    pass


class Div(BinOp):
    pass


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


_SYMBOL = {Add: "+", Sub: "-", Mul: "*", Div: "/"}
_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2}

# --------------------------------------------------------------------------
# Lexer

_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class _Token:
    kind: str  # 'num', 'name', 'op', 'end'
    text: str
    pos: int  # character offset


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c in " \t\r\n":
            i += 1
            continue
        m = _NUMBER.match(src, i)
        if m:
            tokens.append(_Token("num", m.group(), i))
            i = m.end()
            continue
        m = _NAME.match(src, i)
        if m:
            tokens.append(_Token("name", m.group(), i))
            i = m.end()
            continue
        if c in "+-*/()[]":
            tokens.append(_Token("op", c, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", position=_byte_offset(src, i),
                         expected="token", found=c)
    tokens.append(_Token("end", "", n))
    return tokens


def _byte_offset(src: str, i: int) -> int:
    return len(src[:i].encode("utf-8", "surrogatepass"))


# --------------------------------------------------------------------------
# Parser

class _Parser:
    def __init__(self, src: str, dim: int):
        self.src = src
        self.dim = dim
        self.tokens = _tokenize(src)
        self.i = 0
        self.depth = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def fail(self, expected: str, tok: _Token | None = None):
        tok = tok or self.tok
        found = tok.text if tok.kind != "end" else "end of input"
        raise ParseError(f"expected {expected}, found {found!r}",
                         position=_byte_offset(self.src, tok.pos),
                         expected=expected, found=found)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            self.fail(repr(text))

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            self.fail("end of input")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            cls = Add if self.tok.text == "+" else Sub
            self.i += 1
            node = cls(node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            cls = Mul if self.tok.text == "*" else Div
            self.i += 1
            node = cls(node, self.factor())
        return node

    def factor(self) -> Expr:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ParseError("expression nested too deeply",
                             position=_byte_offset(self.src, self.tok.pos),
                             expected="factor", found=self.tok.text)
        try:
            return self._factor()
        finally:
            self.depth -= 1

    def _factor(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Lit(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.i += 1
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "op" and tok.text == "-":
            self.i += 1
            return Neg(self.factor())
        if tok.kind == "name":
            if tok.text == "x":
                self.i += 1
                return self.variable(tok)
            if tok.text in FUNCTIONS:
                self.i += 1
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            self.fail("factor")
        self.fail("factor")

    def variable(self, xtok: _Token) -> Var:
        if not self.accept("["):
            if self.dim != 1:
                raise ArityError(f"bare 'x' needs dim=1 (dim={self.dim})",
                                 position=_byte_offset(self.src, xtok.pos),
                                 expected="x[index]", found="x")
            return Var(0)
        tok = self.tok
        if tok.kind != "num" or not tok.text.isdigit():
            self.fail("integer index")
        self.i += 1
        self.expect("]")
        j = int(tok.text)
        if j >= self.dim:
            raise ArityError(f"index {j} out of range for dim={self.dim}",
                             position=_byte_offset(self.src, tok.pos),
                             expected=f"index < {self.dim}", found=tok.text)
        return Var(j)


def parse_expr(src: Union[str, bytes], dim: int = 1) -> Expr:
    """Parse ``src`` into an expression tree over a ``dim``-dimensional point.

    Raises :class:`ParseError` (or its subclass :class:`ArityError`) for any
    input that is not a well-formed expression, including undecodable bytes.
    """
    if isinstance(src, (bytes, bytearray)):
        try:
            src = bytes(src).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("invalid UTF-8", position=exc.start, expected="text",
                             found=repr(bytes(src)[exc.start:exc.start + 1])) from None
    if not src.strip():
        raise ParseError("empty expression", position=0, expected="factor", found="end of input")
    return _Parser(src, dim).parse()


# --------------------------------------------------------------------------
# Printing

def _lit_source(v: float) -> str:
    if math.isinf(v):
        return "1e999"
    return repr(v)


def to_source(e: Expr) -> str:
    """Render ``e`` with the minimal parentheses needed to reparse it identically."""
    if isinstance(e, Lit):
        return _lit_source(e.value)
    if isinstance(e, Var):
        return f"x[{e.index}]"
    if isinstance(e, Neg):
        inner = to_source(e.operand)
        return f"-({inner})" if isinstance(e.operand, BinOp) else f"-{inner}"
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    prec = _PREC[type(e)]
    left, right = to_source(e.left), to_source(e.right)
    if isinstance(e.left, BinOp) and _PREC[type(e.left)] < prec:
        left = f"({left})"
    if isinstance(e.right, BinOp) and _PREC[type(e.right)] <= prec:
        right = f"({right})"
    return f"{left}{_SYMBOL[type(e)]}{right}"


def variables(e: Expr) -> set[int]:
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, Lit):
        return set()
    if isinstance(e, Neg):
        return variables(e.operand)
    if isinstance(e, Call):
        return variables(e.arg)
    return variables(e.left) | variables(e.right)


# --------------------------------------------------------------------------
# Evaluation

def _check(v: float, e: Expr) -> float:
    if not math.isfinite(v):
        raise NumericError(f"non-finite value {v!r} from {to_source(e)}")
    return v


def _walk(e: Expr, x) -> float:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        return x[e.index]
    if isinstance(e, Neg):
        return -_walk(e.operand, x)
    if isinstance(e, Call):
        return _MATH[e.func](_walk(e.arg, x))
    a, b = _walk(e.left, x), _walk(e.right, x)
    if isinstance(e, Add):
        return a + b
    if isinstance(e, Sub):
        return a - b
    if isinstance(e, Mul):
        return a * b
    return a / b


_MATH = {"abs": abs, "exp": math.exp, "log": math.log, "sqrt": math.sqrt}
_NUMPY = {"abs": np.abs, "exp": np.exp, "log": np.log, "sqrt": np.sqrt}
_MATH_ERRORS = (ValueError, ZeroDivisionError, OverflowError)


def eval_expr(e: Expr, x) -> float:
    """Evaluate ``e`` at point ``x`` (a float in one dimension, else a sequence)."""
    if not isinstance(x, (tuple, list, np.ndarray)):
        x = (x,)
    try:
        v = float(_walk(e, x))
    except _MATH_ERRORS as exc:
        raise NumericError(f"{exc} while evaluating {to_source(e)}") from None
    return _check(v, e)


def _build(e: Expr) -> Callable:
    if isinstance(e, Lit):
        v = e.value
        return lambda x: v
    if isinstance(e, Var):
        j = e.index
        return lambda x: x[j]
    if isinstance(e, Neg):
        f = _build(e.operand)
        return lambda x: -f(x)
    if isinstance(e, Call):
        fn, f = _MATH[e.func], _build(e.arg)
        return lambda x: fn(f(x))
    f, g = _build(e.left), _build(e.right)
    if isinstance(e, Add):
        return lambda x: f(x) + g(x)
    if isinstance(e, Sub):
        return lambda x: f(x) - g(x)
    if isinstance(e, Mul):
        return lambda x: f(x) * g(x)
    return lambda x: f(x) / g(x)


def compile_scalar(e: Expr) -> Callable[[tuple], float]:
    """Closure evaluating ``e`` on a point tuple; same arithmetic as :func:`eval_expr`."""
    fn = _build(e)

    def run(x):
        try:
            v = fn(x)
        except _MATH_ERRORS as exc:
            raise NumericError(f"{exc} while evaluating {to_source(e)}") from None
        if not math.isfinite(v):
            raise NumericError(f"non-finite value {v!r} from {to_source(e)}")
        return float(v)

    return run


def _build_vec(e: Expr) -> Callable:
    if isinstance(e, Lit):
        v = np.float64(e.value)
        return lambda X: v
    if isinstance(e, Var):
        j = e.index
        return lambda X: X[:, j]
    if isinstance(e, Neg):
        f = _build_vec(e.operand)
        return lambda X: -f(X)
    if isinstance(e, Call):
        fn, f = _NUMPY[e.func], _build_vec(e.arg)
        return lambda X: fn(f(X))
    f, g = _build_vec(e.left), _build_vec(e.right)
    if isinstance(e, Add):
        return lambda X: f(X) + g(X)
    if isinstance(e, Sub):
        return lambda X: f(X) - g(X)
    if isinstance(e, Mul):
        return lambda X: f(X) * g(X)
    return lambda X: np.divide(f(X), g(X))


def compile_vector(e: Expr) -> Callable[[np.ndarray], np.ndarray]:
    """Closure evaluating ``e`` row-wise on an ``(m, dim)`` array of points."""
    fn = _build_vec(e)

    def run(X):
        with np.errstate(all="ignore"):
            v = fn(X)
        v = np.broadcast_to(np.asarray(v, dtype=float), (X.shape[0],))
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise NumericError(f"non-finite value at point {X[bad].tolist()} from {to_source(e)}")
        return np.array(v)

    return run
