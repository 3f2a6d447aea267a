"""Parser and evaluator for coefficient expressions over (t, x).

Grammar (whitespace-insensitive)::

    expr   := term  (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative: 2^3^2 == 512
    atom   := NUMBER | 't' | 'x' | 'pi' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := sin | cos | exp | tanh | sqrt | abs

Expressions evaluate vectorized over numpy arrays.  Division by zero and
sqrt of a negative raise ExpressionEvalError carrying the source offset of
the offending operator.  ASTs support exact symbolic differentiation in
t or x, which is what makes formally dual operators exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ExpressionEvalError, ExpressionSyntaxError

_FUNCTIONS = ("sin", "cos", "exp", "tanh", "sqrt", "abs")

_NUMBER_RE = re.compile(r"(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


# --- AST nodes ------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float
    offset: int = -1


@dataclass(frozen=True)
class Var:
    name: str  # "t" or "x"
    offset: int = -1


@dataclass(frozen=True)
class Neg:
    operand: object
    offset: int = -1


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: object
    right: object
    offset: int = -1


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object
    offset: int = -1


# --- tokenizer ------------------------------------------------------------

def _tokenize(src):
    tokens = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c in "+-*/^()":
            tokens.append((c, c, i))
            i += 1
            continue
        m = _NUMBER_RE.match(src, i)
        if m:
            tokens.append(("num", float(m.group()), i))
            i = m.end()
            continue
        m = _NAME_RE.match(src, i)
        if m:
            tokens.append(("name", m.group(), i))
            i = m.end()
            continue
        raise ExpressionSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(("end", None, n))
    return tokens


# --- parser ---------------------------------------------------------------

class _Parser:
    def __init__(self, src):
        self.src = src
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.peek()
        if tok[0] != kind:
            raise ExpressionSyntaxError(
                f"expected {kind!r}, found {tok[0]!r}", tok[2], expected=kind)
        return self.advance()

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionSyntaxError(
                f"trailing input starting with {tok[0]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op, _, off = self.advance()
            node = BinOp(op, node, self.term(), off)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] in ("*", "/"):
            op, _, off = self.advance()
            node = BinOp(op, node, self.unary(), off)
        return node

    def unary(self):
        if self.peek()[0] == "-":
            _, _, off = self.advance()
            return Neg(self.unary(), off)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "^":
            _, _, off = self.advance()
            return BinOp("^", base, self.unary(), off)
        return base

    def atom(self):
        kind, value, off = self.peek()
        if kind == "num":
            self.advance()
            return Num(value, off)
        if kind == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            self.advance()
            if value in ("t", "x"):
                return Var(value, off)
            if value == "pi":
                return Num(math.pi, off)
            if value in _FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg, off)
            raise ExpressionSyntaxError(f"unknown identifier {value!r}", off)
        raise ExpressionSyntaxError(
            f"expected a value, found {kind!r}", off, expected="atom")


# --- evaluation -----------------------------------------------------------

_CALL_TABLE = {
    "sin": np.sin, "cos": np.cos, "exp": np.exp, "tanh": np.tanh,
    "sqrt": np.sqrt, "abs": np.abs,
}


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        lv = _eval(node.left, env)
        rv = _eval(node.right, env)
        if node.op == "+":
            return lv + rv
        if node.op == "-":
            return lv - rv
        if node.op == "*":
            return lv * rv
        if node.op == "/":
            if np.any(rv == 0):
                raise ExpressionEvalError("division by zero", node.offset)
            return lv / rv
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.power(lv, rv)
        if not np.all(np.isfinite(out)):
            raise ExpressionEvalError("invalid power", node.offset)
        return out
    if isinstance(node, Call):
        av = _eval(node.arg, env)
        if node.fn == "sqrt" and np.any(av < 0):
            raise ExpressionEvalError("sqrt of a negative value", node.offset)
        return _CALL_TABLE[node.fn](av)
    raise TypeError(f"not an AST node: {node!r}")


# --- symbolic derivative ---------------------------------------------------

def _num(v):
    return Num(float(v))


def _is_num(node, v=None):
    return isinstance(node, Num) and (v is None or node.value == v)


def _add(a, b):
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if _is_num(a) and _is_num(b):
        return _num(a.value + b.value)
    return BinOp("+", a, b)


def _sub(a, b):
    if _is_num(b, 0.0):
        return a
    if _is_num(a) and _is_num(b):
        return _num(a.value - b.value)
    if _is_num(a, 0.0):
        return Neg(b)
    return BinOp("-", a, b)


def _mul(a, b):
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return _num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b):
        return _num(a.value * b.value)
    return BinOp("*", a, b)


def _div(a, b):
    if _is_num(a, 0.0):
        return _num(0.0)
    if _is_num(b, 1.0):
        return a
    return BinOp("/", a, b)


def _diff(node, var):
    if isinstance(node, Num):
        return _num(0.0)
    if isinstance(node, Var):
        return _num(1.0 if node.name == var else 0.0)
    if isinstance(node, Neg):
        d = _diff(node.operand, var)
        return _num(0.0) if _is_num(d, 0.0) else Neg(d)
    if isinstance(node, BinOp):
        u, v = node.left, node.right
        du, dv = _diff(u, var), _diff(v, var)
        if node.op == "+":
            return _add(du, dv)
        if node.op == "-":
            return _sub(du, dv)
        if node.op == "*":
            return _add(_mul(du, v), _mul(u, dv))
        if node.op == "/":
            return _div(_sub(_mul(du, v), _mul(u, dv)), BinOp("^", v, _num(2.0)))
        # power
        if _is_num(v):
            c = v.value
            if c == 0.0:
                return _num(0.0)
            return _mul(_mul(_num(c), BinOp("^", u, _num(c - 1.0))), du)
        if _is_num(u):
            # c^v: c^v * ln(c) * dv; ln(c) folds to a number
            if u.value <= 0.0:
                raise ExpressionEvalError(
                    "cannot differentiate a nonpositive base with variable "
                    "exponent", node.offset)
            return _mul(_mul(node, _num(math.log(u.value))), dv)
        # u^v with both sides variable needs ln(u), which the grammar lacks
        raise ExpressionEvalError(
            "cannot differentiate a variable-base variable-exponent power",
            node.offset)
    if isinstance(node, Call):
        u = node.arg
        du = _diff(u, var)
        if _is_num(du, 0.0):
            return _num(0.0)
        if node.fn == "sin":
            return _mul(Call("cos", u), du)
        if node.fn == "cos":
            return Neg(_mul(Call("sin", u), du))
        if node.fn == "exp":
            return _mul(Call("exp", u), du)
        if node.fn == "tanh":
            return _mul(_sub(_num(1.0), BinOp("^", Call("tanh", u), _num(2.0))), du)
        if node.fn == "sqrt":
            return _div(du, _mul(_num(2.0), Call("sqrt", u)))
        # abs: u/|u| * du, undefined at 0 (surfaces as division by zero)
        return _mul(_div(u, Call("abs", u)), du)
    raise TypeError(f"not an AST node: {node!r}")


def _depends_on(node, var):
    if isinstance(node, Var):
        return node.name == var
    if isinstance(node, Neg):
        return _depends_on(node.operand, var)
    if isinstance(node, BinOp):
        return _depends_on(node.left, var) or _depends_on(node.right, var)
    if isinstance(node, Call):
        return _depends_on(node.arg, var)
    return False


def _to_str(node):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_to_str(node.operand)})"
    if isinstance(node, BinOp):
        return f"({_to_str(node.left)} {node.op} {_to_str(node.right)})"
    if isinstance(node, Call):
        return f"{node.fn}({_to_str(node.arg)})"
    return repr(node)


# --- public wrapper --------------------------------------------------------

class Expression:
    """A parsed coefficient expression over the identifiers t and x."""

    __slots__ = ("root", "source")

    def __init__(self, root, source=""):
        self.root = root
        self.source = source

    def __call__(self, t, x):
        return _eval(self.root, {"t": t, "x": x})

    def diff(self, var):
        if var not in ("t", "x"):
            raise ValueError(f"can only differentiate in t or x, not {var!r}")
        return Expression(_diff(self.root, var), f"d/d{var}({self.source})")

    def depends_on(self, var):
        return _depends_on(self.root, var)

    def is_constant(self):
        return not (self.depends_on("t") or self.depends_on("x"))

    def constant_value(self):
        if not self.is_constant():
            raise ValueError("expression is not constant")
        return float(_eval(self.root, {"t": 0.0, "x": 0.0}))

    # arithmetic combinators (fold trivial zeros/ones) for building the
    # derived coefficient fields of dual operators and the box expansion
    def __add__(self, other):
        other = parse_expression(other)
        return Expression(_add(self.root, other.root),
                          f"({self.source})+({other.source})")

    def __sub__(self, other):
        other = parse_expression(other)
        return Expression(_sub(self.root, other.root),
                          f"({self.source})-({other.source})")

    def __mul__(self, other):
        other = parse_expression(other)
        return Expression(_mul(self.root, other.root),
                          f"({self.source})*({other.source})")

    def __truediv__(self, other):
        other = parse_expression(other)
        return Expression(_div(self.root, other.root),
                          f"({self.source})/({other.source})")

    def __neg__(self):
        if _is_num(self.root):
            return Expression(_num(-self.root.value), f"-({self.source})")
        return Expression(Neg(self.root), f"-({self.source})")

    def sqrt(self):
        if _is_num(self.root):
            return Expression(_num(math.sqrt(self.root.value)),
                              f"sqrt({self.source})")
        return Expression(Call("sqrt", self.root), f"sqrt({self.source})")

    def __repr__(self):
        return f"Expression({_to_str(self.root)})"


def parse_expression(src):
    """Parse a coefficient expression string into an Expression.

    Raises ExpressionSyntaxError with the failing offset on bad input.
    """
    if isinstance(src, Expression):
        return src
    if isinstance(src, (int, float)):
        return Expression(_num(src), repr(src))
    return Expression(_Parser(src).parse(), src)


def constant(value):
    """Expression wrapping a plain number."""
    return Expression(_num(value), repr(float(value)))
