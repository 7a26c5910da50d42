"""Scalar expression language used to declare fields, constraints and shapes.

Grammar (EBNF, see also ``docs/grammar.md``)::

    expr   = term { ("+" | "-") term } ;
    term   = unary { ("*" | "/") unary } ;
    unary  = "-" unary | power ;
    power  = atom [ "^" unary ] ;            (* right associative *)
    atom   = number | name | call | "(" expr ")" ;
    call   = func "(" expr { "," expr } ")" ;
    name   = "t" | "s" | "x" digit { digit } ;
    func   = "sin" | "cos" | "exp" | "ln" | "abs" | "min" | "max" | "sqrt" ;

Expressions are parsed once into an immutable tree and compiled to nested
closures, so evaluation inside integrators costs a handful of Python calls.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "UnboundVariableError",
    "ArityError",
    "EvalError",
    "FastTimeContextError",
    "Expr",
    "parse",
    "grad",
]


class ExprError(Exception):
    """Base class for expression errors; carries a 1-based source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        where = f" (line {line}, column {col})" if line else ""
        super().__init__(message + where)


class ExprSyntaxError(ExprError):
    pass


class UnboundVariableError(ExprError):
    pass


class ArityError(ExprError):
    pass


class EvalError(ExprError):
    """Domain error raised during evaluation (never a silent NaN)."""


class FastTimeContextError(EvalError):
    pass


# AST ------------------------------------------------------------------------
# Positions are excluded from equality so that structural comparison ignores
# where a node came from.

@dataclass(frozen=True)
class Num:
    value: float
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Neg:
    operand: object
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    pos: tuple = field(default=(0, 0), compare=False)


FUNCTIONS = {
    "sin": 1, "cos": 1, "exp": 1, "ln": 1, "abs": 1, "sqrt": 1,
    "min": 2, "max": 2,
}

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)"
    r"|(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
)


def _tokenize(source: str):
    tokens = []
    line, line_start, i = 1, 0, 0
    while i < len(source):
        m = _TOKEN.match(source, i)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            tokens.append((kind, m.group(), (line, i - line_start + 1)))
        i = m.end()
    tokens.append(("end", "", (line, i - line_start + 1)))
    return tokens


class _Parser:
    def __init__(self, source: str, n: int):
        self.tokens = _tokenize(source)
        self.i = 0
        self.n = n

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, val, pos = self.take()
        if val != text:
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", *pos)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", *pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            _, op, pos = self.take()
            node = BinOp(op, node, self.term(), pos)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            _, op, pos = self.take()
            node = BinOp(op, node, self.unary(), pos)
        return node

    def unary(self):
        if self.peek()[1] == "-":
            _, _, pos = self.take()
            return Neg(self.unary(), pos)
        return self.power()

    def power(self):
        node = self.atom()
        if self.peek()[1] == "^":
            _, _, pos = self.take()
            node = BinOp("^", node, self.unary(), pos)
        return node

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val), pos)
        if kind == "name":
            if self.peek()[1] == "(":
                return self.call(val, pos)
            return self.variable(val, pos)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", *pos)

    def call(self, name, pos):
        if name not in FUNCTIONS:
            raise ExprSyntaxError(f"unknown function {name!r}", *pos)
        self.expect("(")
        args = [] if self.peek()[1] == ")" else [self.expr()]
        while args and self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if len(args) != FUNCTIONS[name]:
            raise ArityError(
                f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}", *pos)
        return Call(name, tuple(args), pos)

    def variable(self, name, pos):
        if name in ("t", "s"):
            return Var(name, pos)
        m = re.fullmatch(r"x(\d+)", name)
        if m is None:
            raise UnboundVariableError(f"unknown variable {name!r}", *pos)
        k = int(m.group(1))
        if not 1 <= k <= self.n:
            raise UnboundVariableError(
                f"variable {name} out of range for dimension {self.n}", *pos)
        return Var(name, pos)


# compilation ------------------------------------------------------------------

def _fail(msg, node):
    raise EvalError(msg, *node.pos)


def _compile(node) -> Callable:
    if isinstance(node, Num):
        v = node.value
        return lambda t, x, s: v
    if isinstance(node, Var):
        if node.name == "t":
            return lambda t, x, s: t
        if node.name == "s":
            def fast(t, x, s):
                if s is None:
                    raise FastTimeContextError(
                        "fast-time variable outside jump context", *node.pos)
                return s
            return fast
        k = int(node.name[1:]) - 1
        return lambda t, x, s: x[k]
    if isinstance(node, Neg):
        a = _compile(node.operand)
        return lambda t, x, s: -a(t, x, s)
    if isinstance(node, BinOp):
        a, b = _compile(node.left), _compile(node.right)
        if node.op == "+":
            return lambda t, x, s: a(t, x, s) + b(t, x, s)
        if node.op == "-":
            return lambda t, x, s: a(t, x, s) - b(t, x, s)
        if node.op == "*":
            return lambda t, x, s: a(t, x, s) * b(t, x, s)
        if node.op == "/":
            def div(t, x, s):
                den = b(t, x, s)
                if den == 0:
                    _fail("division by zero", node)
                return a(t, x, s) / den
            return div

        def power(t, x, s):
            base, ex = float(a(t, x, s)), float(b(t, x, s))
            if base == 0.0 and ex < 0:
                _fail("division by zero in power", node)
            if base < 0 and not ex.is_integer():
                _fail("negative base with fractional exponent", node)
            try:
                return base ** ex
            except OverflowError:
                _fail("overflow in power", node)
        return power
    if isinstance(node, Call):
        fs = [_compile(arg) for arg in node.args]
        name = node.func
        if name == "min":
            return lambda t, x, s: min(fs[0](t, x, s), fs[1](t, x, s))
        if name == "max":
            return lambda t, x, s: max(fs[0](t, x, s), fs[1](t, x, s))
        f0 = fs[0]
        if name == "ln":
            def ln(t, x, s):
                v = f0(t, x, s)
                if v <= 0:
                    _fail("ln of nonpositive value", node)
                return math.log(v)
            return ln
        if name == "sqrt":
            def sqrt(t, x, s):
                v = f0(t, x, s)
                if v < 0:
                    _fail("sqrt of negative value", node)
                return math.sqrt(v)
            return sqrt
        if name == "exp":
            def exp(t, x, s):
                try:
                    return math.exp(f0(t, x, s))
                except OverflowError:
                    _fail("overflow in exp", node)
            return exp
        fn = {"sin": math.sin, "cos": math.cos, "abs": abs}[name]
        return lambda t, x, s: fn(f0(t, x, s))
    raise TypeError(f"not an expression node: {node!r}")


def _print(node) -> str:
    # fully parenthesised binary operations; unambiguous and re-parseable
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_print(node.operand)})"
    if isinstance(node, BinOp):
        return f"({_print(node.left)} {node.op} {_print(node.right)})"
    return f"{node.func}({', '.join(_print(a) for a in node.args)})"


def _variables(node, acc: set):
    if isinstance(node, Var):
        acc.add(node.name)
    elif isinstance(node, Neg):
        _variables(node.operand, acc)
    elif isinstance(node, BinOp):
        _variables(node.left, acc)
        _variables(node.right, acc)
    elif isinstance(node, Call):
        for a in node.args:
            _variables(a, acc)
    return acc


class Expr:
    """A parsed scalar expression over ``t``, ``s`` and ``x1..xn``."""

    def __init__(self, source: str, n: int, root):
        self.source = source
        self.n = n
        self.root = root
        self.variables = frozenset(_variables(root, set()))
        self._fn = _compile(root)

    @property
    def uses_s(self) -> bool:
        return "s" in self.variables

    @property
    def uses_t(self) -> bool:
        return "t" in self.variables

    @property
    def is_constant(self) -> bool:
        return not self.variables

    def __call__(self, t: float, x: Sequence[float] = (), s: Optional[float] = None) -> float:
        return self.eval(t, x, s)

    def eval(self, t: float, x: Sequence[float] = (), s: Optional[float] = None) -> float:
        if len(x) != self.n:
            raise ValueError(f"expected state of length {self.n}, got {len(x)}")
        try:
            value = self._fn(t, x, s)
        except ExprError:
            raise
        except OverflowError:
            raise EvalError("overflow", *self.root.pos) from None
        value = float(value)
        if not math.isfinite(value):
            raise EvalError(f"non-finite result {value}", *self.root.pos)
        return value

    def grad(self, x: Sequence[float], h: float = 1e-6, t: float = 0.0,
             s: Optional[float] = None) -> np.ndarray:
        return grad(self, x, h=h, t=t, s=s)

    def __str__(self):
        return _print(self.root)

    def __repr__(self):
        return f"Expr({self.source!r}, n={self.n})"


def parse(source: str, n: int) -> Expr:
    """Parse ``source`` for a system of dimension ``n``."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 1, 1)
    return Expr(source, n, _Parser(source, n).parse())


def grad(expr: Expr, x: Sequence[float], h: float = 1e-6, t: float = 0.0,
         s: Optional[float] = None) -> np.ndarray:
    """Central-difference gradient of ``expr`` with respect to ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.size)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        try:
            out[i] = (expr.eval(t, xp, s) - expr.eval(t, xm, s)) / (2 * h)
        except EvalError as exc:
            raise EvalError(f"gradient probe failed near x={x.tolist()} "
                            f"(component {i + 1}): {exc}") from exc
    return out
