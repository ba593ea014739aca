"""A small expression language for coefficient functions of one variable.

Supports numbers, the variable ``x``, the imaginary unit ``i``, the binary
operators ``+ - * / ^`` (with ``^`` right-associative and binding tighter
than unary minus, so ``-x^2`` is ``-(x^2)`` and ``2^3^2`` is 512), and the
functions sin, cos, exp, log, sqrt, sinh, cosh, abs, and pow(a, b).
Everything is evaluated over the complex numbers with principal branches, so
``sqrt(x - 2)`` and ``log(x)`` are fine wherever the result is finite.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ExpressionError
from .mesh import Mesh, SampledFunction

_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "abs": np.abs,
}

_TOKEN = re.compile(r"""
    (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
  | (?P<space>\s+)
""", re.VERBOSE)


@dataclass(frozen=True)
class _Token:
    kind: str  # number | name | op | end
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ExpressionError(
                f"unexpected character {source[pos]!r} at offset {pos}",
                offset=pos)
        if m.lastgroup != "space":
            tokens.append(_Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


class _Parser:
    """Recursive descent over the token list.

    expr  := term (('+'|'-') term)*
    term  := unary (('*'|'/') unary)*
    unary := ('-'|'+') unary | power
    power := atom ('^' unary)?
    atom  := NUMBER | 'x' | 'i' | NAME '(' expr (',' expr)* ')' | '(' expr ')'
    """

    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, text: str) -> None:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            raise ExpressionError(
                f"expected {text!r} at offset {tok.offset}", offset=tok.offset)
        self.advance()

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError(
                f"unexpected {tok.text!r} at offset {tok.offset}",
                offset=tok.offset)
        return node

    def expr(self):
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = ("bin", op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text in "+-":
            self.advance()
            child = self.unary()
            return child if tok.text == "+" else ("neg", child)
        return self.power()

    def power(self):
        node = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            node = ("bin", "^", node, self.unary())
        return node

    def atom(self):
        tok = self.advance()
        if tok.kind == "number":
            return ("num", complex(float(tok.text)))
        if tok.kind == "name":
            if tok.text == "x":
                return ("var",)
            if tok.text == "i":
                return ("num", 1j)
            if tok.text == "pow":
                self.expect_op("(")
                base = self.expr()
                self.expect_op(",")
                exponent = self.expr()
                self.expect_op(")")
                return ("bin", "^", base, exponent)
            if tok.text in _FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return ("call", tok.text, arg)
            raise ExpressionError(
                f"unknown name {tok.text!r} at offset {tok.offset}",
                offset=tok.offset)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionError(
            f"expected a value at offset {tok.offset}", offset=tok.offset)


def _principal(v: np.ndarray) -> np.ndarray:
    """Lift values off the negative real axis from above.

    Arithmetic can leave a -0.0 imaginary part (e.g. negating a real), which
    would flip log/sqrt/power onto the wrong side of the branch cut; adding
    +0.0j turns -0.0 into +0.0 and changes nothing else.
    """
    return v + 0.0j


def _evaluate(node, x: np.ndarray) -> np.ndarray:
    kind = node[0]
    if kind == "num":
        return np.full_like(x, node[1])
    if kind == "var":
        return x
    if kind == "neg":
        return -_evaluate(node[1], x)
    if kind == "bin":
        _, op, left, right = node
        a = _evaluate(left, x)
        b = _evaluate(right, x)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return a / b
        return np.power(_principal(a), b)
    _, name, arg = node
    value = _evaluate(arg, x)
    if name in ("log", "sqrt"):
        value = _principal(value)
    return _FUNCTIONS[name](value)


@dataclass(frozen=True)
class Expression:
    """A parsed expression; call it with a scalar or an array of abscissae."""

    source: str
    root: tuple

    def __call__(self, x):
        arr = np.asarray(x, dtype=complex)
        with np.errstate(all="ignore"):
            out = _evaluate(self.root, np.atleast_1d(arr))
        if arr.ndim == 0:
            return complex(out[0])
        return out


def parse_expression(source: str) -> Expression:
    """Parse ``source``; raises ExpressionError with a byte offset on failure."""
    return Expression(source, _Parser(source).parse())


def evaluate_constant(source: str) -> complex:
    """Parse and evaluate an expression that must not depend on x."""
    expr = parse_expression(source)

    def uses_var(node) -> bool:
        if node[0] == "var":
            return True
        return any(uses_var(c) for c in node[1:] if isinstance(c, tuple))

    if uses_var(expr.root):
        raise ExpressionError(
            f"expression {source!r} must be constant but references x")
    value = expr(0.0)
    if not np.isfinite(value):
        raise ExpressionError(f"expression {source!r} is not finite")
    return value


def tabulate_expression(mesh: Mesh, source: str) -> SampledFunction:
    """Sample an expression on a mesh, rejecting non-finite values by node."""
    expr = parse_expression(source)
    values = expr(mesh.nodes)
    bad = ~np.isfinite(values)
    if np.any(bad):
        node = int(np.argmax(bad))
        raise ExpressionError(
            f"expression {source!r} is not finite at node {node} "
            f"(x = {mesh.nodes[node]:.6g})", node=node)
    return SampledFunction(mesh, values)
