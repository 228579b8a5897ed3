"""Minimal arithmetic expression grammar for problem-file fields.

Grammar (EBNF):

    expr   := term { ("+" | "-") term }
    term   := factor { ("*" | "/") factor }
    factor := ["+" | "-"] power
    power  := atom ["^" factor]
    atom   := NUMBER | VAR | FUNC "(" expr ")" | "(" expr ")"
    VAR    := "x1" | "x2" | "x3"
    FUNC   := "sin" | "cos" | "exp" | "abs"

"^" is right-associative and binds tighter than unary minus.  Parse errors
carry the 0-based character position of the offending token.
"""

from __future__ import annotations

import operator
import re

import numpy as np

__all__ = ["ExpressionError", "compile_expression"]

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}
_VARS = ("x1", "x2", "x3")

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


class ExpressionError(ValueError):
    """Malformed expression; ``position`` is the character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            at = len(text) - len(stripped)
            if not stripped:
                break
            raise ExpressionError(f"unexpected character {stripped[0]!r}", at)
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num")), m.start("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _combine(op, a, b):
    return lambda env: op(a(env), b(env))


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables: set[str] = set()

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ExpressionError(f"expected {op!r}", pos)
        self.advance()

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected trailing input {val!r}", pos)
        return node

    def _binary_chain(self, sub, ops):
        node = sub()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ops:
                self.advance()
                node = _combine(ops[val], node, sub())
            else:
                return node

    def expr(self):
        return self._binary_chain(self.term, {"+": operator.add, "-": operator.sub})

    def term(self):
        return self._binary_chain(self.factor, {"*": operator.mul, "/": operator.truediv})

    def factor(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.advance()
            inner = self.factor()
            if val == "-":
                return lambda env: -inner(env)
            return inner
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            expo = self.factor()
            return lambda env: base(env) ** expo(env)
        return base

    def atom(self):
        kind, val, pos = self.advance()
        if kind == "num":
            const = float(val)
            return lambda env: const
        if kind == "name":
            if val in _FUNCS:
                fn = _FUNCS[val]
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return lambda env: fn(arg(env))
            if val in _VARS:
                self.variables.add(val)
                name = val
                return lambda env: env[name]
            raise ExpressionError(f"unknown name {val!r}", pos)
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ExpressionError(f"unexpected token {val!r}" if val else "unexpected end of input", pos)


def compile_expression(text: str):
    """Compile to (evaluator, used variable names).

    The evaluator maps a dict {"x1": array, ...} to the elementwise value.
    """
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression", 0)
    parser = _Parser(text)
    fn = parser.parse()
    return fn, sorted(parser.variables)
