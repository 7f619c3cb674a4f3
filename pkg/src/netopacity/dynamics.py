"""Expression language for deterministic mode dynamics.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := number | var | '-' factor | '(' expr ')' | func '(' args ')'
    args   := expr (',' expr)*

Variables are ``x1..xn`` (state) and ``w1..wm`` (internal input); functions
are ``abs``, ``min`` and ``max``. Literals are kept as exact rationals so that
evaluation on rational grid points is exact.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Sequence

FUNCTIONS = {"abs": (1, 1), "min": (2, None), "max": (2, None)}


class DynamicsSyntaxError(ValueError):
    def __init__(self, message: str, text: str, pos: int):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.column = col


@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Var:
    kind: str  # "x" or "w"
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*(),]))"
)


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise DynamicsSyntaxError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, state_dim: int | None, input_dim: int | None):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.dims = {"x": state_dim, "w": input_dim}

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise DynamicsSyntaxError(msg, self.text, tok[2])

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] != "op":
            self.fail(f"expected {value!r}, found {tok[1] or 'end of input'!r}")
        return self.advance()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.advance()
            node = BinOp("*", node, self.factor())
        return node

    def factor(self):
        tok = self.peek()
        kind, val, _ = tok
        if kind == "num":
            self.advance()
            return Num(Fraction(val))
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.factor())
        if kind == "op" and val == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            self.advance()
            if val in FUNCTIONS:
                return self.call(val, tok)
            m = re.fullmatch(r"([xw])([1-9]\d*)", val)
            if not m:
                self.fail(f"unknown variable or function {val!r}", tok)
            var = Var(m.group(1), int(m.group(2)))
            limit = self.dims[var.kind]
            if limit is not None and var.index > limit:
                self.fail(f"unknown variable {val!r} (dimension is {limit})", tok)
            return var
        self.fail(f"unexpected {val or 'end of input'!r}", tok)

    def call(self, name, tok):
        self.expect("(")
        args = [self.expr()]
        while self.peek()[0] == "op" and self.peek()[1] == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        lo, hi = FUNCTIONS[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            self.fail(f"wrong number of arguments to {name}", tok)
        return Call(name, tuple(args))


def parse_dynamics(text: str, state_dim: int | None = None, input_dim: int | None = None):
    """Parse an expression; variable indices are checked when dimensions are given."""
    return _Parser(text, state_dim, input_dim).parse()


def eval_dynamics(expr, x: Sequence, w: Sequence = ()):
    """Evaluate ``expr``; exact when every entry of x and w is rational."""
    exact = all(isinstance(v, Rational) for v in (*x, *w))
    return _eval(expr, x, w, exact)


def _eval(node, x, w, exact):
    if isinstance(node, Num):
        return node.value if exact else float(node.value)
    if isinstance(node, Var):
        return (x if node.kind == "x" else w)[node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.operand, x, w, exact)
    if isinstance(node, BinOp):
        a = _eval(node.left, x, w, exact)
        b = _eval(node.right, x, w, exact)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        return a * b
    if isinstance(node, Call):
        args = [_eval(a, x, w, exact) for a in node.args]
        if node.func == "abs":
            return abs(args[0])
        return min(args) if node.func == "min" else max(args)
    raise TypeError(f"not an expression node: {node!r}")


def to_text(node) -> str:
    """Fully parenthesized rendering; ``parse_dynamics(to_text(e)) == e``."""
    if isinstance(node, Num):
        return _decimal_text(node.value)
    if isinstance(node, Var):
        return f"{node.kind}{node.index}"
    if isinstance(node, Neg):
        return f"-{to_text(node.operand)}"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_text(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


def _decimal_text(v: Fraction) -> str:
    # parsed literals are finite decimals, so some power of ten clears the denominator
    k = 0
    while (v * 10 ** k).denominator != 1:
        k += 1
        if k > 1000:
            raise ValueError(f"{v} has no finite decimal expansion")
    digits = str((v * 10 ** k).numerator).rjust(k + 1, "0")
    return digits if k == 0 else f"{digits[:-k]}.{digits[-k:]}"


def variables(node) -> set:
    if isinstance(node, Var):
        return {(node.kind, node.index)}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return variables(node.operand)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    return set().union(*(variables(a) for a in node.args))
