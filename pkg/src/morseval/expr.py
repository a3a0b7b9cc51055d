"""Expression language: tokenizer, recursive-descent parser, printer,
evaluator and symbolic differentiation.

Grammar (unary minus binds looser than ``^``, so ``-x^2`` is ``-(x^2)``)::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | atom ("^" ["-"] integer)?
    atom   := number | ident | ident "(" expr ")" | "(" expr ")"

Constants are kept as exact :class:`fractions.Fraction` values so that printing
and re-parsing reproduces the same tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import jet as J
from .errors import ArityError, ParseError, UnknownIdentifierError

FUNCTION_NAMES = ("exp", "log", "sin", "cos", "sqrt")


# nodes -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exp: int


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object


ZERO = Num(Fraction(0))
ONE = Num(Fraction(1))


# tokenizer ---------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),−])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    offset: int  # byte offset


def tokenize(src: str):
    toks = []
    pos = 0
    byte = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", byte)
        text = m.group()
        if m.lastgroup != "ws":
            kind = m.lastgroup
            if kind == "op" and text == "−":
                text = "-"
            toks.append(_Tok(kind, text, byte))
        byte += len(m.group().encode("utf-8"))
        pos = m.end()
    toks.append(_Tok("end", "", byte))
    return toks


# parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, src, variables):
        self.toks = tokenize(src)
        self.i = 0
        self.vars = set(variables)

    @property
    def tok(self):
        return self.toks[self.i]

    def eat(self, text=None, kind=None):
        t = self.tok
        if (text is not None and t.text != text) or (kind is not None and t.kind != kind):
            want = text if text is not None else kind
            got = t.text or "end of input"
            raise ParseError(f"expected {want!r}, found {got!r}", t.offset)
        self.i += 1
        return t

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            raise ParseError(f"unexpected {self.tok.text!r}", self.tok.offset)
        return node

    def expr(self):
        node = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.eat().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.tok.text in ("*", "/"):
            op = self.eat().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        if self.tok.text == "-":
            self.eat()
            return Neg(self.factor())
        node = self.atom()
        if self.tok.text == "^":
            self.eat()
            sign = 1
            if self.tok.text == "-":
                self.eat()
                sign = -1
            t = self.tok
            if t.kind != "num" or not t.text.isdigit():
                raise ParseError("exponent must be an integer", t.offset)
            self.eat()
            node = Pow(node, sign * int(t.text))
        return node

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.eat()
            return Num(Fraction(t.text))
        if t.kind == "ident":
            self.eat()
            if self.tok.text == "(":
                if t.text not in FUNCTION_NAMES:
                    raise UnknownIdentifierError(f"unknown function {t.text!r}", t.offset)
                self.eat("(")
                arg = self.expr()
                if self.tok.text == ",":
                    raise ArityError(f"{t.text} takes exactly one argument", self.tok.offset)
                self.eat(")")
                return Call(t.text, arg)
            if t.text not in self.vars:
                if t.text in FUNCTION_NAMES:
                    raise ArityError(f"{t.text} needs an argument", t.offset)
                raise UnknownIdentifierError(f"unknown identifier {t.text!r}", t.offset)
            return Var(t.text)
        if t.text == "(":
            self.eat()
            node = self.expr()
            self.eat(")")
            return node
        got = t.text or "end of input"
        raise ParseError(f"unexpected {got!r}", t.offset)


def parse_ast(src: str, variables=()):
    if not src or not src.strip():
        raise ParseError("empty expression", 0)
    return _Parser(src, variables).parse()


# printer -----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node):
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Pow):
        return 4
    if isinstance(node, Num) and node.value < 0:
        return 3
    return 5


def format_fraction(q: Fraction) -> str:
    """Exact decimal text for ``q`` when it has one, else ``p/q`` in parentheses."""
    if q.denominator == 1:
        return str(q.numerator)
    den = q.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"({q.numerator}/{q.denominator})"
    k = max(twos, fives)
    scaled = abs(q.numerator) * 10 ** k // q.denominator
    digits = str(scaled).rjust(k + 1, "0")
    sign = "-" if q < 0 else ""
    return f"{sign}{digits[:-k]}.{digits[-k:]}"


def to_source(node) -> str:
    if isinstance(node, Num):
        return format_fraction(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({to_source(node.arg)})"
    if isinstance(node, Neg):
        inner = to_source(node.arg)
        if _prec(node.arg) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Pow):
        base = to_source(node.base)
        if not isinstance(node.base, (Var, Call)) and not (
                isinstance(node.base, Num) and node.base.value >= 0 and node.base.value.denominator == 1):
            base = f"({base})"
        return f"{base}^{node.exp}"
    p = _PREC[node.op]
    left, right = to_source(node.left), to_source(node.right)
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left}{node.op}{right}"


def variables_of(node, acc=None):
    acc = set() if acc is None else acc
    if isinstance(node, Var):
        acc.add(node.name)
    elif isinstance(node, (Neg, Call)):
        variables_of(node.arg, acc)
    elif isinstance(node, Pow):
        variables_of(node.base, acc)
    elif isinstance(node, BinOp):
        variables_of(node.left, acc)
        variables_of(node.right, acc)
    return acc


# evaluation --------------------------------------------------------------

def evaluate(node, env):
    """Evaluate ``node`` with ``env`` mapping names to jets or arrays."""
    if isinstance(node, Num):
        return float(node.value)
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.arg, env)
    if isinstance(node, Pow):
        return J.power(evaluate(node.base, env), node.exp)
    if isinstance(node, Call):
        return J.FUNCTIONS[node.fn](evaluate(node.arg, env))
    a = evaluate(node.left, env)
    b = evaluate(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if isinstance(b, J.Jet):
        return a * J.reciprocal(b)
    if np.any(np.asarray(b) == 0):
        raise J.DomainError("division by zero")
    return a / b


# symbolic differentiation -------------------------------------------------

def _is(node, q):
    return isinstance(node, Num) and node.value == q


def add(a, b):
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def sub(a, b):
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return BinOp("-", a, b)


def neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a, b):
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def div(a, b):
    if _is(a, 0):
        return ZERO
    if _is(b, 1):
        return a
    return BinOp("/", a, b)


def pow_(a, k):
    if k == 0:
        return ONE
    if k == 1:
        return a
    if isinstance(a, Num) and (k > 0 or a.value != 0):
        return Num(a.value ** k)
    return Pow(a, k)


def diff(node, var):
    """Symbolic partial derivative with light constant folding."""
    if isinstance(node, Num):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.name == var else ZERO
    if isinstance(node, Neg):
        return neg(diff(node.arg, var))
    if isinstance(node, BinOp):
        u, v = node.left, node.right
        du, dv = diff(u, var), diff(v, var)
        if node.op == "+":
            return add(du, dv)
        if node.op == "-":
            return sub(du, dv)
        if node.op == "*":
            return add(mul(du, v), mul(u, dv))
        return div(sub(mul(du, v), mul(u, dv)), pow_(v, 2))
    if isinstance(node, Pow):
        du = diff(node.base, var)
        k = node.exp
        return mul(mul(Num(Fraction(k)), pow_(node.base, k - 1)), du)
    u = node.arg
    du = diff(u, var)
    if _is(du, 0):
        return ZERO
    if node.fn == "exp":
        return mul(node, du)
    if node.fn == "log":
        return div(du, u)
    if node.fn == "sin":
        return mul(Call("cos", u), du)
    if node.fn == "cos":
        return neg(mul(Call("sin", u), du))
    return div(du, mul(Num(Fraction(2)), node))
