"""Plain-text formula grammar and a log-domain evaluator.

Grammar (EBNF)::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = ("-" | "+") , unary | power ;
    power   = atom , [ ("^" | "**") , unary ] ;
    atom    = number | constant | variable
            | func , "(" , expr , { "," , expr } , ")"
            | "(" , expr , ")" ;
    func    = "exp" | "log" | "sinh" | "cosh" | "tanh" | "sqrt" | "pow" ;
    constant = "pi" | "e" ;
    number  = digit , { digit } , [ "." , { digit } ] , [ ("e" | "E") , [ "+" | "-" ] , digit , { digit } ] ;

Exponentiation is right associative and binds tighter than unary minus,
so ``-r^3`` is ``-(r^3)``.

Every node evaluates to the tuple ``(sign, log|f|, f'/f, f''/f)`` so that
quantities such as ``exp(-r^3)`` at ``r = 1e3`` never leave floating point.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = ("exp", "log", "sinh", "cosh", "tanh", "sqrt", "pow")
CONSTANTS = {"pi": math.pi, "e": math.e}
_LOG2 = math.log(2.0)


class ParseError(ValueError):
    """Raised for malformed formulas; carries the offending token and column."""

    def __init__(self, message: str, token: str = "", position: int = -1):
        self.token = token
        self.position = position
        where = f" at column {position + 1}" if position >= 0 else ""
        super().__init__(f"{message}: {token!r}{where}" if token else f"{message}{where}")


# ---------------------------------------------------------------------------
# log-domain arithmetic on (sign, logabs, d1, d2) tuples

def _lsum(a, b):
    sa, la, da, d2a = a
    sb, lb, db, d2b = b
    m = np.maximum(la, lb)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        A = sa * np.exp(la - m)
        B = sb * np.exp(lb - m)
        S = A + B
        logabs = m + np.log(np.abs(S))
        d1 = (A * da + B * db) / S
        d2 = (A * d2a + B * d2b) / S
    return np.sign(S), logabs, d1, d2


def _lmul(a, b):
    sa, la, da, d2a = a
    sb, lb, db, d2b = b
    return sa * sb, la + lb, da + db, d2a + 2.0 * da * db + d2b


def _ldiv(a, b):
    sa, la, da, d2a = a
    sb, lb, db, d2b = b
    return sa * sb, la - lb, da - db, d2a - 2.0 * da * db + 2.0 * db * db - d2b


def _value_and_derivs(a):
    """Plain value v of a node with v' and v''."""
    sa, la, da, d2a = a
    with np.errstate(over="ignore", invalid="ignore"):
        v = sa * np.exp(la)
        return v, v * da, v * d2a


class Expr:
    """Base node. ``evaluate`` works on numpy arrays."""

    def log_eval(self, x):
        raise NotImplementedError

    def evaluate(self, x):
        s, l, _, _ = self.log_eval(np.asarray(x, dtype=float))
        with np.errstate(over="ignore"):
            return s * np.exp(l)

    def derivative(self, x):
        s, l, d1, _ = self.log_eval(np.asarray(x, dtype=float))
        with np.errstate(over="ignore", invalid="ignore"):
            out = s * np.exp(l) * d1
        zero = s == 0
        if np.any(zero):
            # log form carries no slope at a zero of the expression
            x = np.asarray(x, dtype=float)
            h = 1e-6 * np.maximum(1.0, np.abs(x))
            fd = (self.evaluate(x + h) - self.evaluate(x - h)) / (2.0 * h)
            out = np.where(zero, fd, out)
        return out

    def __call__(self, x):
        return self.evaluate(x)


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def log_eval(self, x):
        x = np.asarray(x, dtype=float)
        z = np.zeros_like(x)
        with np.errstate(divide="ignore"):
            return (z + np.sign(self.value), z + math.log(abs(self.value)) if self.value else z - np.inf, z, z)

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expr):
    name: str = "r"

    def log_eval(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.sign(x), np.log(np.abs(x)), 1.0 / x, np.zeros_like(x)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def log_eval(self, x):
        s, l, d1, d2 = self.arg.log_eval(x)
        return -s, l, d1, d2

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class Reflect(Expr):
    """``arg(-x)``; used for the negative end of a warped line."""

    arg: Expr

    def log_eval(self, x):
        s, l, d1, d2 = self.arg.log_eval(-np.asarray(x, dtype=float))
        return s, l, -d1, d2

    def __str__(self):
        return f"reflect({self.arg})"


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def log_eval(self, x):
        a = self.left.log_eval(x)
        if self.op == "^":
            return _power(a, self.right, x)
        b = self.right.log_eval(x)
        if self.op == "+":
            return _lsum(a, b)
        if self.op == "-":
            sb, lb, db, d2b = b
            return _lsum(a, (-sb, lb, db, d2b))
        if self.op == "*":
            return _lmul(a, b)
        if self.op == "/":
            return _ldiv(a, b)
        raise ValueError(self.op)

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


def _const_exponent(node: Expr):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Neg) and isinstance(node.arg, Const):
        return -node.arg.value
    return None


def _power(a, exponent: Expr, x):
    p = _const_exponent(exponent)
    sa, la, da, d2a = a
    if p is None:
        # a^b = exp(b log a)
        return Func("exp", (BinOp("*", exponent, Func("log", (_Frozen(a),))),)).log_eval(x)
    if float(p).is_integer():
        sign = np.where(sa < 0, (-1.0) ** int(p), sa)
        if p == 0:
            sign = np.ones_like(sa)
    else:
        sign = np.where(sa < 0, np.nan, sa)
    with np.errstate(invalid="ignore"):
        logabs = np.where(sa == 0, -np.inf * np.sign(p) if p else 0.0, p * la)
    return sign, logabs, p * da, p * (p - 1.0) * da * da + p * d2a


@dataclass(frozen=True)
class _Frozen(Expr):
    """Wraps an already evaluated tuple so it can be reused as a node."""

    parts: tuple

    def log_eval(self, x):
        return self.parts

    def __hash__(self):
        return id(self)


@dataclass(frozen=True)
class Func(Expr):
    name: str
    args: tuple

    def log_eval(self, x):
        if self.name == "pow":
            return BinOp("^", self.args[0], self.args[1]).log_eval(x)
        if self.name == "sqrt":
            return _power(self.args[0].log_eval(x), Const(0.5), x)
        a = self.args[0].log_eval(x)
        if self.name == "exp":
            v, v1, v2 = _value_and_derivs(a)
            return np.ones_like(v), v, v1, v2 + v1 * v1
        if self.name == "log":
            sa, la, da, d2a = a
            with np.errstate(divide="ignore", invalid="ignore"):
                la = np.where(sa > 0, la, np.nan)
                return np.sign(la), np.log(np.abs(la)), da / la, (d2a - da * da) / la
        v, v1, v2 = _value_and_derivs(a)
        av = np.abs(v)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.name == "sinh":
                small = av < 1.0
                logabs = np.where(small, np.log(np.abs(np.sinh(np.where(small, v, 0.0)))),
                                  av + np.log1p(-np.exp(-2.0 * av)) - _LOG2)
                coth = 1.0 / np.tanh(v)
                return np.sign(v), logabs, coth * v1, v1 * v1 + coth * v2
            if self.name == "cosh":
                logabs = av + np.log1p(np.exp(-2.0 * av)) - _LOG2
                th = np.tanh(v)
                return np.ones_like(v), logabs, th * v1, v1 * v1 + th * v2
            if self.name == "tanh":
                th = np.tanh(v)
                sech2 = 1.0 - th * th
                return np.sign(v), np.log(np.abs(th)), sech2 * v1 / th, (sech2 * v2 - 2.0 * th * sech2 * v1 * v1) / th
        raise ValueError(self.name)

    def __str__(self):
        return f"{self.name}({', '.join(str(a) for a in self.args)})"


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^(),]))"
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def tokenize(text: str) -> list[_Tok]:
    out = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError("unexpected character", text[pos], pos)
        kind = m.lastgroup
        start = m.start(kind)
        tok = m.group(kind)
        out.append(_Tok(kind, "^" if tok == "**" else tok, start))
        pos = m.end()
    out.append(_Tok("end", "", n))
    return out


class _Parser:
    def __init__(self, text: str, variables: tuple[str, ...]):
        self.toks = tokenize(text)
        self.i = 0
        self.variables = variables

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def take(self, text=None, kind=None) -> _Tok:
        tok = self.cur
        if (text is not None and tok.text != text) or (kind is not None and tok.kind != kind):
            want = text or kind
            raise ParseError(f"expected {want!r}, found", tok.text or "<end>", tok.pos)
        self.i += 1
        return tok

    def parse(self) -> Expr:
        node = self.expr()
        if self.cur.kind != "end":
            raise ParseError("unexpected token", self.cur.text, self.cur.pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.cur.text in ("+", "-") and self.cur.kind == "op":
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.cur.text in ("*", "/") and self.cur.kind == "op":
            op = self.take().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.cur.kind == "op" and self.cur.text in ("-", "+"):
            op = self.take().text
            arg = self.unary()
            return Neg(arg) if op == "-" else arg
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.cur.kind == "op" and self.cur.text == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.cur
        if tok.kind == "num":
            self.take()
            return Const(float(tok.text))
        if tok.kind == "name":
            self.take()
            if tok.text in FUNCTIONS:
                self.take("(")
                args = [self.expr()]
                while self.cur.text == ",":
                    self.take(",")
                    args.append(self.expr())
                self.take(")")
                arity = 2 if tok.text == "pow" else 1
                if len(args) != arity:
                    raise ParseError(f"{tok.text} takes {arity} argument(s)", tok.text, tok.pos)
                return Func(tok.text, tuple(args))
            if tok.text in CONSTANTS:
                return Const(CONSTANTS[tok.text])
            if tok.text in self.variables:
                return Var(tok.text)
            raise ParseError("unknown name", tok.text, tok.pos)
        if tok.kind == "op" and tok.text == "(":
            self.take("(")
            node = self.expr()
            self.take(")")
            return node
        raise ParseError("unexpected token", tok.text or "<end>", tok.pos)


def parse(text: str, variable: str = "r") -> Expr:
    """Parse ``text`` into an expression tree in the single variable ``variable``."""
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty formula")
    return _Parser(text, (variable,)).parse()
