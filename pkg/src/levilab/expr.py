"""Parser for user-supplied defining functions.

Grammar (``^`` binds tighter than unary minus on its left and is right-associative)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('+' | '-') unary | power
    power := atom ('^' unary)?
    atom  := NUMBER | 'pi' | 'e' | 'z'INDEX | NAME '(' expr ')' | '(' expr ')'

Functions: ``conj``, ``re``/``real``, ``im``/``imag``, ``abs2`` (|w|^2), ``exp``.
The expression is evaluated on complex jets; the field is its real part.
Exponents must be constant.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .fields import ScalarField, complex_coordinate_jets
from .jets import Jet


class ParseError(ValueError):
    def __init__(self, message: str, column: int):
        super().__init__(f"{message} at column {column}")
        self.column = column


_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[-+*/^(),]))")
_FUNCS = ("conj", "re", "real", "im", "imag", "abs2", "exp")
_CONSTS = {"pi": math.pi, "e": math.e}


@dataclass
class _Tok:
    kind: str  # num, name, op, end
    text: str
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[col - 1]!r}", col)
        col = m.start(m.lastindex) + 1
        if m.group(1):
            toks.append(_Tok("num", m.group(1), col))
        elif m.group(2):
            toks.append(_Tok("name", m.group(2), col))
        else:
            toks.append(_Tok("op", "^" if m.group(3) == "**" else m.group(3), col))
        pos = m.end()
    toks.append(_Tok("end", "", len(text) + 1))
    return toks


# AST nodes are tuples: ("num", v), ("z", j), ("neg", a), ("bin", op, a, b), ("pow", a, p), ("call", f, a)


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0
        self.max_z = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.peek()
        if t.text != text or t.kind not in ("op",):
            what = "end of input" if t.kind == "end" else repr(t.text)
            raise ParseError(f"expected {text!r}, found {what}", t.col)
        return self.take()

    def parse(self):
        node = self.expr()
        t = self.peek()
        if t.kind != "end":
            raise ParseError(f"unexpected {t.text!r}", t.col)
        return node

    def expr(self):
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            node = ("bin", op, node, self.unary())
        return node

    def unary(self):
        t = self.peek()
        if t.kind == "op" and t.text in "+-":
            self.take()
            inner = self.unary()
            return ("neg", inner) if t.text == "-" else inner
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            t = self.take()
            exp_node = self.unary()
            val = _const_value(exp_node)
            if val is None:
                raise ParseError("unsupported primitive: non-constant exponent", t.col)
            return ("pow", base, val)
        return base

    def atom(self):
        t = self.take()
        if t.kind == "num":
            return ("num", float(t.text))
        if t.kind == "op" and t.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if t.kind == "name":
            m = re.fullmatch(r"z([1-9]\d*)", t.text)
            if m:
                j = int(m.group(1))
                self.max_z = max(self.max_z, j)
                return ("z", j - 1)
            if t.text in _CONSTS:
                return ("num", _CONSTS[t.text])
            if t.text in _FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return ("call", t.text, arg)
            raise ParseError(f"unsupported primitive {t.text!r}", t.col)
        what = "end of input" if t.kind == "end" else repr(t.text)
        raise ParseError(f"unexpected {what}", t.col)


def _const_value(node):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "neg":
        v = _const_value(node[1])
        return None if v is None else -v
    if kind == "bin":
        a, b = _const_value(node[2]), _const_value(node[3])
        if a is None or b is None:
            return None
        return {"+": a + b, "-": a - b, "*": a * b, "/": a / b if b != 0 else math.inf}[node[1]]
    if kind == "pow":
        a = _const_value(node[1])
        return None if a is None else a ** node[2]
    return None


def _eval(node, Z: list[Jet], nvar: int, K: int, npts: int):
    kind = node[0]
    if kind == "num":
        return Jet.constant(node[1], nvar, K, npts)
    if kind == "z":
        return Z[node[1]]
    if kind == "neg":
        return -_eval(node[1], Z, nvar, K, npts)
    if kind == "bin":
        a = _eval(node[2], Z, nvar, K, npts)
        b = _eval(node[3], Z, nvar, K, npts)
        return {"+": a.__add__, "-": a.__sub__, "*": a.__mul__, "/": a.__truediv__}[node[1]](b)
    if kind == "pow":
        a = _eval(node[1], Z, nvar, K, npts)
        p = node[2]
        if float(p).is_integer() and p >= 0:
            return a ** int(p)
        return a.compose(_complex_power_derivs(a.value, p, K))
    if kind == "call":
        a = _eval(node[2], Z, nvar, K, npts)
        f = node[1]
        if f == "conj":
            return a.conj()
        if f in ("re", "real"):
            return a.real
        if f in ("im", "imag"):
            return a.imag
        if f == "abs2":
            return (a * a.conj()).real
        if f == "exp":
            return a.exp()
    raise ValueError(f"bad node {node!r}")


def _complex_power_derivs(u0, p, order):
    u0 = np.asarray(u0, dtype=complex)
    out, coef = [], 1.0
    for k in range(order + 1):
        out.append(coef * u0 ** (p - k))
        coef *= p - k
    return np.stack(out)


def parse_field_expression(text: str, n: int | None = None) -> ScalarField:
    """Compile ``text`` into a ScalarField on C^n (n defaults to the largest z index used)."""
    parser = _Parser(text)
    ast = parser.parse()
    dim = n if n is not None else max(parser.max_z, 1)
    if parser.max_z > dim:
        raise ParseError(f"z{parser.max_z} exceeds dimension n={dim}", 1)
    nvar = 2 * dim

    def jetfn(X, K):
        Z = complex_coordinate_jets(X, dim, K)
        J = _eval(ast, Z, nvar, K, X.shape[0])
        return J.real

    return ScalarField(nvar, jetfn, text.strip())
