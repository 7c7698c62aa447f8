"""Univariate coefficient expressions: parsing, evaluation, differentiation.

Grammar (EBNF), whitespace-insensitive::

    expr     = term , { ("+" | "-") , term } ;
    term     = unary , { ("*" | "/") , unary } ;
    unary    = ("-" | "+") , unary | power ;
    power    = atom , [ ("^" | "**") , exponent ] ;
    exponent = ("-" | "+") , exponent | power ;
    atom     = number | constant | variable | func , "(" , expr , ")"
             | "(" , expr , ")" ;
    number   = digits , [ "." , digits ] , [ ("e" | "E") , [ "+" | "-" ] , digits ] ;
    constant = "pi" | "e" ;
    func     = "sin" | "cos" | "tan" | "exp" | "ln" | "log" | "sqrt"
             | "tanh" | "atan" | "atanh" | "abs" | "sign" ;

``^`` binds tighter than unary minus (``-y^2`` is ``-(y^2)``) and is
right-associative. ``log`` is an alias of ``ln``. The single free variable is
named by the caller (``y`` for Lienard/Abel-in-y problems, ``x`` for the
classical Abel form).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, ExprSyntaxError, UnknownIdentifierError

Number = Union[float, np.ndarray]

FUNCTIONS = (
    "sin", "cos", "tan", "exp", "ln", "sqrt", "tanh", "atan", "atanh", "abs", "sign",
)
CONSTANTS = {"pi": math.pi, "e": math.e}


class Expr:
    """Immutable expression node. Arithmetic operators build new trees."""

    __slots__ = ()

    def __call__(self, point: Number) -> Number:
        return evaluate(self, point)

    def __add__(self, other):
        return Binary("+", self, _coerce(other))

    def __radd__(self, other):
        return Binary("+", _coerce(other), self)

    def __sub__(self, other):
        return Binary("-", self, _coerce(other))

    def __rsub__(self, other):
        return Binary("-", _coerce(other), self)

    def __mul__(self, other):
        return Binary("*", self, _coerce(other))

    def __rmul__(self, other):
        return Binary("*", _coerce(other), self)

    def __truediv__(self, other):
        return Binary("/", self, _coerce(other))

    def __rtruediv__(self, other):
        return Binary("/", _coerce(other), self)

    def __pow__(self, other):
        return Binary("^", self, _coerce(other))

    def __rpow__(self, other):
        return Binary("^", _coerce(other), self)

    def __neg__(self):
        return Unary("neg", self)

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, eq=True, repr=True)
class Var(Expr):
    name: str = "y"


@dataclass(frozen=True, eq=True, repr=True)
class Unary(Expr):
    op: str
    arg: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(float(value))


def apply(name: str, arg) -> Expr:
    """Build ``name(arg)`` for one of the supported functions."""
    if name == "log":
        name = "ln"
    if name not in FUNCTIONS:
        raise UnknownIdentifierError(f"unknown function {name!r}")
    return Unary(name, _coerce(arg))


# --------------------------------------------------------------------- parsing

_OPS = set("+-*/^()")


def _tokenize(text: str):
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c == "*" and i + 1 < n and text[i + 1] == "*":
            tokens.append(("op", "^", i))
            i += 2
            continue
        if c in _OPS:
            tokens.append(("op", c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
            tokens.append(("num", float(text[i:j]), i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("id", text[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(("end", None, n))
    return tokens


class _Parser:
    def __init__(self, text: str, variable: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.variable = variable

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, val, offset = self.take()
        if kind != "op" or val != value:
            raise ExprSyntaxError(f"expected {value!r}", offset)

    def parse(self) -> Expr:
        node = self.expr()
        kind, val, offset = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", offset)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                node = Binary(val, node, self.term())
            else:
                return node

    def term(self) -> Expr:
        node = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                node = Binary(val, node, self.unary())
            else:
                return node

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Unary("neg", self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            return Binary("^", base, self.exponent())
        return base

    def exponent(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Unary("neg", self.exponent())
        if kind == "op" and val == "+":
            self.take()
            return self.exponent()
        return self.power()

    def atom(self) -> Expr:
        kind, val, offset = self.take()
        if kind == "num":
            return Const(val)
        if kind == "id":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if val not in FUNCTIONS and val != "log":
                    raise UnknownIdentifierError(f"unknown function {val!r} at offset {offset}")
                self.take()
                arg = self.expr()
                self.expect(")")
                return apply(val, arg)
            if val == self.variable:
                return Var(val)
            if val in CONSTANTS:
                return Const(CONSTANTS[val])
            if val in FUNCTIONS or val == "log":
                raise ExprSyntaxError(f"function {val!r} needs a parenthesized argument", offset)
            raise UnknownIdentifierError(f"unknown identifier {val!r} at offset {offset}")
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", offset)
        raise ExprSyntaxError(f"unexpected token {val!r}", offset)


def parse(text: str, variable: str = "y") -> Expr:
    """Parse ``text`` into an expression tree in the free variable ``variable``.

    Raises ExprSyntaxError (carrying the byte offset) for malformed input and
    UnknownIdentifierError for names other than the variable, ``pi``, ``e`` and
    the supported functions.
    """
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text, variable).parse()


# ------------------------------------------------------------------ evaluation


def _check(result, what):
    if not np.all(np.isfinite(result)):
        raise DomainError(f"{what} produced a non-finite value")
    return result


def _is_integral(b) -> bool:
    return bool(np.all(np.asarray(b) == np.round(b)))


def _int_power(a, k: int):
    if k < 0:
        if np.any(np.asarray(a) == 0):
            raise DomainError("zero raised to a negative power")
        return 1.0 / _int_power(a, -k)
    result = np.ones_like(a) if isinstance(a, np.ndarray) else 1.0
    base = a
    while k:
        if k & 1:
            result = result * base
        base = base * base
        k >>= 1
    return result


def _power(a, b):
    if np.ndim(b) == 0 and float(b) == round(float(b)) and abs(b) < 2**31:
        return _int_power(a, int(round(float(b))))
    if _is_integral(b):
        # pointwise integer exponents with a varying exponent expression
        with np.errstate(all="ignore"):
            out = np.power(np.asarray(a, dtype=float), b)
        if np.any((np.asarray(a) == 0) & (np.asarray(b) < 0)):
            raise DomainError("zero raised to a negative power")
        return out
    a_arr = np.asarray(a)
    if np.any(a_arr < 0) or np.any((a_arr == 0) & (np.asarray(b) <= 0)):
        raise DomainError("non-integer power of a non-positive base")
    with np.errstate(all="ignore"):
        return np.power(a, b)


def _eval(node: Expr, point):
    if isinstance(node, Const):
        if isinstance(point, np.ndarray):
            return np.full(point.shape, node.value)
        return node.value
    if isinstance(node, Var):
        return point
    if isinstance(node, Unary):
        a = _eval(node.arg, point)
        op = node.op
        with np.errstate(all="ignore"):
            if op == "neg":
                return -a
            if op == "sin":
                return np.sin(a)
            if op == "cos":
                return np.cos(a)
            if op == "tan":
                return _check(np.tan(a), "tan")
            if op == "exp":
                return _check(np.exp(a), "exp")
            if op == "ln":
                if np.any(np.asarray(a) <= 0):
                    raise DomainError("ln of a non-positive value")
                return np.log(a)
            if op == "sqrt":
                if np.any(np.asarray(a) < 0):
                    raise DomainError("sqrt of a negative value")
                return np.sqrt(a)
            if op == "tanh":
                return np.tanh(a)
            if op == "atan":
                return np.arctan(a)
            if op == "atanh":
                if np.any(np.abs(a) >= 1):
                    raise DomainError("atanh outside (-1, 1)")
                return np.arctanh(a)
            if op == "abs":
                return np.abs(a)
            if op == "sign":
                if np.any(np.asarray(a) == 0):
                    raise DomainError("sign (derivative of abs) undefined at 0")
                return np.sign(a)
        raise ValueError(f"unknown unary op {op!r}")
    if isinstance(node, Binary):
        a = _eval(node.left, point)
        b = _eval(node.right, point)
        op = node.op
        with np.errstate(all="ignore"):
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op == "/":
                if np.any(np.asarray(b) == 0):
                    raise DomainError("division by zero")
                return a / b
            if op == "^":
                return _check(_power(a, b), "power")
        raise ValueError(f"unknown binary op {op!r}")
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(e: Expr, point: Number) -> Number:
    """Evaluate ``e`` at a scalar or an array of points.

    Raises DomainError instead of returning NaN or infinity.
    """
    scalar = np.ndim(point) == 0
    pt = float(point) if scalar else np.asarray(point, dtype=float)
    out = _eval(e, pt)
    out = _check(out, "evaluation")
    if scalar:
        return float(out)
    return np.asarray(out, dtype=float)


# ------------------------------------------------------------- differentiation


def differentiate(e: Expr) -> Expr:
    """Exact symbolic derivative with respect to the free variable."""
    return simplify(_diff(e))


def _diff(e: Expr) -> Expr:
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0)
    if isinstance(e, Unary):
        a = e.arg
        da = _diff(a)
        op = e.op
        if op == "neg":
            return -da
        if op == "sin":
            return Unary("cos", a) * da
        if op == "cos":
            return -(Unary("sin", a) * da)
        if op == "tan":
            return da / Unary("cos", a) ** 2
        if op == "exp":
            return e * da
        if op == "ln":
            return da / a
        if op == "sqrt":
            return da / (2 * e)
        if op == "tanh":
            return (1 - e**2) * da
        if op == "atan":
            return da / (1 + a**2)
        if op == "atanh":
            return da / (1 - a**2)
        if op == "abs":
            return Unary("sign", a) * da
        if op == "sign":
            return Const(0.0)
        raise ValueError(f"unknown unary op {op!r}")
    if isinstance(e, Binary):
        u, w = e.left, e.right
        du, dw = _diff(u), _diff(w)
        op = e.op
        if op == "+":
            return du + dw
        if op == "-":
            return du - dw
        if op == "*":
            return du * w + u * dw
        if op == "/":
            return (du * w - u * dw) / w**2
        if op == "^":
            w = simplify(w)
            if isinstance(w, Const):
                return w.value * u ** (w.value - 1) * du
            return e * (dw * Unary("ln", u) + w * du / u)
        raise ValueError(f"unknown binary op {op!r}")
    raise TypeError(f"not an expression node: {e!r}")


# ----------------------------------------------------------------- simplifying


def _is_const(e, value=None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def simplify(e: Expr) -> Expr:
    """Constant folding plus 0/1 identity removal, applied bottom-up."""
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Unary):
        a = simplify(e.arg)
        if e.op == "neg":
            if isinstance(a, Const):
                return Const(-a.value)
            if isinstance(a, Unary) and a.op == "neg":
                return a.arg
        if isinstance(a, Const):
            try:
                return Const(evaluate(Unary(e.op, a), 0.0))
            except DomainError:
                pass
        return Unary(e.op, a)
    if isinstance(e, Binary):
        u = simplify(e.left)
        w = simplify(e.right)
        op = e.op
        if isinstance(u, Const) and isinstance(w, Const):
            try:
                return Const(evaluate(Binary(op, u, w), 0.0))
            except DomainError:
                return Binary(op, u, w)
        if op == "+":
            if _is_const(u, 0.0):
                return w
            if _is_const(w, 0.0):
                return u
        elif op == "-":
            if _is_const(w, 0.0):
                return u
            if _is_const(u, 0.0):
                return simplify(Unary("neg", w))
        elif op == "*":
            if _is_const(u, 0.0) or _is_const(w, 0.0):
                return Const(0.0)
            if _is_const(u, 1.0):
                return w
            if _is_const(w, 1.0):
                return u
        elif op == "/":
            if _is_const(w, 1.0):
                return u
            if _is_const(u, 0.0):
                return Const(0.0)
        elif op == "^":
            if _is_const(w, 1.0):
                return u
            if _is_const(w, 0.0):
                return Const(1.0)
        return Binary(op, u, w)
    raise TypeError(f"not an expression node: {e!r}")


# -------------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _fmt_number(v: float) -> str:
    if v == math.pi:
        return "pi"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary) and e.op == "neg":
        return _PREC["neg"]
    if isinstance(e, Const) and (e.value < 0 or "e" in _fmt_number(e.value)):
        return _PREC["neg"]
    return 5


def to_string(e: Expr) -> str:
    """Render ``e`` in the parser's grammar; ``parse(to_string(e))`` evaluates identically."""
    if isinstance(e, Const):
        return _fmt_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            inner = to_string(e.arg)
            if _prec(e.arg) < _PREC["^"]:
                inner = f"({inner})"
            return f"-{inner}"
        return f"{e.op}({to_string(e.arg)})"
    if isinstance(e, Binary):
        p = _PREC[e.op]
        left = to_string(e.left)
        right = to_string(e.right)
        if e.op == "^":
            if _prec(e.left) <= p:
                left = f"({left})"
            if _prec(e.right) < p:
                right = f"({right})"
        else:
            if _prec(e.left) < p:
                left = f"({left})"
            # left-associative: equal precedence on the right needs parentheses
            if _prec(e.right) <= p:
                right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression node: {e!r}")
