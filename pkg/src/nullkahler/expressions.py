"""Expression trees with exact symbolic differentiation.

The closed-form field backend stores functions as small expression trees
over named variables.  Differentiation is closed (the derivative of a tree
is a tree), so fourth-order derivatives of quotients stay exact.
Simplification is deliberately limited to constant folding and zero/one
elimination; no general rewriting is attempted.

Grammar accepted by :func:`parse`::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | power
    power  := atom ("^" unary)?          # right associative
    atom   := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

NAME is a declared variable/parameter or one of ``sin cos exp log``.
Exponents must fold to a numeric constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "log")


class ExpressionError(ValueError):
    """Malformed expression text or an unsupported construction."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (offset {offset})"
        super().__init__(message)


class EvaluationError(ArithmeticError):
    """Non-finite value produced during evaluation (division by zero,
    log of a non-positive number, fractional power of a negative base)."""


class Expr:
    """Base node.  Subclasses are immutable and hashable."""

    __slots__ = ()

    def diff(self, var: str) -> "Expr":
        raise NotImplementedError

    def evaluate(self, env: dict):
        raise NotImplementedError

    def variables(self) -> frozenset:
        raise NotImplementedError

    def substitute(self, name: str, replacement: "Expr") -> "Expr":
        raise NotImplementedError

    # Operator sugar used when building residuals in code.
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __neg__(self):
        return neg(self)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float

    def diff(self, var):
        return ZERO

    def evaluate(self, env):
        return self.value

    def variables(self):
        return frozenset()

    def substitute(self, name, replacement):
        return self

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str

    def diff(self, var):
        return ONE if var == self.name else ZERO

    def evaluate(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise EvaluationError(f"unbound variable {self.name!r}") from None

    def variables(self):
        return frozenset((self.name,))

    def substitute(self, name, replacement):
        return replacement if name == self.name else self

    def __str__(self):
        return self.name


@dataclass(frozen=True, slots=True)
class Add(Expr):
    left: Expr
    right: Expr

    def diff(self, var):
        return add(self.left.diff(var), self.right.diff(var))

    def evaluate(self, env):
        return self.left.evaluate(env) + self.right.evaluate(env)

    def variables(self):
        return self.left.variables() | self.right.variables()

    def substitute(self, name, replacement):
        return add(self.left.substitute(name, replacement),
                   self.right.substitute(name, replacement))

    def __str__(self):
        return f"({self.left} + {self.right})"


@dataclass(frozen=True, slots=True)
class Mul(Expr):
    left: Expr
    right: Expr

    def diff(self, var):
        return add(mul(self.left.diff(var), self.right),
                   mul(self.left, self.right.diff(var)))

    def evaluate(self, env):
        return self.left.evaluate(env) * self.right.evaluate(env)

    def variables(self):
        return self.left.variables() | self.right.variables()

    def substitute(self, name, replacement):
        return mul(self.left.substitute(name, replacement),
                   self.right.substitute(name, replacement))

    def __str__(self):
        return f"({self.left} * {self.right})"


@dataclass(frozen=True, slots=True)
class Div(Expr):
    num: Expr
    den: Expr

    def diff(self, var):
        return div(add(mul(self.num.diff(var), self.den),
                       neg(mul(self.num, self.den.diff(var)))),
                   mul(self.den, self.den))

    def evaluate(self, env):
        den = self.den.evaluate(env)
        if np.any(den == 0.0):
            raise EvaluationError("division by zero")
        return self.num.evaluate(env) / den

    def variables(self):
        return self.num.variables() | self.den.variables()

    def substitute(self, name, replacement):
        return div(self.num.substitute(name, replacement),
                   self.den.substitute(name, replacement))

    def __str__(self):
        return f"({self.num} / {self.den})"


@dataclass(frozen=True, slots=True)
class Pow(Expr):
    base: Expr
    exponent: float  # numeric; integer or real

    def diff(self, var):
        n = self.exponent
        if n == 0:
            return ZERO
        return mul(mul(Const(float(n)), power(self.base, n - 1)),
                   self.base.diff(var))

    def evaluate(self, env):
        base = self.base.evaluate(env)
        n = self.exponent
        if n == int(n):
            k = int(n)
            if k < 0 and np.any(base == 0.0):
                raise EvaluationError("zero raised to a negative power")
            return base ** k
        if np.any(base < 0.0):
            raise EvaluationError("fractional power of a negative base")
        return base ** n

    def variables(self):
        return self.base.variables()

    def substitute(self, name, replacement):
        return power(self.base.substitute(name, replacement), self.exponent)

    def __str__(self):
        return f"({self.base} ^ {self.exponent!r})"


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr

    def diff(self, var):
        return neg(self.arg.diff(var))

    def evaluate(self, env):
        return -self.arg.evaluate(env)

    def variables(self):
        return self.arg.variables()

    def substitute(self, name, replacement):
        return neg(self.arg.substitute(name, replacement))

    def __str__(self):
        return f"(-{self.arg})"


_DERIVATIVES = {
    "sin": lambda u: Call("cos", u),
    "cos": lambda u: neg(Call("sin", u)),
    "exp": lambda u: Call("exp", u),
    "log": lambda u: div(ONE, u),
}

_NUMPY_FN = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log}


@dataclass(frozen=True, slots=True)
class Call(Expr):
    fn: str
    arg: Expr

    def diff(self, var):
        return mul(_DERIVATIVES[self.fn](self.arg), self.arg.diff(var))

    def evaluate(self, env):
        x = self.arg.evaluate(env)
        if self.fn == "log" and np.any(x <= 0.0):
            raise EvaluationError("log of a non-positive number")
        value = _NUMPY_FN[self.fn](x)
        if not np.all(np.isfinite(value)):
            raise EvaluationError(f"non-finite result from {self.fn}")
        return value

    def variables(self):
        return self.arg.variables()

    def substitute(self, name, replacement):
        return Call(self.fn, self.arg.substitute(name, replacement))

    def __str__(self):
        return f"{self.fn}({self.arg})"


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(float(value))


def _is_const(e, value=None):
    return isinstance(e, Const) and (value is None or e.value == value)


# Smart constructors: constant folding plus zero/one elimination only.

def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        raise ExpressionError("division by constant zero")
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value / b.value)
    return Div(a, b)


def neg(a: Expr) -> Expr:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(base: Expr, exponent) -> Expr:
    if isinstance(exponent, Expr):
        if not isinstance(exponent, Const):
            raise ExpressionError("exponent must fold to a constant")
        exponent = exponent.value
    exponent = float(exponent)
    if exponent == 0.0:
        return ONE
    if exponent == 1.0:
        return base
    if _is_const(base):
        return Const(base.value ** exponent)
    return Pow(base, exponent)


# --- parser -----------------------------------------------------------------

_TOKEN_CHARS = set("+-*/^()")


def _tokenize(text):
    tokens = []  # (kind, value, offset)
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _TOKEN_CHARS:
            tokens.append(("op", c, i))
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                while k < n and text[k].isdigit():
                    k += 1
                j = k
            try:
                value = float(text[i:j])
            except ValueError:
                raise ExpressionError(f"bad number {text[i:j]!r}", i) from None
            tokens.append(("num", value, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        raise ExpressionError(f"unexpected character {c!r}", i)
    tokens.append(("end", None, n))
    return tokens


class _Parser:
    def __init__(self, text, names):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.names = frozenset(names)

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, value, offset = self.peek()
        if kind != "op" or value != op:
            raise ExpressionError(f"expected {op!r}", offset)
        return self.advance()

    def parse(self):
        e = self.expr()
        kind, _, offset = self.peek()
        if kind != "end":
            raise ExpressionError("trailing input", offset)
        return e

    def expr(self):
        e = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                rhs = self.term()
                e = add(e, rhs) if value == "+" else add(e, neg(rhs))
            else:
                return e

    def term(self):
        e = self.unary()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                rhs = self.unary()
                e = mul(e, rhs) if value == "*" else div(e, rhs)
            else:
                return e

    def unary(self):
        kind, value, _ = self.peek()
        if kind == "op" and value in "+-":
            self.advance()
            e = self.unary()
            return e if value == "+" else neg(e)
        return self.power()

    def power(self):
        base = self.atom()
        kind, value, offset = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            exponent = self.unary()
            if not isinstance(exponent, Const):
                raise ExpressionError("exponent must fold to a constant", offset)
            return power(base, exponent.value)
        return base

    def atom(self):
        kind, value, offset = self.advance()
        if kind == "num":
            return Const(value)
        if kind == "name":
            nk, nv, _ = self.peek()
            if nk == "op" and nv == "(":
                if value not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {value!r}", offset)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Call(value, arg)
            if value not in self.names:
                raise ExpressionError(f"unknown identifier {value!r}", offset)
            return Var(value)
        if kind == "op" and value == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ExpressionError("expected expression", offset)


def parse(text: str, names) -> Expr:
    """Parse ``text`` over the declared variable ``names``.

    Raises :class:`ExpressionError` with the character offset on syntax
    errors and on identifiers outside ``names``.
    """
    return _Parser(text, names).parse()


# --- polynomial helpers (antiderivatives for the closed-form families) ------

def to_monomials(expr: Expr, variables) -> dict:
    """Expand a polynomial tree into {exponent tuple: coefficient}.

    Raises :class:`ExpressionError` for non-polynomial input (quotients
    with variable denominators, function calls, non-integer powers).
    """
    variables = tuple(variables)
    index = {name: k for k, name in enumerate(variables)}
    zero_key = (0,) * len(variables)

    def combine(a, b, scale=1.0):
        out = dict(a)
        for key, coeff in b.items():
            out[key] = out.get(key, 0.0) + scale * coeff
        return out

    def walk(node):
        if isinstance(node, Const):
            return {zero_key: node.value}
        if isinstance(node, Var):
            if node.name not in index:
                raise ExpressionError(f"variable {node.name!r} not declared")
            key = list(zero_key)
            key[index[node.name]] = 1
            return {tuple(key): 1.0}
        if isinstance(node, Add):
            return combine(walk(node.left), walk(node.right))
        if isinstance(node, Neg):
            return combine({}, walk(node.arg), scale=-1.0)
        if isinstance(node, Mul):
            left, right = walk(node.left), walk(node.right)
            out = {}
            for ka, ca in left.items():
                for kb, cb in right.items():
                    key = tuple(x + y for x, y in zip(ka, kb))
                    out[key] = out.get(key, 0.0) + ca * cb
            return out
        if isinstance(node, Pow):
            if node.exponent != int(node.exponent) or node.exponent < 0:
                raise ExpressionError("non-polynomial power")
            out = {zero_key: 1.0}
            base = walk(node.base)
            for _ in range(int(node.exponent)):
                nxt = {}
                for ka, ca in out.items():
                    for kb, cb in base.items():
                        key = tuple(x + y for x, y in zip(ka, kb))
                        nxt[key] = nxt.get(key, 0.0) + ca * cb
                out = nxt
            return out
        if isinstance(node, Div):
            den = node.den
            if not isinstance(den, Const):
                raise ExpressionError("non-polynomial quotient")
            return combine({}, walk(node.num), scale=1.0 / den.value)
        raise ExpressionError(f"non-polynomial node {type(node).__name__}")

    return walk(expr)


def from_monomials(monomials: dict, variables) -> Expr:
    variables = tuple(variables)
    result = ZERO
    for key in sorted(monomials):
        coeff = monomials[key]
        if coeff == 0.0:
            continue
        term = Const(coeff)
        for name, exponent in zip(variables, key):
            if exponent:
                term = mul(term, power(Var(name), exponent))
        result = add(result, term)
    return result


def integrate_polynomial(expr: Expr, var: str) -> Expr:
    """Antiderivative in ``var`` of a polynomial tree, constant of
    integration zero.  Polynomial input is a precondition."""
    variables = sorted(expr.variables() | {var})
    monomials = to_monomials(expr, variables)
    k = variables.index(var)
    out = {}
    for key, coeff in monomials.items():
        lifted = list(key)
        lifted[k] += 1
        out[tuple(lifted)] = coeff / lifted[k]
    return from_monomials(out, variables)
