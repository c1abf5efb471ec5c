"""Expression mini-language for t-dependent coefficients.

Grammar (whitespace insignificant)::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := unary ("^" factor)?
    unary  := "-" factor | base
    base   := number | ident | ident "(" expr ")" | "(" expr ")"

Unary minus binds looser than ``^`` so ``-t^2`` is ``-(t^2)``. A minus sign
directly in front of a numeric literal that is not raised to a power is
folded into a negative constant, which keeps printing and re-parsing exact.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

__all__ = [
    "Expr", "Const", "Var", "Unary", "Binary",
    "ExprSyntaxError", "UnknownIdentifier", "DomainError",
    "FUNCTIONS", "parse", "as_expr", "evaluate", "diff_t", "to_source",
    "free_vars", "lambdify", "const_value",
]

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh",
             "tanh", "abs")


class ExprSyntaxError(ValueError):
    """Malformed source text; ``offset`` is the byte offset of the problem."""

    def __init__(self, msg, offset):
        super().__init__(f"{msg} at offset {offset}")
        self.offset = offset


class UnknownIdentifier(ExprSyntaxError):
    pass


class DomainError(ArithmeticError):
    """Evaluation left the real domain; ``node`` is the failing subtree."""

    def __init__(self, msg, node):
        loc = node.pos if node is not None else None
        where = f" (source offset {loc})" if loc is not None else ""
        super().__init__(f"{msg} in {to_source(node)}{where}")
        self.node = node
        self.offset = loc


class Expr:
    """Base class of immutable expression nodes."""

    __slots__ = ()

    def __add__(self, other):
        return Binary("+", self, as_expr(other))

    def __radd__(self, other):
        return Binary("+", as_expr(other), self)

    def __sub__(self, other):
        return Binary("-", self, as_expr(other))

    def __rsub__(self, other):
        return Binary("-", as_expr(other), self)

    def __mul__(self, other):
        return Binary("*", self, as_expr(other))

    def __rmul__(self, other):
        return Binary("*", as_expr(other), self)

    def __truediv__(self, other):
        return Binary("/", self, as_expr(other))

    def __rtruediv__(self, other):
        return Binary("/", as_expr(other), self)

    def __pow__(self, other):
        return Binary("^", self, as_expr(other))

    def __neg__(self):
        return Unary("neg", self)

    def __call__(self, **bindings):
        return evaluate(self, bindings)

    def __str__(self):
        return to_source(self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float
    pos: int | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str
    pos: int | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=True)
class Unary(Expr):
    op: str
    arg: Expr
    pos: int | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr
    pos: int | None = field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------- lexer

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def _tokenize(src):
    out = []
    i = 0
    while i < len(src):
        m = _TOKEN.match(src, i)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[i]!r}", i)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), i))
        i = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src, variables):
        self.toks = _tokenize(src)
        self.i = 0
        self.variables = variables

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.take()
        if tok[1] != text:
            raise ExprSyntaxError(f"expected {text!r}, found {tok[1] or 'end'!r}",
                                  tok[2])
        return tok

    def parse(self):
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(f"unexpected token {tok[1]!r}", tok[2])
        return e

    def expr(self):
        left = self.term()
        while self.peek()[1] in ("+", "-"):
            op, pos = self.take()[1:]
            left = Binary(op, left, self.term(), pos)
        return left

    def term(self):
        left = self.factor()
        while self.peek()[1] in ("*", "/"):
            op, pos = self.take()[1:]
            left = Binary(op, left, self.factor(), pos)
        return left

    def factor(self):
        base = self.unary()
        if self.peek()[1] == "^":
            pos = self.take()[2]
            return Binary("^", base, self.factor(), pos)
        return base

    def unary(self):
        tok = self.peek()
        if tok[1] == "-":
            self.take()
            nxt, after = self.peek(), self.peek(1)
            if nxt[0] == "num" and after[1] != "^":
                self.take()
                return Const(-float(nxt[1]), tok[2])
            return Unary("neg", self.factor(), tok[2])
        return self.base()

    def base(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text), pos)
        if kind == "ident":
            if text in FUNCTIONS:
                if self.peek()[1] != "(":
                    raise ExprSyntaxError(f"function {text!r} needs an argument",
                                          pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg, pos)
            if self.peek()[1] == "(":
                raise UnknownIdentifier(f"unknown function {text!r}", pos)
            if self.variables is not None and text not in self.variables:
                raise UnknownIdentifier(f"unknown identifier {text!r}", pos)
            return Var(text, pos)
        if text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ExprSyntaxError(f"unexpected token {text or 'end'!r}", pos)


def parse(source: str, variables: Iterable[str] | None = None) -> Expr:
    """Parse ``source``; if ``variables`` is given, other names are rejected."""
    if not isinstance(source, str):
        raise TypeError("source must be a string")
    try:
        source.encode("ascii")
    except UnicodeEncodeError as exc:
        raise ExprSyntaxError("non-ASCII input", exc.start) from None
    allowed = None if variables is None else frozenset(variables)
    return _Parser(source, allowed).parse()


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        return parse(x)
    if isinstance(x, (int, float, Fraction)):
        return Const(float(x))
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


# -------------------------------------------------------------- printing

def _num(v):
    if not math.isfinite(v):
        raise ValueError("non-finite constant cannot be printed")
    s = repr(float(v))
    return f"({s})" if v < 0 or s.startswith("-") else s


def to_source(e: Expr) -> str:
    """Fully parenthesized text that parses back to the identical tree."""
    if isinstance(e, Const):
        return _num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-({to_source(e.arg)}))"
        return f"{e.op}({to_source(e.arg)})"
    if isinstance(e, Binary):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    raise TypeError(type(e))


def free_vars(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Unary):
        return free_vars(e.arg)
    return free_vars(e.left) | free_vars(e.right)


# ------------------------------------------------------------ evaluation

def _pow(a, b, node):
    if a < 0 and b != int(b):
        raise DomainError("negative base with non-integer exponent", node)
    if a == 0 and b < 0:
        raise DomainError("division by zero", node)
    try:
        return math.pow(a, b)
    except OverflowError:
        raise DomainError("overflow", node) from None


def _unary(op, a, node):
    try:
        if op == "neg":
            return -a
        if op == "log":
            if a <= 0:
                raise DomainError("log of non-positive value", node)
            return math.log(a)
        if op == "sqrt":
            if a < 0:
                raise DomainError("sqrt of negative value", node)
            return math.sqrt(a)
        if op == "abs":
            return abs(a)
        return getattr(math, op)(a)
    except OverflowError:
        raise DomainError("overflow", node) from None


def evaluate(e: Expr, bindings: Mapping[str, float] | None = None, **kw) -> float:
    """Recursive IEEE double evaluation with domain checks."""
    env = dict(bindings or {})
    env.update(kw)
    return _eval(e, env)


def _eval(e, env):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return float(env[e.name])
        except KeyError:
            raise KeyError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Unary):
        return _unary(e.op, _eval(e.arg, env), e)
    a = _eval(e.left, env)
    b = _eval(e.right, env)
    op = e.op
    if op == "+":
        r = a + b
    elif op == "-":
        r = a - b
    elif op == "*":
        r = a * b
    elif op == "/":
        if b == 0:
            raise DomainError("division by zero", e)
        r = a / b
    else:
        r = _pow(a, b, e)
    if not math.isfinite(r):
        raise DomainError("overflow", e)
    return r


# ------------------------------------------------------ compact compiler

_PY_FUN = {"sin": "_m.sin", "cos": "_m.cos", "tan": "_m.tan", "exp": "_m.exp",
           "log": "_m.log", "sqrt": "_m.sqrt", "sinh": "_m.sinh",
           "cosh": "_m.cosh", "tanh": "_m.tanh", "abs": "abs"}


def _py(e, names):
    if isinstance(e, Const):
        return f"({e.value!r})"
    if isinstance(e, Var):
        return names[e.name]
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{_py(e.arg, names)})"
        return f"{_PY_FUN[e.op]}({_py(e.arg, names)})"
    op = "**" if e.op == "^" else e.op
    return f"({_py(e.left, names)} {op} {_py(e.right, names)})"


def lambdify(e, args: Iterable[str]) -> Callable[..., float]:
    """Compile to a plain Python function of positional ``args``.

    Faster than :func:`evaluate` but raises the bare ``math`` errors.
    """
    e = as_expr(e)
    args = list(args)
    missing = free_vars(e) - set(args)
    if missing:
        raise KeyError(f"unbound variables {sorted(missing)}")
    names = {a: f"_a{i}" for i, a in enumerate(args)}
    src = f"lambda {', '.join(names[a] for a in args)}: {_py(e, names)}"
    return eval(src, {"_m": math})


# ------------------------------------------------------- differentiation

def const_value(e: Expr):
    """Value of a literal-only subtree, else ``None``."""
    if free_vars(e):
        return None
    try:
        return _eval(e, {})
    except (DomainError, ValueError):
        return None


def _is(e, v):
    return isinstance(e, Const) and e.value == v


def _fold(e):
    if isinstance(e, (Unary, Binary)) and not free_vars(e):
        v = const_value(e)
        if v is not None:
            return Const(v)
    return e


def _add(a, b):
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return _fold(Binary("+", a, b))


def _sub(a, b):
    if _is(b, 0):
        return a
    if _is(a, 0):
        return _neg(b)
    return _fold(Binary("-", a, b))


def _mul(a, b):
    if _is(a, 0) or _is(b, 0):
        return Const(0.0)
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    return _fold(Binary("*", a, b))


def _div(a, b):
    if _is(a, 0):
        return Const(0.0)
    if _is(b, 1):
        return a
    return _fold(Binary("/", a, b))


def _neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    return Unary("neg", a)


def diff_t(e, var: str = "t") -> Expr:
    """Exact symbolic derivative with literal folding and 0/1 elimination."""
    e = as_expr(e)
    return _d(e, var)


def _d(e, x):
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if e.name == x else 0.0)
    if x not in free_vars(e):
        return Const(0.0)
    if isinstance(e, Unary):
        a = e.arg
        da = _d(a, x)
        op = e.op
        if op == "neg":
            return _neg(da)
        if op == "sin":
            outer = Unary("cos", a)
        elif op == "cos":
            outer = _neg(Unary("sin", a))
        elif op == "tan":
            outer = _div(Const(1.0), _pow_c(Unary("cos", a), 2.0))
        elif op == "exp":
            outer = e
        elif op == "log":
            return _div(da, a)
        elif op == "sqrt":
            return _div(da, _mul(Const(2.0), e))
        elif op == "sinh":
            outer = Unary("cosh", a)
        elif op == "cosh":
            outer = Unary("sinh", a)
        elif op == "tanh":
            outer = _sub(Const(1.0), _pow_c(e, 2.0))
        elif op == "abs":
            outer = _div(a, e)
        else:
            raise ValueError(op)
        return _mul(outer, da)
    a, b = e.left, e.right
    op = e.op
    if op == "+":
        return _add(_d(a, x), _d(b, x))
    if op == "-":
        return _sub(_d(a, x), _d(b, x))
    if op == "*":
        return _add(_mul(_d(a, x), b), _mul(a, _d(b, x)))
    if op == "/":
        num = _sub(_mul(_d(a, x), b), _mul(a, _d(b, x)))
        return _div(num, _pow_c(b, 2.0))
    # power
    if x not in free_vars(b):
        n = b
        nm1 = _fold(Binary("-", n, Const(1.0)))
        return _mul(_mul(n, _pow_c(a, nm1)), _d(a, x))
    # a^b = exp(b log a)
    inner = _add(_mul(_d(b, x), Unary("log", a)),
                 _div(_mul(b, _d(a, x)), a))
    return _mul(e, inner)


def _pow_c(a, n):
    n = n if isinstance(n, Expr) else Const(float(n))
    if _is(n, 1):
        return a
    if _is(n, 0):
        return Const(1.0)
    return _fold(Binary("^", a, n))
