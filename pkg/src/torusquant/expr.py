"""A small expression language with exact symbolic partial derivatives.

Grammar (shared by Hamiltonians, perturbations and classical systems)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('-' | '+') unary | power
    power := atom (('^' | '**') unary)?
    atom  := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names are free symbols (``I1``, ``phi2``, ``s1``, ``q1``, ``p1``, ``t`` ...);
the callable names are listed in :data:`FUNCTIONS`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import ParseError

FUNCTIONS = ("cos", "sin", "exp", "sqrt", "log")


class Expr:
    precedence = 100

    # operator sugar so trees can be built in Python as well as parsed
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return add(self, neg(_lift(other)))

    def __rsub__(self, other):
        return add(_lift(other), neg(self))

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return mul(self, power(_lift(other), Const(-1.0)))

    def __rtruediv__(self, other):
        return mul(_lift(other), power(self, Const(-1.0)))

    def __pow__(self, other):
        return power(self, _lift(other))

    def __neg__(self):
        return neg(self)

    def symbols(self) -> set[str]:
        out: set[str] = set()
        self._collect(out)
        return out

    def _collect(self, out):
        for c in self.children():
            c._collect(out)

    def children(self):
        return ()

    def evaluate(self, env):
        """Numeric value; ``env`` maps symbol names to floats or arrays."""
        raise NotImplementedError

    def diff(self, var: str) -> Expr:
        raise NotImplementedError

    def source(self) -> str:
        """Python source text using ``math``-style names and ``_v[...]`` lookups."""
        raise NotImplementedError

    def compile(self, args):
        """Compile to a function of positional arguments named by ``args``."""
        return compile_many([self], args, scalar=True)

    def _paren(self, child):
        text = str(child)
        return f"({text})" if child.precedence < self.precedence else text


def _lift(x):
    if isinstance(x, Expr):
        return x
    return Const(float(x))


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def evaluate(self, env):
        return self.value

    def diff(self, var):
        return ZERO

    def source(self):
        return repr(float(self.value))

    def __str__(self):
        v = self.value
        text = repr(int(v)) if float(v).is_integer() and abs(v) < 1e15 else repr(v)
        return text

    @property
    def precedence(self):
        return 100 if self.value >= 0 else 15


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def _collect(self, out):
        out.add(self.name)

    def evaluate(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise KeyError(f"no value bound for symbol {self.name!r}") from None

    def diff(self, var):
        return ONE if var == self.name else ZERO

    def source(self):
        return f"_v[{self.name!r}]"

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Add(Expr):
    terms: tuple
    precedence = 10

    def children(self):
        return self.terms

    def evaluate(self, env):
        return reduce(lambda a, b: a + b, (t.evaluate(env) for t in self.terms))

    def diff(self, var):
        return add(*(t.diff(var) for t in self.terms))

    def source(self):
        return "(" + " + ".join(t.source() for t in self.terms) + ")"

    def __str__(self):
        out = str(self.terms[0])
        for t in self.terms[1:]:
            text = self._paren(t)
            out += " - " + text[1:] if text.startswith("-") else " + " + text
        return out


@dataclass(frozen=True)
class Mul(Expr):
    factors: tuple
    precedence = 20

    def children(self):
        return self.factors

    def evaluate(self, env):
        return reduce(lambda a, b: a * b, (f.evaluate(env) for f in self.factors))

    def diff(self, var):
        terms = []
        for i, f in enumerate(self.factors):
            d = f.diff(var)
            if d == ZERO:
                continue
            terms.append(mul(*self.factors[:i], d, *self.factors[i + 1 :]))
        return add(*terms)

    def source(self):
        return "(" + " * ".join(f.source() for f in self.factors) + ")"

    def __str__(self):
        if self.factors[0] == Const(-1.0):
            rest = mul(*self.factors[1:])
            return "-" + (f"({rest})" if rest.precedence <= self.precedence else str(rest))
        return "*".join(self._paren(f) for f in self.factors)


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Expr
    precedence = 30

    def children(self):
        return (self.base, self.exponent)

    def evaluate(self, env):
        return self.base.evaluate(env) ** self.exponent.evaluate(env)

    def diff(self, var):
        db = self.base.diff(var)
        de = self.exponent.diff(var)
        out = []
        if db != ZERO:
            out.append(mul(self.exponent, power(self.base, add(self.exponent, Const(-1.0))), db))
        if de != ZERO:
            out.append(mul(self, Func("log", self.base), de))
        return add(*out)

    def source(self):
        return f"({self.base.source()} ** {self.exponent.source()})"

    def __str__(self):
        base = str(self.base)
        if self.base.precedence <= self.precedence:
            base = f"({base})"
        exp = str(self.exponent)
        if self.exponent.precedence < 100:
            exp = f"({exp})"
        return f"{base}^{exp}"


_NP = {"cos": np.cos, "sin": np.sin, "exp": np.exp, "sqrt": np.sqrt, "log": np.log}


@dataclass(frozen=True)
class Func(Expr):
    name: str
    arg: Expr

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ParseError(f"unknown function {self.name!r}")

    def children(self):
        return (self.arg,)

    def evaluate(self, env):
        x = self.arg.evaluate(env)
        if isinstance(x, (float, int)):
            return getattr(math, self.name)(x)
        return _NP[self.name](x)

    def diff(self, var):
        d = self.arg.diff(var)
        if d == ZERO:
            return ZERO
        a = self.arg
        outer = {
            "cos": lambda: neg(Func("sin", a)),
            "sin": lambda: Func("cos", a),
            "exp": lambda: self,
            "sqrt": lambda: mul(Const(0.5), power(self, Const(-1.0))),
            "log": lambda: power(a, Const(-1.0)),
        }[self.name]()
        return mul(outer, d)

    def source(self):
        return f"_m.{self.name}({self.arg.source()})"

    def __str__(self):
        return f"{self.name}({self.arg})"


ZERO = Const(0.0)
ONE = Const(1.0)


# smart constructors: flatten, fold constants, drop neutral elements
def add(*terms) -> Expr:
    flat = []
    const = 0.0
    for t in terms:
        parts = t.terms if isinstance(t, Add) else (t,)
        for p in parts:
            if isinstance(p, Const):
                const += p.value
            else:
                flat.append(p)
    if const != 0.0:
        flat.append(Const(const))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Add(tuple(flat))


def mul(*factors) -> Expr:
    flat = []
    const = 1.0
    for f in factors:
        parts = f.factors if isinstance(f, Mul) else (f,)
        for p in parts:
            if isinstance(p, Const):
                const *= p.value
            else:
                flat.append(p)
    if const == 0.0:
        return ZERO
    if const != 1.0:
        flat.insert(0, Const(const))
    if not flat:
        return ONE
    if len(flat) == 1:
        return flat[0]
    return Mul(tuple(flat))


def neg(x: Expr) -> Expr:
    return mul(Const(-1.0), x)


def power(base: Expr, exponent: Expr) -> Expr:
    if isinstance(exponent, Const):
        if exponent.value == 0.0:
            return ONE
        if exponent.value == 1.0:
            return base
        if isinstance(base, Const):
            try:
                return Const(float(base.value**exponent.value))
            except (ZeroDivisionError, OverflowError):
                pass
    if isinstance(base, Pow) and isinstance(base.exponent, Const) and isinstance(exponent, Const):
        if float(base.exponent.value).is_integer() and float(exponent.value).is_integer():
            return power(base.base, Const(base.exponent.value * exponent.value))
    return Pow(base, exponent)


def symbol(name: str) -> Var:
    return Var(name)


def compile_many(exprs, args, scalar=False):
    """Compile expressions into one function ``f(*args)`` returning a tuple.

    The generated code only references ``math`` and the argument names, so it
    never executes user text.
    """
    args = list(args)
    lines = ["def _f(" + ", ".join(f"_a{i}" for i in range(len(args))) + "):"]
    lines.append("    _v = {" + ", ".join(f"{a!r}: _a{i}" for i, a in enumerate(args)) + "}")
    body = ", ".join(e.source() for e in exprs)
    if scalar:
        lines.append(f"    return {exprs[0].source()}")
    else:
        lines.append(f"    return ({body}{',' if len(exprs) == 1 else ''})")
    missing = set().union(*(e.symbols() for e in exprs)) - set(args) if exprs else set()
    if missing:
        raise KeyError(f"expressions reference unbound symbols {sorted(missing)}")
    namespace = {"_m": math}
    exec("\n".join(lines), namespace)  # noqa: S102 - source generated from the tree above
    return namespace["_f"]


# ----------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^()·]))"
)


def _tokenize(text):
    pos = 0
    out = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r} at position {pos} in {text!r}")
        pos = m.end()
        if m.group("num"):
            out.append(("num", m.group("num")))
        elif m.group("name"):
            out.append(("name", m.group("name")))
        else:
            op = m.group("op")
            out.append(("op", {"·": "*", "**": "^"}.get(op, op)))
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            raise ParseError(f"expected {value or 'token'} in {self.text!r}")
        self.i += 1
        return tok

    def parse(self):
        if not self.tokens:
            raise ParseError("empty expression")
        e = self.expr()
        if self.i != len(self.tokens):
            raise ParseError(f"trailing input {self.tokens[self.i][1]!r} in {self.text!r}")
        return e

    def expr(self):
        e = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else add(e, neg(rhs))
        return e

    def term(self):
        e = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else mul(e, power(rhs, Const(-1.0)))
        return e

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return neg(self.unary())
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            return power(base, self.unary())
        return base

    def atom(self):
        kind, value = self.peek()
        if kind == "num":
            self.take()
            return Const(float(value))
        if kind == "name":
            self.take()
            if self.peek() == ("op", "("):
                if value not in FUNCTIONS:
                    raise ParseError(f"unknown function {value!r} in {self.text!r}")
                self.take("(")
                arg = self.expr()
                self.take(")")
                return Func(value, arg)
            if value in FUNCTIONS:
                raise ParseError(f"function {value!r} needs an argument")
            return Var(value)
        if (kind, value) == ("op", "("):
            self.take()
            e = self.expr()
            self.take(")")
            return e
        raise ParseError(f"unexpected {value!r} in {self.text!r}")


def parse(text: str) -> Expr:
    if not isinstance(text, str):
        raise ParseError(f"expression must be a string, got {type(text).__name__}")
    return _Parser(text).parse()
