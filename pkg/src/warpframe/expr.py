"""Closed-form scalar expressions with exact second-order forward-mode jets.

Expressions are parsed from a small infix grammar::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' exponent)?
    atom    := number | name | name '(' expr ')' | '(' expr ')'

``**`` is accepted as a synonym for ``^``. The exponent must be a numeric
literal (optionally signed or parenthesized). The only named constant is ``pi``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

FUNCTIONS = ("sin", "cos", "sinh", "cosh", "exp", "sqrt", "neg")
CONSTANTS = {"pi": math.pi}
MAX_VARIABLES = 2
DIV_GUARD = 1e-300


class ExprSyntaxError(ValueError):
    """Raised for malformed source text; ``offset`` is a byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class ExprEvalError(ArithmeticError):
    """Raised when evaluation would produce a non-finite value."""


# AST nodes


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Call:
    func: str
    arg: "ExprAst"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "ExprAst"
    right: "ExprAst"


@dataclass(frozen=True)
class Pow:
    base: "ExprAst"
    exponent: float


ExprAst = Union[Const, Var, Call, BinOp, Pow]


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(source: str):
    raw = source.encode("utf-8")
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if not m or m.end() == pos:
            stripped = len(source[pos:]) - len(source[pos:].lstrip())
            bad = pos + stripped
            raise ExprSyntaxError(f"unexpected character {source[bad]!r}", len(source[:bad].encode("utf-8")))
        kind = m.lastgroup
        text = m.group(kind)
        start = m.start(kind)
        tokens.append((kind, text, len(source[:start].encode("utf-8"))))
        pos = m.end()
    tokens.append(("end", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, source: str, variables: Sequence[str]):
        self.tokens = _tokenize(source)
        self.i = 0
        self.variables = tuple(variables)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, got, off = self.take()
        if got != text:
            raise ExprSyntaxError(f"expected {text!r}, found {got or 'end of input'!r}", off)

    def parse(self):
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", off)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Call("neg", self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            exponent = self.exponent()
            if self.peek()[1] in ("^", "**"):
                raise ExprSyntaxError("chained exponent, use parentheses", self.peek()[2])
            return Pow(base, exponent)
        return base

    def exponent(self):
        kind, text, off = self.peek()
        if text == "(":
            self.take()
            value = self.exponent()
            self.expect(")")
            return value
        sign = 1.0
        if text in ("-", "+"):
            self.take()
            sign = -1.0 if text == "-" else 1.0
            kind, text, off = self.peek()
        if kind != "num":
            raise ExprSyntaxError("pow exponent must be a literal constant", off)
        self.take()
        return sign * float(text)

    def atom(self):
        kind, text, off = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {text!r}", off)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in self.variables:
                return Var(text)
            if text in CONSTANTS:
                return Const(CONSTANTS[text])
            if text in FUNCTIONS:
                raise ExprSyntaxError(f"function {text!r} needs an argument", off)
            raise ExprSyntaxError(f"unknown identifier {text!r}", off)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected token {text or 'end of input'!r}", off)


def parse_expr(source: str, variables: Sequence[str]) -> ExprAst:
    """Parse ``source`` into an AST over the declared ``variables``."""
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    variables = list(variables)
    if len(variables) > MAX_VARIABLES:
        raise ValueError(f"at most {MAX_VARIABLES} variables are supported")
    for name in variables:
        if name in FUNCTIONS or name in CONSTANTS or not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", name):
            raise ValueError(f"invalid variable name {name!r}")
    return _Parser(source, variables).parse()


def variables_of(ast: ExprAst) -> set:
    if isinstance(ast, Var):
        return {ast.name}
    if isinstance(ast, Const):
        return set()
    if isinstance(ast, Call):
        return variables_of(ast.arg)
    if isinstance(ast, Pow):
        return variables_of(ast.base)
    return variables_of(ast.left) | variables_of(ast.right)


def _fmt(x: float) -> str:
    if x == math.pi:
        return "pi"
    return repr(float(x))


def to_source(ast: ExprAst) -> str:
    """Fully parenthesized source text that re-parses to an equivalent AST."""
    if isinstance(ast, Const):
        s = _fmt(ast.value)
        return f"({s})" if ast.value < 0 else s
    if isinstance(ast, Var):
        return ast.name
    if isinstance(ast, Call):
        if ast.func == "neg":
            return f"(-{to_source(ast.arg)})"
        return f"{ast.func}({to_source(ast.arg)})"
    if isinstance(ast, Pow):
        return f"({to_source(ast.base)}^({float(ast.exponent)!r}))"
    return f"({to_source(ast.left)} {ast.op} {to_source(ast.right)})"


# jets


def _check(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ExprEvalError("non-finite intermediate value")


class Jet2:
    """Value with first and second derivative along one variable.

    Fields may be floats or numpy arrays of a common shape, in which case all
    arithmetic is elementwise.
    """

    __slots__ = ("value", "d1", "d2")

    def __init__(self, value, d1=0.0, d2=0.0):
        self.value = value
        self.d1 = d1
        self.d2 = d2

    def __repr__(self):
        return f"Jet2({self.value!r}, {self.d1!r}, {self.d2!r})"

    def astuple(self):
        return (self.value, self.d1, self.d2)

    @staticmethod
    def lift(x):
        return x if isinstance(x, Jet2) else Jet2(x, 0.0, 0.0)

    def __add__(self, other):
        o = Jet2.lift(other)
        return Jet2(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2)

    __radd__ = __add__

    def __sub__(self, other):
        o = Jet2.lift(other)
        return Jet2(self.value - o.value, self.d1 - o.d1, self.d2 - o.d2)

    def __rsub__(self, other):
        return Jet2.lift(other) - self

    def __neg__(self):
        return Jet2(-self.value, -self.d1, -self.d2)

    def __mul__(self, other):
        o = Jet2.lift(other)
        return Jet2(
            self.value * o.value,
            self.d1 * o.value + self.value * o.d1,
            self.d2 * o.value + 2.0 * self.d1 * o.d1 + self.value * o.d2,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = Jet2.lift(other)
        if np.any(np.abs(o.value) < DIV_GUARD):
            raise ExprEvalError("division by a value below 1e-300 in magnitude")
        q = self.value / o.value
        q1 = (self.d1 - q * o.d1) / o.value
        q2 = (self.d2 - 2.0 * q1 * o.d1 - q * o.d2) / o.value
        return Jet2(q, q1, q2)

    def __rtruediv__(self, other):
        return Jet2.lift(other) / self

    def chain(self, f0, f1, f2):
        """Compose with a scalar function given its value and two derivatives here."""
        return Jet2(f0, f1 * self.d1, f2 * self.d1 * self.d1 + f1 * self.d2)

    def __pow__(self, p: float):
        p = float(p)
        x = self.value
        if p == 0.0:
            return Jet2(1.0 + 0.0 * x, 0.0 * x, 0.0 * x)
        if p == int(p) and p > 0:
            k = int(p)
            f0 = x**k
            f1 = k * x ** (k - 1)
            f2 = k * (k - 1) * x ** (k - 2) if k >= 2 else 0.0 * x
            return self.chain(f0, f1, f2)
        if p != int(p) and np.any(np.asarray(x) < 0):
            raise ExprEvalError("fractional power of a negative value")
        if np.any(np.abs(np.asarray(x)) < DIV_GUARD):
            raise ExprEvalError("power with singular derivative at zero")
        with np.errstate(all="ignore"):
            f0 = x**p
            f1 = p * x ** (p - 1)
            f2 = p * (p - 1) * x ** (p - 2)
        _check(f0, f1, f2)
        return self.chain(f0, f1, f2)


def jet_sqrt(x: Jet2) -> Jet2:
    if np.any(np.asarray(x.value) < 0):
        raise ExprEvalError("sqrt of a negative value")
    if np.any(np.asarray(x.value) < DIV_GUARD):
        raise ExprEvalError("sqrt at zero has an infinite derivative")
    r = np.sqrt(x.value)
    return x.chain(r, 0.5 / r, -0.25 / (r * x.value))


def jet_apply(func: str, x: Jet2) -> Jet2:
    v = x.value
    if func == "sin":
        s, c = np.sin(v), np.cos(v)
        return x.chain(s, c, -s)
    if func == "cos":
        s, c = np.sin(v), np.cos(v)
        return x.chain(c, -s, -c)
    if func == "sinh":
        s, c = np.sinh(v), np.cosh(v)
        return x.chain(s, c, s)
    if func == "cosh":
        s, c = np.sinh(v), np.cosh(v)
        return x.chain(c, s, c)
    if func == "exp":
        e = np.exp(v)
        return x.chain(e, e, e)
    if func == "sqrt":
        return jet_sqrt(x)
    if func == "neg":
        return -x
    raise ExprEvalError(f"unknown function {func!r}")


def _eval(ast: ExprAst, env: Mapping[str, Jet2]) -> Jet2:
    if isinstance(ast, Const):
        return Jet2(ast.value, 0.0, 0.0)
    if isinstance(ast, Var):
        return env[ast.name]
    if isinstance(ast, Call):
        return jet_apply(ast.func, _eval(ast.arg, env))
    if isinstance(ast, Pow):
        return _eval(ast.base, env) ** ast.exponent
    left = _eval(ast.left, env)
    right = _eval(ast.right, env)
    if ast.op == "+":
        return left + right
    if ast.op == "-":
        return left - right
    if ast.op == "*":
        return left * right
    return left / right


def eval_jet2(ast: ExprAst, at: Mapping[str, float], wrt: str | None = None) -> Jet2:
    """Evaluate ``ast`` at the assignment ``at`` with derivatives along ``wrt``.

    Values in ``at`` may be numpy arrays; the result is then elementwise.
    """
    missing = variables_of(ast) - set(at)
    if missing:
        raise KeyError(f"unassigned variables: {sorted(missing)}")
    if wrt is not None and wrt not in at:
        raise KeyError(f"derivative variable {wrt!r} is not assigned")
    env = {}
    for name, x in at.items():
        x = np.asarray(x, dtype=float) if isinstance(x, (list, tuple, np.ndarray)) else float(x)
        env[name] = Jet2(x, 1.0 if name == wrt else 0.0, 0.0)
    with np.errstate(all="ignore"):
        out = _eval(ast, env)
    shape = np.broadcast_shapes(*(np.shape(j.value) for j in env.values()))
    value, d1, d2 = (np.broadcast_to(np.asarray(x, dtype=float), shape).copy() for x in out.astuple())
    _check(value, d1, d2)
    if np.ndim(value) == 0:
        return Jet2(float(value), float(d1), float(d2))
    return Jet2(value, d1, d2)


def evaluate(ast: ExprAst, at: Mapping[str, float]):
    return eval_jet2(ast, at, None).value


@dataclass(frozen=True)
class ScalarField1D:
    """A function of one variable on a closed interval, e.g. a warping function."""

    ast: ExprAst
    domain: tuple
    variable: str = "t"
    source: str = ""

    @classmethod
    def from_source(cls, source: str, variable: str = "t", domain=(-math.inf, math.inf)):
        lo, hi = float(domain[0]), float(domain[1])
        if not lo <= hi:
            raise ValueError(f"empty domain [{lo}, {hi}]")
        return cls(parse_expr(source, [variable]), (lo, hi), variable, source)

    def jet(self, x) -> Jet2:
        """Value, first and second derivative at ``x`` (scalar or array)."""
        arr = np.asarray(x, dtype=float)
        lo, hi = self.domain
        if np.any(arr < lo) or np.any(arr > hi):
            raise ValueError(f"evaluation outside the domain [{lo}, {hi}]")
        return eval_jet2(self.ast, {self.variable: x}, self.variable)

    def __call__(self, x):
        return self.jet(x).value

    def check_positive(self, samples: int = 1001, lo=None, hi=None):
        """Raise unless the function is positive on a uniform sample of the domain."""
        lo = self.domain[0] if lo is None else lo
        hi = self.domain[1] if hi is None else hi
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("positivity check needs a bounded interval")
        xs = np.linspace(lo, hi, samples)
        vals = self(xs)
        if np.any(vals <= 0):
            bad = xs[np.argmax(vals <= 0)]
            raise ValueError(f"warping function is not positive at {self.variable}={bad:.6g}")
