"""Expression parsing and evaluation for plant dynamics and Lyapunov candidates.

Grammar (precedence ``^`` > unary ``-`` > ``* /`` > ``+ -``)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | power
    power  := atom ('^' integer)*        # right-associative
    atom   := number | ident | func '(' expr ')' | '(' expr ')'
    ident  := 'x'digits | 'u'digits
    func   := sin | cos | exp | sqrt | abs | tanh

One AST is evaluated by interchangeable backends: floats, batches of points,
batches of interval boxes (natural inclusion function) and dual numbers.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from doakit import dual as _dual
from doakit import ivarray
from doakit.errors import ConfigError, DomainError, ParseError
from doakit.interval import Interval, IvBox

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs", "tanh")

# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: float
    # enclosure of the literal as written; wider than a point when the
    # decimal text is not exactly representable
    lo: float = field(default=None, compare=False)
    hi: float = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        if self.lo is None:
            object.__setattr__(self, "lo", self.value)
        if self.hi is None:
            object.__setattr__(self, "hi", self.value)

    def __str__(self):
        return repr(self.value) if self.value >= 0 else f"({self.value!r})"


@dataclass(frozen=True)
class Var:
    kind: str  # "x" or "u"
    index: int  # 1-based

    def __str__(self):
        return f"{self.kind}{self.index}"


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a function name
    child: "Node"

    def __str__(self):
        if self.op == "neg":
            return f"(-{self.child})"
        return f"{self.op}({self.child})"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Pow:
    child: "Node"
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ValueError("exponent must be a nonnegative integer")

    def __str__(self):
        return f"{self.child}^{self.k}"


Node = Union[Const, Var, Unary, Binary, Pow]


def variables(node: Node) -> set:
    """All ``(kind, index)`` pairs referenced by ``node``."""
    if isinstance(node, Var):
        return {(node.kind, node.index)}
    if isinstance(node, Const):
        return set()
    if isinstance(node, (Unary, Pow)):
        return variables(node.child)
    return variables(node.left) | variables(node.right)


def substitute(node: Node, mapping: dict) -> Node:
    """Replace variables by sub-expressions; ``mapping`` is keyed by ``(kind, index)``."""
    if isinstance(node, Var):
        return mapping.get((node.kind, node.index), node)
    if isinstance(node, Const):
        return node
    if isinstance(node, Unary):
        return Unary(node.op, substitute(node.child, mapping))
    if isinstance(node, Pow):
        return Pow(substitute(node.child, mapping), node.k)
    return Binary(node.op, substitute(node.left, mapping), substitute(node.right, mapping))


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    text = text.replace("−", "-")
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _literal(text: str) -> Const:
    value = float(text)
    exact = Fraction(text)
    if Fraction(value) == exact:
        return Const(value)
    if Fraction(value) > exact:
        return Const(value, math.nextafter(value, -math.inf), value)
    return Const(value, value, math.nextafter(value, math.inf))


class _Parser:
    def __init__(self, text: str, n: int, m: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.n = n
        self.m = m

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.factor())
        return node

    def factor(self) -> Node:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Unary("neg", self.factor())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        exps = []
        while self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            kind, val, pos = self.take()
            if kind != "num" or not val.isdigit():
                shown = "end of input" if kind == "end" else repr(val)
                raise ParseError(f"exponent must be a nonnegative integer literal, found {shown}", pos)
            exps.append(int(val))
        if not exps:
            return base
        k = exps[-1]
        for e in reversed(exps[:-1]):
            k = e**k
        return Pow(base, k)

    def atom(self) -> Node:
        kind, val, pos = self.take()
        if kind == "num":
            return _literal(val)
        if kind == "ident":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(val, arg)
            m = re.fullmatch(r"([xu])(\d+)", val)
            if m:
                idx = int(m.group(2))
                limit = self.n if m.group(1) == "x" else self.m
                if 1 <= idx <= limit:
                    return Var(m.group(1), idx)
            raise ParseError(f"unknown identifier {val!r}", pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {found}", pos)


def parse(text: str, n: int, m: int = 0) -> Node:
    """Parse ``text`` over state variables ``x1..xn`` and controls ``u1..um``."""
    return _Parser(text, n, m).parse()


# ---------------------------------------------------------------------------
# evaluation


def _walk(node: Node, backend, memo=None):
    # shared subtrees (e.g. f substituted several times into L) are evaluated once
    if memo is None:
        memo = {}
    key = id(node)
    if key in memo:
        return memo[key]
    if isinstance(node, Const):
        out = backend.const(node)
    elif isinstance(node, Var):
        out = backend.var(node)
    elif isinstance(node, Unary):
        out = backend.unary(node.op, _walk(node.child, backend, memo))
    elif isinstance(node, Pow):
        out = backend.pow(_walk(node.child, backend, memo), node.k)
    else:
        out = backend.binary(
            node.op, _walk(node.left, backend, memo), _walk(node.right, backend, memo)
        )
    memo[key] = out
    return out


class _Scalar:
    _funcs = {
        "sin": math.sin,
        "cos": math.cos,
        "exp": math.exp,
        "sqrt": math.sqrt,
        "abs": abs,
        "tanh": math.tanh,
    }

    def __init__(self, x, u):
        self.x, self.u = x, u

    def const(self, node):
        return node.value

    def var(self, node):
        return (self.x if node.kind == "x" else self.u)[node.index - 1]

    def unary(self, op, a):
        if op == "neg":
            return -a
        try:
            return self._funcs[op](a)
        except (ValueError, OverflowError) as exc:
            raise DomainError(f"{op}({a!r}): {exc}") from exc

    def binary(self, op, a, b):
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if b == 0.0:
            raise DomainError(f"division by zero in {a!r} / {b!r}")
        return a / b

    def pow(self, a, k):
        return a**k


def eval_scalar(ast: Node, x: Sequence[float], u: Sequence[float] = ()) -> float:
    return float(_walk(ast, _Scalar([float(v) for v in x], [float(v) for v in u])))


class _Points:
    _funcs = {
        "sin": np.sin,
        "cos": np.cos,
        "exp": np.exp,
        "sqrt": np.sqrt,
        "abs": np.abs,
        "tanh": np.tanh,
    }

    def __init__(self, X, U):
        self.X, self.U = X, U

    def const(self, node):
        return node.value

    def var(self, node):
        return (self.X if node.kind == "x" else self.U)[:, node.index - 1]

    def unary(self, op, a):
        return -a if op == "neg" else self._funcs[op](a)

    def binary(self, op, a, b):
        return {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide}[op](a, b)

    def pow(self, a, k):
        return a**k


def eval_points(ast: Node, X, U=None) -> np.ndarray:
    """Evaluate at many points; rows of ``X`` (and ``U``) are points."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    U = np.zeros((X.shape[0], 0)) if U is None else np.atleast_2d(np.asarray(U, dtype=np.float64))
    with np.errstate(all="ignore"):
        out = _walk(ast, _Points(X, U))
    out = np.broadcast_to(np.asarray(out, dtype=np.float64), (X.shape[0],)).copy()
    if np.isnan(out).any():
        raise DomainError("expression undefined at some evaluation points")
    return out


class _Boxes:
    """Natural inclusion function over a batch of boxes (rows of ``lo``/``hi``)."""

    def __init__(self, lo, hi, n_state, strict):
        self.lo, self.hi = lo, hi
        self.n_state = n_state
        self.strict = strict

    def const(self, node):
        return node.lo, node.hi

    def var(self, node):
        col = node.index - 1 if node.kind == "x" else self.n_state + node.index - 1
        return self.lo[:, col], self.hi[:, col]

    def _checked(self, pair, what):
        lo, hi = pair
        bad = np.isnan(lo) | np.isnan(hi)
        if bad.any():
            if self.strict:
                i = int(np.flatnonzero(np.broadcast_to(bad, (self.lo.shape[0],)))[0])
                box = IvBox.from_bounds(self.lo[i], self.hi[i], n_state=self.n_state)
                raise DomainError(f"{what}: argument outside the function domain on box {i}", box=box)
            lo = np.where(bad, -np.inf, lo)
            hi = np.where(bad, np.inf, hi)
        return lo, hi

    def unary(self, op, a):
        return self._checked(ivarray.UNARY[op](*a), op)

    def binary(self, op, a, b):
        return self._checked(ivarray.BINARY[op](a[0], a[1], b[0], b[1]), op)

    def pow(self, a, k):
        return ivarray.pow_int(a[0], a[1], k)


def eval_interval_batch(ast: Node, lo, hi, n_state: int, strict: bool = True):
    """Enclosures of ``ast`` over every box; returns ``(lo, hi)`` arrays of length k."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    k = lo.shape[0]
    rlo, rhi = _walk(ast, _Boxes(lo, hi, n_state, strict))
    return (
        np.broadcast_to(np.asarray(rlo, dtype=np.float64), (k,)).copy(),
        np.broadcast_to(np.asarray(rhi, dtype=np.float64), (k,)).copy(),
    )


def eval_interval(ast: Node, box: IvBox, strict: bool = True) -> Interval:
    lo, hi = eval_interval_batch(ast, box.lo[None, :], box.hi[None, :], box.n_state, strict)
    return Interval(lo[0], hi[0])


class _Duals:
    def __init__(self, x, u):
        nv = len(x) + len(u)
        self.nv = nv
        self.x = [_dual.Dual.variable(v, i, nv) for i, v in enumerate(x)]
        self.u = [_dual.Dual.variable(v, len(x) + i, nv) for i, v in enumerate(u)]

    def const(self, node):
        return _dual.Dual.constant(node.value, self.nv)

    def var(self, node):
        return (self.x if node.kind == "x" else self.u)[node.index - 1]

    def unary(self, op, a):
        return -a if op == "neg" else _dual.UNARY[op](a)

    def binary(self, op, a, b):
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        return a / b

    def pow(self, a, k):
        return a**k


def gradient(ast: Node, x: Sequence[float], u: Sequence[float] = ()) -> np.ndarray:
    """Exact forward-mode gradient with respect to ``(x; u)``."""
    return _walk(ast, _Duals([float(v) for v in x], [float(v) for v in u])).grad


# ---------------------------------------------------------------------------
# plant


@dataclass(frozen=True)
class PlantModel:
    n: int
    m: int
    dynamics: tuple

    def __post_init__(self):
        object.__setattr__(self, "dynamics", tuple(self.dynamics))
        if len(self.dynamics) != self.n:
            raise ConfigError(f"plant has n={self.n} but {len(self.dynamics)} dynamics expressions")
        for i, f in enumerate(self.dynamics):
            for kind, idx in variables(f):
                if idx > (self.n if kind == "x" else self.m):
                    raise ConfigError(f"dynamics[{i}] references {kind}{idx} outside (n, m)")
            f0 = eval_scalar(f, [0.0] * self.n, [0.0] * self.m)
            if abs(f0) > 1e-12:
                raise ConfigError(f"origin is not an equilibrium: f_{i + 1}(0, 0) = {f0!r}")

    @classmethod
    def from_strings(cls, exprs: Sequence[str], n: int, m: int) -> PlantModel:
        return cls(n, m, tuple(parse(e, n, m) for e in exprs))

    def step(self, x, u) -> np.ndarray:
        return np.array([eval_scalar(f, x, u) for f in self.dynamics])


def jacobian_at(plant: PlantModel, x, u):
    """Linearization ``(A, B)`` with ``A = df/dx`` and ``B = df/du`` at ``(x, u)``."""
    rows = [gradient(f, x, u) for f in plant.dynamics]
    J = np.vstack(rows) if rows else np.zeros((0, plant.n + plant.m))
    return J[:, : plant.n].copy(), J[:, plant.n :].copy()
