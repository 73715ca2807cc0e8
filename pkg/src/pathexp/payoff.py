"""A small expression language for path payoffs.

Grammar, loosest binding first::

    cmp    := add (('<' | '<=' | '>' | '>=' | '=' | '==') add)*
    add    := mul (('+' | '-') mul)*
    mul    := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | IDENT | IDENT '(' cmp (',' cmp)* ')' | '(' cmp ')'

``-2^2`` is ``-(2^2)``. Comparisons give 0 or 1. Evaluation is vectorised
over all paths of a lattice and works in the extended reals: every
undefined result (inf - inf, 0/0, ...) is -inf, except 0 * inf = 0.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .extreal import INF, NINF
from .pathspace import Lattice, RandomVariable


class PayoffError(ValueError):
    pass


class PayoffSyntaxError(PayoffError):
    def __init__(self, offset: int, expected, found: str):
        self.offset = offset
        self.expected = frozenset(expected)
        self.found = found
        super().__init__(f"at byte {offset}: expected one of {sorted(self.expected)}, found {found!r}")


class UnknownIdentifier(PayoffError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at byte {offset}")


class ArityError(PayoffError):
    def __init__(self, name: str, expected: int, got: int, offset: int):
        self.name, self.expected, self.got, self.offset = name, expected, got, offset
        super().__init__(f"{name} takes {expected} argument(s), got {got} (byte {offset})")


class IndexOutOfRange(PayoffError):
    pass


# AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * / ^
    left: object
    right: object


@dataclass(frozen=True)
class Cmp:
    op: str  # < <= > >= ==
    left: object
    right: object


VARIABLES = {"B", "QV", "MAXB", "STEPS", "DT"}
CONSTANTS = {"inf": INF, "ninf": NINF}
FUNCTIONS = {"max": 2, "min": 2, "abs": 1, "exp": 1, "ind": 1, "neg": 1}
INDEXED = {"B_at": 0, "QV_at": 0, "AHAT_at": 1}  # name -> smallest valid step
CMP_OPS = {"<": "<", "<=": "<=", "≤": "<=", ">": ">", ">=": ">=", "≥": ">=", "=": "==", "==": "=="}

_TOKEN = re.compile(
    r"""(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
      | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
      | (?P<op><=|>=|==|[-+*/^(),<>=≤≥])""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, ident, op, eof
    text: str
    offset: int  # byte offset


def _tokenize(src: str) -> list:
    def byte(i):
        return len(src[:i].encode("utf-8"))

    toks, pos, n = [], 0, len(src)
    while True:
        while pos < n and src[pos].isspace():
            pos += 1
        if pos == n:
            toks.append(_Tok("eof", "", byte(n)))
            return toks
        m = _TOKEN.match(src, pos)
        if m is None:
            raise PayoffSyntaxError(byte(pos), {"number", "identifier", "operator"}, src[pos])
        toks.append(_Tok(m.lastgroup, m.group(), byte(pos)))
        pos = m.end()


_OPERAND_START = {"number", "identifier", "(", "-"}


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _fail(self, expected):
        t = self.tok
        raise PayoffSyntaxError(t.offset, expected, t.text or "end of input")

    def _accept(self, *ops):
        t = self.tok
        if t.kind == "op" and t.text in ops:
            self.i += 1
            return t
        return None

    def _expect(self, op):
        if not self._accept(op):
            self._fail({op})

    def parse(self):
        node = self.cmp()
        if self.tok.kind != "eof":
            self._fail({"operator", "end of input"})
        return node

    def cmp(self):
        left = self.add()
        while (t := self._accept(*CMP_OPS)) is not None:
            left = Cmp(CMP_OPS[t.text], left, self.add())
        return left

    def add(self):
        left = self.mul()
        while (t := self._accept("+", "-")) is not None:
            left = BinOp(t.text, left, self.mul())
        return left

    def mul(self):
        left = self.unary()
        while (t := self._accept("*", "/")) is not None:
            left = BinOp(t.text, left, self.unary())
        return left

    def unary(self):
        if self._accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self._accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(float(t.text))
        if self._accept("("):
            inner = self.cmp()
            self._expect(")")
            return inner
        if t.kind == "ident":
            self.i += 1
            if self._accept("("):
                args = [self.cmp()]
                while self._accept(","):
                    args.append(self.cmp())
                self._expect(")")
                return self._call(t, args)
            if t.text in CONSTANTS:
                return Num(CONSTANTS[t.text])
            if t.text in VARIABLES:
                return Var(t.text)
            raise UnknownIdentifier(t.text, t.offset)
        self._fail(_OPERAND_START)

    def _call(self, t: _Tok, args: list):
        name = t.text
        if name in FUNCTIONS:
            arity = FUNCTIONS[name]
        elif name in INDEXED:
            arity = 1
        else:
            raise UnknownIdentifier(name, t.offset)
        if len(args) != arity:
            raise ArityError(name, arity, len(args), t.offset)
        if name in INDEXED:
            k = args[0]
            if not (isinstance(k, Num) and math.isfinite(k.value) and k.value == int(k.value)):
                raise PayoffSyntaxError(t.offset, {"integer step index"}, name)
            args = [Num(float(int(k.value)))]
        return Call(name, tuple(args))


def parse(source: str):
    """Parse payoff source text into an AST."""
    return _Parser(source).parse()


def to_source(expr) -> str:
    """Fully parenthesised source text; ``parse(to_source(e)) == e`` for parsed ASTs."""
    if isinstance(expr, Num):
        v = expr.value
        if v == INF:
            return "inf"
        if v == NINF:
            return "ninf"
        return repr(v) if v >= 0 else f"(-{repr(-v)})"
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Call):
        if expr.name in INDEXED:
            return f"{expr.name}({int(expr.args[0].value)})"
        return f"{expr.name}({', '.join(to_source(a) for a in expr.args)})"
    if isinstance(expr, Neg):
        return f"(-{to_source(expr.operand)})"
    if isinstance(expr, (BinOp, Cmp)):
        return f"({to_source(expr.left)} {expr.op} {to_source(expr.right)})"
    raise TypeError(f"not a payoff AST node: {expr!r}")


# evaluation --------------------------------------------------------------

def _clean(x):
    return np.where(np.isnan(x), NINF, x)


def _mul(a, b):
    with np.errstate(invalid="ignore", over="ignore"):
        out = a * b
    return np.where((a == 0) | (b == 0), 0.0, _clean(out))


def _binop(op, a, b):
    if op == "*":
        return _mul(a, b)
    with np.errstate(all="ignore"):
        if op == "+":
            out = a + b
        elif op == "-":
            out = a - b
        elif op == "/":
            out = np.divide(a, b)
        else:
            out = np.power(a, b)
    return _clean(out)


_CMP = {"<": np.less, "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal, "==": np.equal}


class _Features:
    """Per-path quantities for an increment matrix of shape (paths, steps)."""

    def __init__(self, increments: np.ndarray, dt: float):
        self.inc = np.asarray(increments, dtype=float)
        self.dt = dt
        n, m = self.inc.shape
        self.steps = m
        self.values = np.concatenate([np.zeros((n, 1)), np.cumsum(self.inc, axis=1)], axis=1)
        self.qv = np.concatenate([np.zeros((n, 1)), np.cumsum(self.inc**2, axis=1)], axis=1)

    def var(self, name):
        if name == "B":
            return self.values[:, -1]
        if name == "QV":
            return self.qv[:, -1]
        if name == "MAXB":
            return self.values.max(axis=1)
        if name == "STEPS":
            return np.full(len(self.inc), float(self.steps))
        if name == "DT":
            return np.full(len(self.inc), self.dt)
        raise UnknownIdentifier(name, -1)

    def indexed(self, name, k):
        lo = INDEXED[name]
        if not lo <= k <= self.steps:
            raise IndexOutOfRange(f"{name}({k}) needs a step in {lo}..{self.steps}")
        if name == "B_at":
            return self.values[:, k]
        if name == "QV_at":
            return self.qv[:, k]
        return self.inc[:, k - 1] ** 2 / self.dt


def _eval(expr, feats: _Features):
    if isinstance(expr, Num):
        return np.full(len(feats.inc), expr.value)
    if isinstance(expr, Var):
        return feats.var(expr.name)
    if isinstance(expr, Neg):
        return -_eval(expr.operand, feats)
    if isinstance(expr, BinOp):
        return _binop(expr.op, _eval(expr.left, feats), _eval(expr.right, feats))
    if isinstance(expr, Cmp):
        return _CMP[expr.op](_eval(expr.left, feats), _eval(expr.right, feats)).astype(float)
    if isinstance(expr, Call):
        if expr.name in INDEXED:
            return feats.indexed(expr.name, int(expr.args[0].value))
        args = [_eval(a, feats) for a in expr.args]
        if expr.name == "max":
            return np.maximum(*args)
        if expr.name == "min":
            return np.minimum(*args)
        if expr.name == "abs":
            return np.abs(args[0])
        if expr.name == "exp":
            with np.errstate(over="ignore"):
                return np.exp(args[0])
        if expr.name == "ind":
            return (args[0] != 0).astype(float)
        if expr.name == "neg":
            return -args[0]
    raise TypeError(f"not a payoff AST node: {expr!r}")


def bind(expr, num_steps: int):
    """Check every step index against a horizon; returns ``expr`` unchanged."""
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, Call):
            if e.name in INDEXED:
                k = int(e.args[0].value)
                if not INDEXED[e.name] <= k <= num_steps:
                    raise IndexOutOfRange(f"{e.name}({k}) needs a step in {INDEXED[e.name]}..{num_steps}")
            stack.extend(e.args)
        elif isinstance(e, (BinOp, Cmp)):
            stack.extend((e.left, e.right))
        elif isinstance(e, Neg):
            stack.append(e.operand)
    return expr


def evaluate_increments(expr, increments, dt: float) -> np.ndarray:
    """Evaluate on every row of an increment matrix (rows may be prefixes)."""
    inc = np.asarray(increments, dtype=float)
    if inc.ndim != 2:
        raise ValueError("increments must be a (paths, steps) matrix")
    bind(expr, inc.shape[1])
    return _eval(expr, _Features(inc, dt))


def evaluate(expr, lattice: Lattice, path) -> float:
    if isinstance(expr, str):
        expr = parse(expr)
    inc = np.array(lattice.increments(lattice.check_path(path)), dtype=float)
    return float(evaluate_increments(expr, inc.reshape(1, lattice.num_steps), lattice.dt)[0])


def compile_payoff(expr, lattice: Lattice) -> RandomVariable:
    """The payoff as a RandomVariable over every path of ``lattice``."""
    if isinstance(expr, str):
        expr = parse(expr)
    vals = evaluate_increments(expr, lattice.increment_matrix(), lattice.dt)
    return RandomVariable(lattice, vals.reshape(lattice.shape))
