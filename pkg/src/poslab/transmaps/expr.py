"""Subtraction-free expression DAGs and their evaluation over commutative semirings."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence, Union

import numpy as np


@dataclass(frozen=True)
class Var:
    index: int  # 0-based


@dataclass(frozen=True)
class Const:
    value: int

    def __post_init__(self):
        if self.value < 1:
            raise ValueError("constants of a subtraction-free expression are positive integers")


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


Expr = Union[Var, Const, Add, Mul, Div]


@dataclass(frozen=True)
class Semiring:
    name: str
    add: Callable
    mul: Callable
    div: Callable
    const: Callable


RATIONAL = Semiring(
    "rational",
    lambda a, b: a + b,
    lambda a, b: a * b,
    lambda a, b: a / b,
    Fraction,
)
FLOAT = Semiring(
    "float",
    lambda a, b: a + b,
    lambda a, b: a * b,
    lambda a, b: a / b,
    float,
)
# (min, +, -); integer constants k >= 1 tropicalize to 0
TROPICAL = Semiring(
    "tropical",
    np.minimum,
    lambda a, b: a + b,
    lambda a, b: a - b,
    lambda k: 0,
)
# floats stored as their logarithms; exact image of FLOAT under log
LOG = Semiring(
    "log",
    np.logaddexp,
    lambda a, b: a + b,
    lambda a, b: a - b,
    lambda k: math.log(k),
)

SEMIRINGS = {s.name: s for s in (RATIONAL, FLOAT, TROPICAL, LOG)}


class MixedSemiringError(TypeError):
    pass


@dataclass(frozen=True)
class Tropical:
    """A scalar of the (min, +) semiring."""

    value: float

    def __add__(self, other):
        return Tropical(min(self.value, other.value))

    def __mul__(self, other):
        return Tropical(self.value + other.value)

    def __truediv__(self, other):
        return Tropical(self.value - other.value)


def _kind(v) -> str:
    if isinstance(v, Tropical):
        return "tropical"
    if isinstance(v, (Fraction, int)) and not isinstance(v, bool):
        return "rational"
    if isinstance(v, (float, np.floating)) or (isinstance(v, np.ndarray) and v.dtype.kind == "f"):
        return "float"
    raise TypeError(f"cannot infer a semiring for value {v!r}")


def infer_semiring(values: Sequence) -> Semiring:
    kinds = {_kind(v) for v in values}
    if len(kinds) != 1:
        raise MixedSemiringError(f"values mix semirings: {sorted(kinds)}")
    return SEMIRINGS[kinds.pop()]


def evaluate_exprs(exprs: Sequence[Expr], values: Sequence, semiring: Semiring) -> list:
    """Evaluate several expressions sharing one memo table (shared subexpressions run once)."""
    memo: dict[int, object] = {}

    def go(node):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Var):
            out = values[node.index]
        elif isinstance(node, Const):
            out = semiring.const(node.value)
        elif isinstance(node, Add):
            out = semiring.add(go(node.left), go(node.right))
        elif isinstance(node, Mul):
            out = semiring.mul(go(node.left), go(node.right))
        elif isinstance(node, Div):
            out = semiring.div(go(node.left), go(node.right))
        else:
            raise TypeError(f"unknown node {node!r}")
        memo[key] = out
        return out

    return [go(e) for e in exprs]


def expand(node: Expr) -> Expr:
    """Rebuild ``node`` as a tree with no shared objects (for DAG-correctness checks)."""
    if isinstance(node, (Var, Const)):
        return type(node)(node.index if isinstance(node, Var) else node.value)
    return type(node)(expand(node.left), expand(node.right))


def variables(node: Expr) -> set[int]:
    seen: set[int] = set()
    out: set[int] = set()

    def go(n):
        if id(n) in seen:
            return
        seen.add(id(n))
        if isinstance(n, Var):
            out.add(n.index)
        elif not isinstance(n, Const):
            go(n.left)
            go(n.right)

    go(node)
    return out


def tropical_error_constant(node: Expr) -> float:
    """L with |-h log a(e^{-x/h}) - [a]_trop(x)| <= L h for every x and h > 0.

    L(var) = 0, L(k) = log k, L(a*b) = L(a/b) = L(a) + L(b),
    L(a+b) = max(L(a), L(b)) + log 2.
    """
    memo: dict[int, float] = {}

    def go(n):
        if id(n) in memo:
            return memo[id(n)]
        if isinstance(n, Var):
            out = 0.0
        elif isinstance(n, Const):
            out = math.log(n.value)
        elif isinstance(n, Add):
            out = max(go(n.left), go(n.right)) + math.log(2)
        else:
            out = go(n.left) + go(n.right)
        memo[id(n)] = out
        return out

    return go(node)
