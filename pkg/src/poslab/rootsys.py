"""Rank <= 3 root systems: simple roots, Weyl words and positive-root enumerations.

Coordinates of the simple roots are fixed (see ``_SIMPLE_ROOTS``); the inner
product is the Euclidean dot product on those coordinates.  All root
computations are exact (``fractions.Fraction``); drift vectors are floats.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

SUPPORTED_TYPES = ("A1", "A2", "B2", "C2", "G2", "A3")

_SIMPLE_ROOTS = {
    "A1": ((2,),),
    "A2": ((1, -1, 0), (0, 1, -1)),
    "B2": ((1, -1), (0, 1)),
    "C2": ((1, -1), (0, 2)),
    "G2": ((0, 1, -1), (1, -2, 1)),
    "A3": ((1, -1, 0, 0), (0, 1, -1, 0), (0, 0, 1, -1)),
}

Vector = tuple  # tuple of Fraction


class UnsupportedRootSystem(ValueError):
    pass


class NotReducedWord(ValueError):
    pass


class ChamberError(ValueError):
    """Drift coordinates outside the open Weyl chamber."""


def _dot(u, v):
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


def _axpy(a, x, y):
    return tuple(a * xi + yi for xi, yi in zip(x, y))


def _solve(matrix, rhs):
    """Exact Gauss-Jordan solve of a small nonsingular system."""
    n = len(matrix)
    aug = [[Fraction(v) for v in row] + [Fraction(b)] for row, b in zip(matrix, rhs)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return tuple(row[n] for row in aug)


@dataclass(frozen=True)
class PositiveRoot:
    coeffs: tuple[int, ...]
    vector: Vector

    def __str__(self):
        terms = []
        for k, c in enumerate(self.coeffs, start=1):
            if c:
                terms.append(f"a{k}" if c == 1 else f"{c}a{k}")
        return "+".join(terms)


@dataclass(frozen=True)
class ChamberDrift:
    a: tuple[float, ...]
    vector: np.ndarray

    def __hash__(self):
        return hash(self.a)

    def __eq__(self, other):
        return isinstance(other, ChamberDrift) and self.a == other.a


@dataclass(frozen=True)
class RootSystem:
    type_tag: str
    ambient_dim: int
    simple_roots: tuple[Vector, ...]
    cartan_matrix: tuple[tuple[int, ...], ...]
    longest_word_length: int

    @property
    def rank(self) -> int:
        return len(self.simple_roots)

    @property
    def gram(self):
        return tuple(tuple(_dot(a, b) for b in self.simple_roots) for a in self.simple_roots)

    def norm2(self, i: int) -> Fraction:
        """Squared norm of the simple root with 1-based index ``i``."""
        a = self.simple_roots[i - 1]
        return _dot(a, a)

    def coroot(self, i: int) -> Vector:
        a = self.simple_roots[i - 1]
        return tuple(2 * x / self.norm2(i) for x in a)

    def reflect(self, i: int, x) -> Vector:
        a = self.simple_roots[i - 1]
        return _axpy(-2 * _dot(a, x) / self.norm2(i), a, tuple(Fraction(v) for v in x))

    def apply_word(self, word: Sequence[int], x) -> Vector:
        """s_{i_1} ... s_{i_k} x (rightmost reflection applied first)."""
        x = tuple(Fraction(v) for v in x)
        for i in reversed(tuple(word)):
            x = self.reflect(i, x)
        return x

    def simple_coefficients(self, x) -> tuple[Fraction, ...]:
        """Coefficients of ``x`` (in the span of the simple roots) in the simple-root basis."""
        rhs = [_dot(a, x) for a in self.simple_roots]
        return _solve(self.gram, rhs)


def build_root_system(type_tag: str) -> RootSystem:
    if type_tag not in _SIMPLE_ROOTS:
        raise UnsupportedRootSystem(f"unsupported root system {type_tag!r}; choose from {SUPPORTED_TYPES}")
    roots = tuple(tuple(Fraction(c) for c in r) for r in _SIMPLE_ROOTS[type_tag])
    cartan = []
    for ai in roots:
        row = []
        for aj in roots:
            v = 2 * _dot(ai, aj) / _dot(aj, aj)
            assert v.denominator == 1
            row.append(int(v))
        cartan.append(tuple(row))
    rs = RootSystem(type_tag, len(roots[0]), roots, tuple(cartan), 0)
    m = len(_positive_roots_bruteforce(rs))
    return RootSystem(type_tag, len(roots[0]), roots, tuple(cartan), m)


def _positive_roots_bruteforce(rs: RootSystem) -> list[PositiveRoot]:
    """Closure of the simple roots under W, intersected with the positive cone."""
    seen = set(rs.simple_roots)
    frontier = list(rs.simple_roots)
    while frontier:
        nxt = []
        for v in frontier:
            for i in range(1, rs.rank + 1):
                w = rs.reflect(i, v)
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    out = []
    for v in seen:
        c = rs.simple_coefficients(v)
        if all(x >= 0 for x in c):
            out.append(PositiveRoot(tuple(int(x) for x in c), v))
    return sorted(out, key=lambda r: (sum(r.coeffs), r.coeffs))


def positive_roots(rs: RootSystem) -> list[PositiveRoot]:
    return _positive_roots_bruteforce(rs)


def _is_positive(rs: RootSystem, v) -> bool:
    return all(c >= 0 for c in rs.simple_coefficients(v))


def word_length(rs: RootSystem, word: Sequence[int]) -> int:
    """Length of the Weyl element spelled by ``word`` (number of inversions)."""
    return sum(1 for b in positive_roots(rs) if not _is_positive(rs, rs.apply_word(word, b.vector)))


def _check_letters(rs: RootSystem, word):
    for i in word:
        if not (isinstance(i, (int, np.integer)) and 1 <= i <= rs.rank):
            raise NotReducedWord(f"letter {i!r} is not a simple-root index of {rs.type_tag}")


def is_reduced_w0(rs: RootSystem, word: Sequence[int]) -> bool:
    _check_letters(rs, word)
    return len(word) == rs.longest_word_length and word_length(rs, word) == rs.longest_word_length


def reduced_words_w0(rs: RootSystem) -> set[tuple[int, ...]]:
    """All reduced words of the longest element, by exhaustive search."""
    m = rs.longest_word_length
    # w0 maps every simple root to a negative root; identify it by its action on them
    letters = range(1, rs.rank + 1)
    words = set()
    for word in itertools.product(letters, repeat=m):
        if any(word[k] == word[k + 1] for k in range(m - 1)):
            continue
        if all(not _is_positive(rs, rs.apply_word(word, a)) for a in rs.simple_roots):
            words.add(word)
    return words


def enumerate_positive_roots(rs: RootSystem, word: Sequence[int]) -> list[PositiveRoot]:
    """beta_j = s_{i_1} ... s_{i_{j-1}} alpha_{i_j} for a reduced word of w0."""
    word = tuple(word)
    if not is_reduced_w0(rs, word):
        raise NotReducedWord(f"{word} is not a reduced word of w0 in {rs.type_tag}")
    out = []
    for j, i in enumerate(word):
        v = rs.apply_word(word[:j], rs.simple_roots[i - 1])
        c = rs.simple_coefficients(v)
        out.append(PositiveRoot(tuple(int(x) for x in c), v))
    return out


def gamma_parameters(rs: RootSystem, word: Sequence[int], drift: ChamberDrift) -> tuple[float, ...]:
    """Shapes sum_k c_k a_k for each root beta_j = sum_k c_k alpha_k of the enumeration."""
    return tuple(
        float(sum(c * a for c, a in zip(beta.coeffs, drift.a)))
        for beta in enumerate_positive_roots(rs, word)
    )


def chamber_coords(rs: RootSystem, x) -> tuple[float, ...]:
    """Inverse of :func:`drift_from_chamber_coords`."""
    x = np.asarray(x, dtype=float)
    if rs.type_tag == "A1":
        # alpha = 2, alpha^vee = 1: the coordinate is <alpha^vee, mu> = mu
        return (float(x[0]),)
    return tuple(float(np.dot(np.array(a, dtype=float), x)) for a in rs.simple_roots)


def drift_from_chamber_coords(rs: RootSystem, a: Sequence[float]) -> ChamberDrift:
    a = tuple(float(v) for v in a)
    if len(a) != rs.rank:
        raise ChamberError(f"{rs.type_tag} needs {rs.rank} chamber coordinates, got {len(a)}")
    if not all(v > 0 and math.isfinite(v) for v in a):
        raise ChamberError(f"chamber coordinates must be positive, got {a}")
    if rs.type_tag == "A1":
        return ChamberDrift(a, np.array([a[0]]))
    gram = np.array(rs.gram, dtype=float)
    coeffs = np.linalg.solve(gram, np.array(a))
    basis = np.array(rs.simple_roots, dtype=float)
    return ChamberDrift(a, coeffs @ basis)


def fundamental_coweights(rs: RootSystem) -> list[Vector]:
    """omega_i^vee in the span of the roots with alpha_j(omega_i^vee) = delta_ij."""
    out = []
    for i in range(rs.rank):
        rhs = [Fraction(int(i == j)) for j in range(rs.rank)]
        c = _solve(rs.gram, rhs)
        v = tuple(Fraction(0) for _ in range(rs.ambient_dim))
        for ck, alpha in zip(c, rs.simple_roots):
            v = _axpy(ck, alpha, v)
        out.append(v)
    return out


def longest_element_action(rs: RootSystem, x, word: Sequence[int] | None = None):
    """w0 . x, computed from ``word`` (default: the first reduced word found)."""
    if word is None:
        word = min(reduced_words_w0(rs))
    exact = all(isinstance(v, (int, Fraction)) for v in np.ravel(x))
    if exact:
        return rs.apply_word(word, x)
    y = np.array(x, dtype=float)
    for i in reversed(tuple(word)):
        alpha = np.array(rs.simple_roots[i - 1], dtype=float)
        y = y - 2 * np.dot(alpha, y) / np.dot(alpha, alpha) * alpha
    return y


def theta_shift(rs: RootSystem) -> np.ndarray:
    """sum over simple roots of log(<alpha, alpha>/2) omega_alpha^vee."""
    theta = np.zeros(rs.ambient_dim)
    for i, w in enumerate(fundamental_coweights(rs), start=1):
        theta += math.log(rs.norm2(i) / 2) * np.array(w, dtype=float)
    return theta


def orthonormal_basis(rs: RootSystem) -> np.ndarray:
    """Rows form an orthonormal basis of the span of the simple roots."""
    q, _ = np.linalg.qr(np.array(rs.simple_roots, dtype=float).T)
    return q.T
