"""Type A matrix realization: elementary unipotents, Lusztig products, Gauss decomposition.

Matrices are numpy arrays.  Exact matrices use ``dtype=object`` with
``Fraction`` entries; float matrices may carry leading batch dimensions
(``(..., n, n)``), which the Monte Carlo code relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np


class ZeroMinor(ArithmeticError):
    """A leading principal minor vanishes: no Gauss decomposition without pivoting."""


class NotInCell(ValueError):
    """The matrix is outside the positive chart of the requested reduced word."""


@dataclass(frozen=True)
class GaussTriple:
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray


@dataclass(frozen=True)
class LusztigParams:
    word: tuple[int, ...]
    values: tuple

    def __post_init__(self):
        if len(self.word) != len(self.values):
            raise ValueError("word and values differ in length")
        if not all(v > 0 for v in self.values):
            raise ValueError("Lusztig parameters must be positive")


def _is_exact(t) -> bool:
    return isinstance(t, (int, Fraction)) and not isinstance(t, bool)


def identity(n: int, exact: bool = True) -> np.ndarray:
    if exact:
        m = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                m[i, j] = Fraction(int(i == j))
        return m
    return np.eye(n)


def _check_index(n, i):
    if n not in (2, 3, 4):
        raise ValueError(f"dimension {n} not in (2, 3, 4)")
    if not 1 <= i <= n - 1:
        raise IndexError(f"simple index {i} out of range for SL_{n}")


def x_elem(n: int, i: int, t) -> np.ndarray:
    """Id + t E_{i,i+1}."""
    _check_index(n, i)
    m = identity(n, exact=_is_exact(t))
    m[i - 1, i] = Fraction(t) if _is_exact(t) else t
    return m


def y_elem(n: int, i: int, t) -> np.ndarray:
    """Id + t E_{i+1,i}."""
    _check_index(n, i)
    m = identity(n, exact=_is_exact(t))
    m[i, i - 1] = Fraction(t) if _is_exact(t) else t
    return m


def lusztig_product(n: int, params: LusztigParams | tuple) -> np.ndarray:
    """x_{i_1}(t_1) ... x_{i_m}(t_m) for scalar parameters."""
    word, values = (params.word, params.values) if isinstance(params, LusztigParams) else params
    g = identity(n, exact=all(_is_exact(v) for v in values))
    for i, t in zip(word, values):
        g = g @ x_elem(n, i, t)
    return g


def lusztig_product_batch(n: int, word: Sequence[int], values: Sequence[np.ndarray]) -> np.ndarray:
    """Vectorized Lusztig product; ``values[j]`` are arrays of equal shape."""
    values = [np.asarray(v, dtype=float) for v in values]
    shape = values[0].shape
    g = np.broadcast_to(np.eye(n), shape + (n, n)).copy()
    for i, t in zip(word, values):
        # right multiplication by Id + t E_{i,i+1} adds t * column i to column i+1
        g[..., :, i] += t[..., None] * g[..., :, i - 1]
    return g


def gauss_decompose(g: np.ndarray) -> GaussTriple:
    """Doolittle LDU factorization g = lower @ diag @ upper, no pivoting.

    Works on exact object arrays and on float arrays with batch dimensions.
    """
    a = np.array(g, copy=True)
    n = a.shape[-1]
    exact = a.dtype == object
    lower = np.zeros_like(a)
    upper = np.zeros_like(a)
    d = np.zeros_like(a)
    for k in range(n):
        pivot = a[..., k, k]
        if np.any(pivot == 0):
            raise ZeroMinor(f"leading principal minor of order {k + 1} vanishes")
        d[..., k, k] = pivot
        lower[..., k, k] = 1
        upper[..., k, k] = 1
        for i in range(k + 1, n):
            lower[..., i, k] = a[..., i, k] / pivot
            upper[..., k, i] = a[..., k, i] / pivot
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[..., i, j] = a[..., i, j] - lower[..., i, k] * pivot * upper[..., k, j]
    if exact:
        for arr in (lower, upper, d):
            arr[arr == 0] = Fraction(0)
            arr[arr == 1] = Fraction(1)
    return GaussTriple(lower, d, upper)


def w0_bar(n: int, exact: bool = True) -> np.ndarray:
    """Signed antidiagonal representative of w0: entry (i, n+1-i) = (-1)^(n-i)."""
    m = identity(n, exact) * 0 if exact else np.zeros((n, n))
    for i in range(1, n + 1):
        m[i - 1, n - i] = Fraction((-1) ** (n - i)) if exact else float((-1) ** (n - i))
    return m


def theta_twist(n: int, g: np.ndarray) -> np.ndarray:
    """Theta(g) = [g w0_bar]_-, the unit lower triangular Gauss factor."""
    g = np.asarray(g)
    return gauss_decompose(g @ w0_bar(n, exact=g.dtype == object)).lower


def invert_chart_A2(word: Sequence[int], g: np.ndarray) -> LusztigParams:
    """Positive parameters t with lusztig_product(3, (word, t)) == g."""
    word = tuple(word)
    g12, g13, g23 = g[0, 1], g[0, 2], g[1, 2]
    if g[1, 0] != 0 or g[2, 0] != 0 or g[2, 1] != 0 or any(g[i, i] != 1 for i in range(3)):
        raise NotInCell("matrix is not unit upper triangular")
    if not (g12 > 0 and g13 > 0 and g23 > 0 and g12 * g23 - g13 > 0):
        raise NotInCell("matrix outside the totally positive cell of U")
    if word == (1, 2, 1):
        t1 = g13 / g23
        return LusztigParams(word, (t1, g23, g12 - t1))
    if word == (2, 1, 2):
        p3 = g13 / g12
        return LusztigParams(word, (g23 - p3, g12, p3))
    raise ValueError(f"{word} is not a reduced word of w0 in A2")
