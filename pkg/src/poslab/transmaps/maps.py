"""Rank-2 transition maps between the Lusztig charts of the two reduced words of w0."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import (
    FLOAT,
    LOG,
    SEMIRINGS,
    TROPICAL,
    Expr,
    Semiring,
    Tropical,
    evaluate_exprs,
    infer_semiring,
    tropical_error_constant,
    variables,
)
from .parser import parse_program


class NoConvergence(ArithmeticError):
    pass


class TropicalOverflow(OverflowError):
    pass


@dataclass(frozen=True)
class TransitionMapDef:
    type_tag: str
    source_word: tuple[int, ...]
    target_word: tuple[int, ...]
    components: tuple[Expr, ...]
    source_text: str = field(default="", compare=False, repr=False)

    def __post_init__(self):
        m = len(self.source_word)
        if len(self.target_word) != m or len(self.components) != m:
            raise ValueError("words and components must all have length m")
        for c in self.components:
            if any(i >= m for i in variables(c)):
                raise ValueError("component references a variable beyond the arity")

    @property
    def arity(self) -> int:
        return len(self.source_word)


_A2 = """
s = t1 + t3;
(t2*t3/s, s, t1*t2/s)
"""

_B2 = """
pi1 = t1*t2 + (t1 + t3)*t4;
pi2 = t1^2*t2 + (t1 + t3)^2*t4;
(t2*t3^2*t4/pi2, pi2/pi1, pi1^2/pi2, t1*t2*t3/pi1)
"""

_C2 = """
pi1 = t1*t2 + (t1 + t3)*t4;
pi2 = t3*t4^2 + (t2 + t4)^2*t1;
(t2*t3*t4/pi1, pi1^2/pi2, pi2/pi1, t1*t2^2*t3/pi2)
"""

# The polynomials below are written in reversed variables u_k = t_{7-k} and the
# output tuple is reversed: the map q(u) on its own goes from the chart of
# 212121 to the chart of 121212 in this labeling of the roots.
_G2 = """
u1 = t6; u2 = t5; u3 = t4; u4 = t3; u5 = t2; u6 = t1;
c = 3*u1*u3 + 2*u1*u5 + 3*u3^2 + 3*u3*u5;
pi1 = u1*u2*u3^2*u4 + u1*u2*(u3 + u5)^2*u6 + (u1 + u3)*u4*u5^2*u6;
pi2 = u1^2*u2^2*u3^3*u4 + u1^2*u2^2*(u3 + u5)^3*u6 + (u1 + u3)^2*u4^2*u5^3*u6
      + u1*u2*u4*u5^2*u6*(3*u1*u3 + 2*u3^2 + 2*u3*u5 + 2*u1*u5);
pi3 = u1^3*u2^2*u3^3*u4 + u1^3*u2^2*(u3 + u5)^3*u6 + (u1 + u3)^3*u4^2*u5^3*u6
      + u1^2*u2*u4*u5^2*u6*c;
pi4 = u1^2*u2^2*u3^3*u4*(u1*u2*u3^3*u4 + 2*u1*u2*(u3 + u5)^3*u6 + c*u4*u5^2*u6)
      + u6^2*(u1*u2*(u3 + u5)^2 + (u1 + u3)*u4*u5^2)^3;
(u1*u2*u3^2*u4*u5/pi1, pi1^3/pi4, pi4/(pi1*pi2), pi2^3/(pi3*pi4), pi3/pi2,
 u2*u3^3*u4^2*u5^3*u6/pi3)
"""

_TEXTS = {"A2": _A2, "B2": _B2, "C2": _C2, "G2": _G2}
_M = {"A2": 3, "B2": 4, "C2": 4, "G2": 6}


def builtin_map(type_tag: str) -> TransitionMapDef:
    """Forward map from the chart of (1,2,1,...) to the chart of (2,1,2,...)."""
    if type_tag not in _TEXTS:
        raise KeyError(f"no builtin transition map for {type_tag!r}; choose from {sorted(_TEXTS)}")
    m = _M[type_tag]
    comps = parse_program(_TEXTS[type_tag], m)
    src = tuple(1 + (k % 2) for k in range(m))
    tgt = tuple(2 - (k % 2) for k in range(m))
    return TransitionMapDef(type_tag, src, tgt, tuple(comps), _TEXTS[type_tag].strip())


def custom_map(text: str, arity: int, type_tag: str = "custom") -> TransitionMapDef:
    comps = parse_program(text, arity)
    if len(comps) != arity:
        raise ValueError(f"expected {arity} components, got {len(comps)}")
    word = tuple(range(1, arity + 1))
    return TransitionMapDef(type_tag, word, word, tuple(comps), text)


def evaluate(tmap: TransitionMapDef, values: Sequence, semiring: str | Semiring | None = None) -> list:
    """Componentwise image of ``values``.

    The semiring is inferred from the value types (``Fraction``/``int`` ->
    rational, ``float``/float arrays -> float, :class:`Tropical` -> tropical)
    unless given explicitly.  Arrays evaluate elementwise.
    """
    values = list(values)
    if len(values) != tmap.arity:
        raise ValueError(f"{tmap.type_tag} map takes {tmap.arity} values, got {len(values)}")
    if semiring is None:
        sr = infer_semiring(values)
    else:
        sr = SEMIRINGS[semiring] if isinstance(semiring, str) else semiring
    wrapped = sr is TROPICAL and any(isinstance(v, Tropical) for v in values)
    if wrapped:
        values = [v.value for v in values]
    out = evaluate_exprs(tmap.components, values, sr)
    if wrapped:
        out = [Tropical(v) for v in out]
    return out


def tropical_limit_error(tmap: TransitionMapDef, x: Sequence[float], h: float, log_domain: bool = True) -> float:
    """max_j | -h log R_j(e^{-x/h}) - [R_j]_trop(x) |.

    With ``log_domain`` the float evaluation is carried out on logarithms
    (exactly the same quantity, immune to under/overflow).  Otherwise plain
    floats are used and :class:`TropicalOverflow` signals an out-of-range x/h.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x = [float(v) for v in x]
    trop = evaluate(tmap, x, TROPICAL)
    if log_domain:
        logs = evaluate(tmap, [-v / h for v in x], LOG)
        approx = [-h * v for v in logs]
    else:
        with np.errstate(over="raise", under="raise", divide="raise", invalid="raise"):
            try:
                vals = evaluate(tmap, [math.exp(-v / h) for v in x], FLOAT)
                approx = [-h * math.log(v) for v in vals]
            except (FloatingPointError, OverflowError, ValueError, ZeroDivisionError) as exc:
                raise TropicalOverflow(
                    f"float evaluation out of range at x/h up to {max(abs(v) for v in x) / h:.3g}; "
                    "use smaller |x| or larger h (or log_domain=True)"
                ) from exc
            if any(v == 0 or not math.isfinite(v) for v in vals):
                raise TropicalOverflow("float evaluation underflowed; use smaller |x| or larger h")
    return max(abs(a - t) for a, t in zip(approx, trop))


def tropical_error_bound(tmap: TransitionMapDef) -> float:
    """Constant L with tropical_limit_error <= L h for all x and h."""
    return max(tropical_error_constant(c) for c in tmap.components)


def numeric_inverse(
    tmap: TransitionMapDef,
    y: Sequence[float],
    x0: Sequence[float] | None = None,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> np.ndarray:
    """Solve evaluate(tmap, x) = y for positive x by damped Newton.

    Newton runs in logarithmic coordinates (keeps iterates positive) with a
    forward-difference Jacobian; steps are halved until the residual drops,
    at most 30 times.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("targets must be positive")
    m = tmap.arity
    u = np.log(np.ones(m) if x0 is None else np.asarray(x0, dtype=float))
    logy = np.log(y)

    def f(u):
        return np.log(np.array(evaluate(tmap, list(np.exp(u)), FLOAT), dtype=float)) - logy

    def rel_residual(u):
        img = np.array(evaluate(tmap, list(np.exp(u)), FLOAT), dtype=float)
        return np.max(np.abs(img - y)) / np.max(np.abs(y))

    r = f(u)
    for _ in range(max_iter):
        if rel_residual(u) <= tol:
            return np.exp(u)
        jac = np.empty((m, m))
        eps = 1e-7
        for k in range(m):
            du = np.zeros(m)
            du[k] = eps
            jac[:, k] = (f(u + du) - r) / eps
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("singular Jacobian") from exc
        norm = np.linalg.norm(r)
        lam = 1.0
        for _ in range(30):
            cand = u + lam * step
            rc = f(cand)
            if np.all(np.isfinite(rc)) and np.linalg.norm(rc) < norm:
                break
            lam /= 2
        else:
            raise NoConvergence("line search failed to reduce the residual")
        u, r = cand, rc
    if rel_residual(u) <= tol:
        return np.exp(u)
    raise NoConvergence(f"no convergence after {max_iter} iterations")


@dataclass
class InjectivityReport:
    type_tag: str
    box_limit: int
    n_points: int
    all_natural: bool
    n_collisions: int
    collisions: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.all_natural and self.n_collisions == 0


def box_points(m: int, box_limit: int) -> np.ndarray:
    """All points of {0, ..., box_limit}^m as an (N, m) int64 array, lexicographic."""
    grids = np.meshgrid(*[np.arange(box_limit + 1, dtype=np.int64)] * m, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def tropical_image(tmap: TransitionMapDef, points: np.ndarray) -> np.ndarray:
    cols = evaluate(tmap, [points[:, k] for k in range(tmap.arity)], TROPICAL)
    return np.stack([np.broadcast_to(c, points.shape[:1]) for c in cols], axis=1)


def tropical_injectivity_check(tmap: TransitionMapDef, box_limit: int) -> InjectivityReport:
    pts = box_points(tmap.arity, box_limit)
    img = tropical_image(tmap, pts)
    natural = bool(np.issubdtype(img.dtype, np.integer) and np.all(img >= 0))
    _, first, counts = np.unique(img, axis=0, return_index=True, return_counts=True)
    dup_rows = np.flatnonzero(counts > 1)
    collisions = []
    if dup_rows.size:
        uniq = np.unique(img, axis=0)
        for r in dup_rows[:20]:
            hits = np.flatnonzero(np.all(img == uniq[r], axis=1))
            collisions.append((tuple(int(v) for v in uniq[r]), [tuple(int(v) for v in pts[h]) for h in hits]))
    return InjectivityReport(
        tmap.type_tag, box_limit, len(pts), natural, int(np.sum(counts[counts > 1] - 1)), collisions
    )


def reversal_conjugate(tmap: TransitionMapDef, values: Sequence) -> list:
    """rev . R . rev; the inverse of R for the even-length rank-2 words."""
    return evaluate(tmap, list(values)[::-1])[::-1]


__all__ = [
    "TransitionMapDef",
    "builtin_map",
    "custom_map",
    "evaluate",
    "tropical_limit_error",
    "tropical_error_bound",
    "numeric_inverse",
    "tropical_injectivity_check",
    "InjectivityReport",
    "NoConvergence",
    "TropicalOverflow",
    "box_points",
    "tropical_image",
    "reversal_conjugate",
]
