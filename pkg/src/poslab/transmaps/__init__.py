"""Subtraction-free transition maps over rational, float and tropical semirings."""

from .expr import (
    FLOAT,
    LOG,
    RATIONAL,
    TROPICAL,
    Add,
    Const,
    Div,
    Expr,
    MixedSemiringError,
    Mul,
    Semiring,
    Tropical,
    Var,
    expand,
)
from .maps import (
    InjectivityReport,
    NoConvergence,
    TransitionMapDef,
    TropicalOverflow,
    box_points,
    builtin_map,
    custom_map,
    evaluate,
    numeric_inverse,
    reversal_conjugate,
    tropical_error_bound,
    tropical_image,
    tropical_injectivity_check,
    tropical_limit_error,
)
from .parser import ExprSyntaxError, MinusSignRejected, UnknownVariable, parse_expr, parse_program

BUILTIN_TYPES = ("A2", "B2", "C2", "G2")
