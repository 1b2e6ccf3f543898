"""implicitforge: implicit 3D surface generation toolkit.

Pieces: an expression DSL (:mod:`implicitforge.expr`), builders for the
pulse-train and piecewise constituent functions
(:mod:`implicitforge.constituents`), an implicit-family template and a
preset catalog (:mod:`implicitforge.family`), grid sampling with a
binary field format (:mod:`implicitforge.field`), marching-cubes meshing
and mesh export (:mod:`implicitforge.mesh`), and parameter-sensitivity
sweeps (:mod:`implicitforge.sensitivity`).
"""

from .expr import (
    Binary,
    Const,
    Expr,
    ExprSyntaxError,
    Param,
    Unary,
    UnboundParameterError,
    UnboundVariableError,
    Var,
    evaluate,
    evaluate_array,
    format_expr,
    free_names,
    parse,
    substitute,
)

__version__ = "0.1.0"

__all__ = [
    "Binary",
    "Const",
    "Expr",
    "ExprSyntaxError",
    "Param",
    "Unary",
    "UnboundParameterError",
    "UnboundVariableError",
    "Var",
    "evaluate",
    "evaluate_array",
    "format_expr",
    "free_names",
    "parse",
    "substitute",
    "__version__",
]
