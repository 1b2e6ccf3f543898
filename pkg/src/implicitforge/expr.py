"""Small real-valued expression DSL: AST, parser, printer, evaluator.

Grammar (see docs/grammar.md for the full EBNF)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?          # right-associative, binds tightest
    atom    := NUMBER | NAME "(" expr ")" | NAME | "(" expr ")"

Variables are ``x y z u v``; any other bare identifier is a named
parameter.  The function set is fixed: abs, sqrt, sin, cos, tan, cot,
asin, acos, atan, arccot, sign.

Evaluation is IEEE-flavoured with a single "undefined" value (NaN) that
propagates.  Division by zero, cot at zeros of sine, pow of a negative
base with a non-integer exponent, asin/acos outside [-1, 1] and sign(0)
are all undefined, and any non-finite intermediate (overflow included)
collapses to undefined as well.  arccot is the principal branch with
range (0, pi), computed as pi/2 - atan(v).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

import numpy as np

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Param",
    "Unary",
    "Binary",
    "ExprSyntaxError",
    "UnboundParameterError",
    "UnboundVariableError",
    "VARIABLES",
    "FUNCTIONS",
    "parse",
    "format_expr",
    "evaluate",
    "evaluate_array",
    "substitute",
    "free_names",
]

VARIABLES = ("x", "y", "z", "u", "v")

# Unary function names usable in source text ("neg" is the - operator).
FUNCTIONS = ("abs", "sqrt", "sin", "cos", "tan", "cot",
             "asin", "acos", "atan", "arccot", "sign")

_UNARY_OPS = ("neg",) + FUNCTIONS
_BINARY_OPS = ("add", "sub", "mul", "div", "pow")

_NAME_RE = re.compile(r"[a-zA-Z][a-zA-Z0-9_]*\Z")


class ExprSyntaxError(ValueError):
    """Parse failure; carries the byte offset and the expected tokens."""

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = expected
        detail = f"{message} at offset {offset}"
        if expected:
            detail += " (expected " + ", ".join(expected) + ")"
        super().__init__(detail)


class UnboundParameterError(ValueError):
    """An expression parameter has no binding."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound parameter '{name}'")


class UnboundVariableError(ValueError):
    """An expression variable has no value in this evaluation context."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"variable '{name}' is not bound in this context")


@dataclass(frozen=True)
class Const:
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if self.name not in VARIABLES:
            raise ValueError(f"unknown variable '{self.name}' (one of {VARIABLES})")


@dataclass(frozen=True)
class Param:
    name: str

    def __post_init__(self):
        if not _NAME_RE.match(self.name):
            raise ValueError(f"invalid parameter name '{self.name}'")
        if self.name in VARIABLES:
            raise ValueError(f"'{self.name}' is a reserved variable name")


@dataclass(frozen=True)
class Unary:
    op: str
    child: "Expr"

    def __post_init__(self):
        if self.op not in _UNARY_OPS:
            raise ValueError(f"unknown unary op '{self.op}'")


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"

    def __post_init__(self):
        if self.op not in _BINARY_OPS:
            raise ValueError(f"unknown binary op '{self.op}'")


Expr = Union[Const, Var, Param, Unary, Binary]


# ---------------------------------------------------------------------------
# Construction helpers.  These keep trees canonical: a negated constant is
# folded into the constant, so "-2" and Const(-2) are the same tree and the
# print/parse round trip stays structural.

def const(v: float) -> Const:
    return Const(v)


def var(name: str) -> Var:
    return Var(name)


def param(name: str) -> Param:
    return Param(name)


def neg(e: Expr) -> Expr:
    if isinstance(e, Const):
        return Const(-e.value)
    return Unary("neg", e)


def unary(op: str, e: Expr) -> Expr:
    if op == "neg":
        return neg(e)
    return Unary(op, e)


def add(l: Expr, r: Expr) -> Expr:
    return Binary("add", l, r)


def sub(l: Expr, r: Expr) -> Expr:
    return Binary("sub", l, r)


def mul(l: Expr, r: Expr) -> Expr:
    return Binary("mul", l, r)


def div(l: Expr, r: Expr) -> Expr:
    return Binary("div", l, r)


def pow_(l: Expr, r: Expr) -> Expr:
    return Binary("pow", l, r)


# ---------------------------------------------------------------------------
# Lexer / parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)
  | (?P<name>[a-zA-Z][a-zA-Z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(source: str) -> Iterator[tuple[str, str, int]]:
    pos = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos)
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        yield kind, m.group(), m.start()
    yield "end", "", n


class _Parser:
    def __init__(self, source: str):
        self.tokens = list(_tokenize(source))
        self.i = 0

    @property
    def cur(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def accept_op(self, *ops: str) -> str | None:
        kind, text, _ = self.cur
        if kind == "op" and text in ops:
            self.advance()
            return text
        return None

    def expect_op(self, op: str) -> None:
        kind, text, offset = self.cur
        if kind != "op" or text != op:
            raise ExprSyntaxError("syntax error", offset, (f"'{op}'",))
        self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        kind, _, offset = self.cur
        if kind != "end":
            raise ExprSyntaxError(
                "unexpected trailing input", offset, ("operator", "end of input")
            )
        return e

    def expr(self) -> Expr:
        e = self.term()
        while (op := self.accept_op("+", "-")) is not None:
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while (op := self.accept_op("*", "/")) is not None:
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def unary(self) -> Expr:
        if self.accept_op("-"):
            return neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.accept_op("^"):
            return pow_(base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, text, offset = self.cur
        if kind == "number":
            self.advance()
            return Const(float(text))
        if kind == "name":
            self.advance()
            if self.accept_op("("):
                if text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function '{text}'", offset)
                arg = self.expr()
                self.expect_op(")")
                return Unary(text, arg)
            if text in VARIABLES:
                return Var(text)
            return Param(text)
        if kind == "op" and text == "(":
            self.advance()
            e = self.expr()
            self.expect_op(")")
            return e
        raise ExprSyntaxError(
            "syntax error", offset, ("number", "name", "'('", "'-'")
        )


def parse(source: str) -> Expr:
    """Parse DSL text into an expression tree.

    Whitespace-insensitive.  Raises :class:`ExprSyntaxError` with a byte
    offset on malformed input or an unknown function name.
    """
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# Printer

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5

_BIN_INFO = {
    "add": ("+", _PREC_ADD, _PREC_ADD, _PREC_ADD + 1),
    "sub": ("-", _PREC_ADD, _PREC_ADD, _PREC_ADD + 1),
    "mul": ("*", _PREC_MUL, _PREC_MUL, _PREC_MUL + 1),
    "div": ("/", _PREC_MUL, _PREC_MUL, _PREC_MUL + 1),
    # pow: base must be an atom, exponent re-enters at unary level
    "pow": ("^", _PREC_POW, _PREC_ATOM, _PREC_NEG),
}


def _const_text(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _fmt(e: Expr, min_prec: int) -> str:
    if isinstance(e, Const):
        text = _const_text(e.value)
        prec = _PREC_NEG if e.value < 0 else _PREC_ATOM
    elif isinstance(e, (Var, Param)):
        text, prec = e.name, _PREC_ATOM
    elif isinstance(e, Unary):
        if e.op == "neg":
            text, prec = "-" + _fmt(e.child, _PREC_NEG), _PREC_NEG
        else:
            text, prec = f"{e.op}({_fmt(e.child, 0)})", _PREC_ATOM
    else:
        sym, prec, lp, rp = _BIN_INFO[e.op]
        left = _fmt(e.left, lp)
        right = _fmt(e.right, rp)
        if right.startswith("-"):
            right = f"({right})"
        text = f"{left}{sym}{right}"
    if prec < min_prec:
        return f"({text})"
    return text


def format_expr(e: Expr) -> str:
    """Render a tree as canonical DSL text; parse(format_expr(e)) == e."""
    return _fmt(e, 0)


# ---------------------------------------------------------------------------
# Evaluation

_NAN = np.float64(np.nan)


def _check_params(params: Mapping[str, float]) -> None:
    for name, value in params.items():
        if not np.isfinite(value):
            raise ValueError(f"parameter '{name}' must be a finite real, got {value}")


def _clean(v):
    """Collapse non-finite results (overflow, division blowups) to NaN."""
    if np.ndim(v) == 0:
        return v if np.isfinite(v) else _NAN
    v[~np.isfinite(v)] = np.nan
    return v


def _eval(e: Expr, env: Mapping[str, np.ndarray], params: Mapping[str, float]):
    if isinstance(e, Const):
        return _clean(np.float64(e.value))
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Param):
        try:
            value = params[e.name]
        except KeyError:
            raise UnboundParameterError(e.name) from None
        return _clean(np.float64(value))
    if isinstance(e, Unary):
        v = _eval(e.child, env, params)
        op = e.op
        if op == "neg":
            return -v
        if op == "abs":
            return np.abs(v)
        if op == "sqrt":
            return np.sqrt(v)
        if op == "sin":
            return np.sin(v)
        if op == "cos":
            return np.cos(v)
        if op == "tan":
            return np.tan(v)
        if op == "cot":
            return _clean(np.cos(v) / np.sin(v))
        if op == "asin":
            return np.arcsin(v)
        if op == "acos":
            return np.arccos(v)
        if op == "atan":
            return np.arctan(v)
        if op == "arccot":
            return np.pi / 2 - np.arctan(v)
        if op == "sign":
            return np.where(v == 0, _NAN, np.sign(v))
        raise AssertionError(op)
    l = _eval(e.left, env, params)
    r = _eval(e.right, env, params)
    op = e.op
    if op == "add":
        return _clean(l + r)
    if op == "sub":
        return _clean(l - r)
    if op == "mul":
        return _clean(l * r)
    if op == "div":
        return _clean(np.divide(l, r))
    if op == "pow":
        p = np.power(l, r)
        # np.power(1, nan) and np.power(nan, 0) are 1; undefined must propagate
        p = np.where(np.isnan(l) | np.isnan(r), _NAN, p)
        return _clean(p)
    raise AssertionError(op)


def evaluate_array(
    e: Expr,
    coords: Mapping[str, np.ndarray],
    params: Mapping[str, float] | None = None,
) -> np.ndarray:
    """Evaluate over arrays of coordinate values (all the same shape).

    Returns a float64 array; undefined points are NaN.  Pure and
    reentrant: safe to call from many threads at once.
    """
    params = params or {}
    _check_params(params)
    env = {name: np.asarray(vals, dtype=np.float64) for name, vals in coords.items()}
    with np.errstate(all="ignore"):
        out = np.asarray(_eval(e, env, params), dtype=np.float64)
    if env:
        shape = np.broadcast_shapes(*(a.shape for a in env.values()))
        if out.shape != shape:
            out = np.broadcast_to(out, shape).copy()
    return out


def evaluate(
    e: Expr,
    x: float,
    y: float,
    z: float,
    params: Mapping[str, float] | None = None,
) -> float:
    """Evaluate at a single (x, y, z) point; NaN means undefined.

    Unbound parameters raise :class:`UnboundParameterError` (an error,
    distinct from an undefined result).
    """
    params = params or {}
    _check_params(params)
    env = {"x": np.float64(x), "y": np.float64(y), "z": np.float64(z)}
    with np.errstate(all="ignore"):
        return float(_eval(e, env, params))


def substitute(e: Expr, bindings: Mapping[str, Expr]) -> Expr:
    """Replace bound parameters with copies of their expressions."""
    if isinstance(e, Param) and e.name in bindings:
        return bindings[e.name]
    if isinstance(e, Unary):
        child = substitute(e.child, bindings)
        return e if child is e.child else unary(e.op, child)
    if isinstance(e, Binary):
        left = substitute(e.left, bindings)
        right = substitute(e.right, bindings)
        if left is e.left and right is e.right:
            return e
        return Binary(e.op, left, right)
    return e


def free_names(e: Expr) -> tuple[set[str], set[str]]:
    """Exact sets of (variable names, parameter names) appearing in e."""
    variables: set[str] = set()
    params: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            variables.add(node.name)
        elif isinstance(node, Param):
            params.add(node.name)
        elif isinstance(node, Unary):
            stack.append(node.child)
        elif isinstance(node, Binary):
            stack.append(node.left)
            stack.append(node.right)
    return variables, params
