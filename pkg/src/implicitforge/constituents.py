"""Builders for the constituent waveforms used inside implicit equations.

Each builder returns an :class:`~implicitforge.expr.Expr` tree.  The
piecewise/pulse-train forms come in two interchangeable flavours: a
windowed sum of "gate" terms, and closed trigonometric identities built
on the principal arccot branch.  A gate ``(1 - (x-a)(x-b)/(|x-a||x-b|))``
is 2 strictly inside (a, b), 0 outside, and undefined at a and b, so
every knot of these waveforms evaluates to the undefined value — the
samplers treat that as "no data" rather than picking a side.

The ``*_direct`` functions are plain numpy closed forms (floor/frac
arithmetic) for the same shapes, kept deliberately independent of the
expression route so the two can be checked against each other.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .expr import Const, Expr, Unary, Var, add, div, mul, pow_, sub

__all__ = [
    "piecewise_linear",
    "sawtooth",
    "triangular",
    "staircase",
    "rectangular",
    "power_sum",
    "piecewise_linear_direct",
    "sawtooth_direct",
    "triangular_direct",
    "staircase_direct",
    "rectangular_direct",
]

_PI = math.pi
_X = Var("x")


def _shift(a: float) -> Expr:
    """x - a, with the a == 0 case folded to x."""
    if a == 0:
        return _X
    return sub(_X, Const(a))


def _gate(a: float, b: float) -> Expr:
    """(1 - (x-a)(x-b)/(|x-a||x-b|)): 2 inside (a,b), 0 outside."""
    num = mul(_shift(a), _shift(b))
    den = mul(Unary("abs", _shift(a)), Unary("abs", _shift(b)))
    return sub(Const(1.0), div(num, den))


def _sum(terms: Sequence[Expr]) -> Expr:
    total = terms[0]
    for t in terms[1:]:
        total = add(total, t)
    return total


def _scaled_x(scale: float, r: float) -> Expr:
    """scale*x/r, folding away division by one."""
    sx = mul(Const(scale), _X)
    if r == 1:
        return sx
    return div(sx, Const(r))


def _check_pulse(r: float, p: int) -> None:
    if not (r > 0):
        raise ValueError(f"period r must be positive, got {r}")
    if p < 1 or int(p) != p:
        raise ValueError(f"window count p must be a positive integer, got {p}")


def _gate_ramp_sum(r: float, p: int) -> list[Expr]:
    """One gate*(x - r(i-1)) term per piece, i = -p .. p."""
    return [
        mul(_gate(r * (i - 1), r * i), _shift(r * (i - 1)))
        for i in range(-p, p + 1)
    ]


def piecewise_linear(segments: Sequence[tuple[float, float]]) -> Expr:
    """Concatenate chords through consecutive points into one expression.

    ``segments`` is the ordered point list (x_i, y_i) with strictly
    increasing x and at least two points.  The result equals each chord
    strictly inside its span and is undefined exactly at the knots.
    """
    pts = [(float(x), float(y)) for x, y in segments]
    if len(pts) < 2:
        raise ValueError("need at least two points (one segment)")
    xs = [x for x, _ in pts]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValueError("x coordinates must be strictly increasing")
    terms = []
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        chord = add(mul(Const(y1 - y0), _X), Const(y0 * x1 - y1 * x0))
        terms.append(div(mul(_gate(x0, x1), chord), Const(x1 - x0)))
    return mul(Const(0.5), _sum(terms))


def sawtooth(variant: str, r: float, p: int = 10) -> Expr:
    """Rising 0..1 ramp train with period r, undefined at x = k*r.

    variant "sum" is the windowed gate sum, valid on [-(p+1)r, p*r];
    variant "trig" is arccot(cot(pi*x/r))/pi, valid everywhere.
    """
    _check_pulse(r, p)
    if variant == "sum":
        return mul(Const(1.0 / (2.0 * r)), _sum(_gate_ramp_sum(r, p)))
    if variant == "trig":
        return mul(Const(1.0 / _PI), Unary("arccot", Unary("cot", _scaled_x(_PI, r))))
    raise ValueError(f"unknown sawtooth variant '{variant}'")


def triangular(variant: str, r: float, p: int = 10) -> Expr:
    """Triangle pulse train with period r, values in [0, 1].

    Variants "sum" and "arccot" ramp 1 -> 0 -> 1 per period; variant
    "acos" is the same shape shifted half a period (0 -> 1 -> 0).
    """
    _check_pulse(r, p)
    if variant == "sum":
        terms = [mul(Const(1.0 / r), t) for t in _gate_ramp_sum(r, p)]
        return Unary("abs", sub(_sum(terms), Const(1.0)))
    if variant == "acos":
        return mul(
            Const(1.0 / _PI), Unary("acos", Unary("cos", _scaled_x(2.0 * _PI, r)))
        )
    if variant == "arccot":
        folded = mul(
            Const(2.0 / _PI), Unary("arccot", Unary("cot", _scaled_x(_PI, r)))
        )
        return Unary("abs", sub(folded, Const(1.0)))
    raise ValueError(f"unknown triangular variant '{variant}'")


def staircase(variant: str, h: float, r: float, p: int = 10) -> Expr:
    """Stairs of height h and tread width r; equals h*floor(x/r) off knots."""
    _check_pulse(r, p)
    if variant == "sum":
        ramp = mul(Const(0.5), _sum(_gate_ramp_sum(r, p)))
        return mul(Const(h / r), sub(_X, ramp))
    if variant == "trig":
        frac = mul(Const(1.0 / _PI), Unary("arccot", Unary("cot", _scaled_x(_PI, r))))
        return mul(Const(h), sub(div(_X, Const(r)), frac))
    raise ValueError(f"unknown staircase variant '{variant}'")


def rectangular(variant: str, t: float, r: float = 1.0) -> Expr:
    """Binary pulse trains controlled by the offset/duty parameter t.

    variant "sign":   1/2 - sign(sin(pi*x) + t)/2, values in {0, 1};
                      requires |t| < 1.
    variant "arccot": t/r - arccot(cot(pi(x+t)/r))/pi + arccot(cot(pi x/r))/pi,
                      values in {0, 1} off knots; requires t/r not integral.
    variant "ratio":  ((asin sin / atan tan) quadrant product - 1)/2, values
                      in {-1, 0} off singularities; requires t not integral.
                      This variant has no r (unit period).
    """
    t = float(t)
    if variant == "sign":
        if not abs(t) < 1:
            raise ValueError(f"sign variant requires |t| < 1, got t={t}")
        pulse = Unary("sign", add(Unary("sin", mul(Const(_PI), _X)), Const(t)))
        return sub(Const(0.5), mul(Const(0.5), pulse))
    if variant == "arccot":
        if not (r > 0):
            raise ValueError(f"period r must be positive, got {r}")
        if (t / r).is_integer():
            raise ValueError(f"arccot variant requires t/r not integral, got {t}/{r}")
        shifted = div(mul(Const(_PI), add(_X, Const(t))), Const(r))
        a_shift = mul(Const(1.0 / _PI), Unary("arccot", Unary("cot", shifted)))
        a_base = mul(Const(1.0 / _PI), Unary("arccot", Unary("cot", _scaled_x(_PI, r))))
        return add(sub(Const(t / r), a_shift), a_base)
    if variant == "ratio":
        if t.is_integer():
            raise ValueError(f"ratio variant requires non-integral t, got {t}")

        def wave(e: Expr) -> tuple[Expr, Expr]:
            return Unary("asin", Unary("sin", e)), Unary("atan", Unary("tan", e))

        asin0, atan0 = wave(mul(Const(_PI), _X))
        asin1, atan1 = wave(mul(Const(_PI), add(_X, Const(t))))
        product = mul(div(asin0, atan0), div(atan1, asin1))
        return mul(Const(0.5), sub(product, Const(1.0)))
    raise ValueError(f"unknown rectangular variant '{variant}'")


def power_sum(terms: Iterable[Sequence[float]]) -> Expr:
    """Sum of a * x^b * y^c * z^d monomials; empty input is the constant 0.

    Each term is (a, b, c, d) or (a, b, c, d, wrap_abs); with wrap_abs
    set, every variable base in that term becomes abs(var), mirroring
    the |x|^lambda usage needed for fractional exponents.
    """
    built: list[Expr] = []
    for term in terms:
        if len(term) == 4:
            a, b, c, d = term
            wrap_abs = False
        elif len(term) == 5:
            a, b, c, d, wrap_abs = term
        else:
            raise ValueError(f"term must be (a, b, c, d[, wrap_abs]), got {term!r}")
        factors: list[Expr] = []
        for name, exponent in (("x", b), ("y", c), ("z", d)):
            if exponent == 0:
                continue
            base: Expr = Var(name)
            if wrap_abs:
                base = Unary("abs", base)
            factors.append(base if exponent == 1 else pow_(base, Const(exponent)))
        if not factors:
            built.append(Const(a))
            continue
        product = factors[0]
        for f in factors[1:]:
            product = mul(product, f)
        built.append(product if a == 1 else mul(Const(a), product))
    if not built:
        return Const(0.0)
    return _sum(built)


# ---------------------------------------------------------------------------
# Closed-form direct evaluators (floor/frac route, used as oracles)

def piecewise_linear_direct(x, segments) -> np.ndarray:
    """Chord values inside each span, 0 outside, NaN at knots."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    pts = [(float(px), float(py)) for px, py in segments]
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        inside = (x > x0) & (x < x1)
        out = np.where(inside, y0 + (y1 - y0) * (x - x0) / (x1 - x0), out)
    knots = np.isin(x, [px for px, _ in pts])
    return np.where(knots, np.nan, out)


def sawtooth_direct(x, r: float) -> np.ndarray:
    """Fractional part of x/r (off-knot values of both sawtooth variants)."""
    return np.mod(np.asarray(x, dtype=np.float64) / r, 1.0)


def triangular_direct(x, r: float, variant: str = "arccot") -> np.ndarray:
    s = sawtooth_direct(x, r)
    if variant in ("sum", "arccot"):
        return np.abs(2.0 * s - 1.0)
    if variant == "acos":
        return 1.0 - np.abs(2.0 * s - 1.0)
    raise ValueError(f"unknown triangular variant '{variant}'")


def staircase_direct(x, h: float, r: float) -> np.ndarray:
    return h * np.floor(np.asarray(x, dtype=np.float64) / r)


def rectangular_direct(variant: str, x, t: float, r: float = 1.0) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if variant == "sign":
        level = np.sin(_PI * x) + t
        return np.where(level == 0, np.nan, np.where(level < 0, 1.0, 0.0))
    if variant == "arccot":
        return t / r - sawtooth_direct(x + t, r) + sawtooth_direct(x, r)
    if variant == "ratio":
        quadrants = np.sign(np.cos(_PI * x)) * np.sign(np.cos(_PI * (x + t)))
        return (quadrants - 1.0) / 2.0
    raise ValueError(f"unknown rectangular variant '{variant}'")
