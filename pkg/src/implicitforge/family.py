"""Implicit-family template and the built-in scene catalog.

``build_family`` expands a declarative configuration into one implicit
expression of the shape::

    sum_i  prod_m  (A/D) * (B/E) * (C/F)  -  d

where each element is built from a power-sum P and exponents:
A = P1^l1 and D = P2^l2; B = (Ht(P3^l3))^mu1 and E = (Ht(P4^l4))^mu2;
C = (Gt(Ht(P5^l5 / P6^l6)))^mu3 and F = (Gt(Ht(P7^l7 / P8^l8)))^mu4.
Ht and Gt are trig or inverse-trig wrappers (or identity), and any
element may additionally be wrapped in abs().  A missing P makes its
element the constant 1.  ("F" doubles as both the element name and the
whole function in this template; internally the element is f_elem.)

The preset catalog pins down ready-to-run scenes: three implicit
equations with fixed working spaces (eqA, eqB-I3/I4/I5, eqC), the
eight-piece 1D chord curve (fig1-curve), and a quantized parametric
patch (cube-sign).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import json
from typing import Mapping

from .constituents import power_sum
from .expr import Const, Expr, Unary, div, free_names, mul, parse, pow_, sub, add
from .field import GridSpec
from .mesh import ParametricSpec

__all__ = [
    "FamilyFactor",
    "FamilyConfig",
    "SceneSpec",
    "ParametricScene",
    "UnknownPresetError",
    "build_family",
    "config_from_json",
    "preset",
    "preset_names",
]

_WRAPPERS = ("sin", "cos", "tan", "cot", "asin", "acos", "atan", "arccot", "identity")
_ELEMENTS = ("A", "B", "C", "D", "E", "F")

PowerTerms = tuple  # tuple of (a, b, c, d[, wrap_abs]) monomial specs


@dataclass(frozen=True)
class FamilyFactor:
    """One factor of the inner product: eight power specs plus exponents."""

    p1: PowerTerms | None = None
    p2: PowerTerms | None = None
    p3: PowerTerms | None = None
    p4: PowerTerms | None = None
    p5: PowerTerms | None = None
    p6: PowerTerms | None = None
    p7: PowerTerms | None = None
    p8: PowerTerms | None = None
    l1: float = 1.0
    l2: float = 1.0
    l3: float = 1.0
    l4: float = 1.0
    l5: float = 1.0
    l6: float = 1.0
    l7: float = 1.0
    l8: float = 1.0
    mu1: float = 1.0
    mu2: float = 1.0
    mu3: float = 1.0
    mu4: float = 1.0
    ht: str = "identity"
    gt: str = "identity"
    abs_elems: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.ht not in _WRAPPERS:
            raise ValueError(f"Ht must be one of {_WRAPPERS}, got '{self.ht}'")
        if self.gt not in _WRAPPERS:
            raise ValueError(f"Gt must be one of {_WRAPPERS}, got '{self.gt}'")
        bad = set(self.abs_elems) - set(_ELEMENTS)
        if bad:
            raise ValueError(f"abs flags must name elements {_ELEMENTS}, got {sorted(bad)}")
        for name in ("l1", "l2", "l3", "l4", "l5", "l6", "l7", "l8",
                     "mu1", "mu2", "mu3", "mu4"):
            value = getattr(self, name)
            if not (value == value and abs(value) != float("inf")):
                raise ValueError(f"exponent {name} must be finite, got {value}")


@dataclass(frozen=True)
class FamilyConfig:
    """Constant offset d plus, per outer term, a nonempty factor list."""

    d: float
    terms: tuple[tuple[FamilyFactor, ...], ...]

    def __post_init__(self):
        if not self.terms or any(len(fs) == 0 for fs in self.terms):
            raise ValueError("terms must be a nonempty list of nonempty factor lists")


def _powered(terms: PowerTerms | None, exponent: float) -> Expr | None:
    if terms is None:
        return None
    base = power_sum(terms)
    return base if exponent == 1 else pow_(base, Const(exponent))


def _wrap(fname: str, e: Expr) -> Expr:
    return e if fname == "identity" else Unary(fname, e)


def _mu(e: Expr, exponent: float) -> Expr:
    return e if exponent == 1 else pow_(e, Const(exponent))


def _maybe_abs(e: Expr | None, name: str, flags: frozenset[str]) -> Expr | None:
    if e is not None and name in flags:
        return Unary("abs", e)
    return e


def _ratio(num: Expr | None, den: Expr | None) -> Expr | None:
    if num is None and den is None:
        return None
    if num is None:
        num = Const(1.0)
    return num if den is None else div(num, den)


def _factor_expr(f: FamilyFactor) -> Expr:
    a_elem = _powered(f.p1, f.l1)
    d_elem = _powered(f.p2, f.l2)

    def folded(p, lam, mu):
        inner = _powered(p, lam)
        if inner is None:
            return None
        return _mu(_wrap(f.ht, inner), mu)

    b_elem = folded(f.p3, f.l3, f.mu1)
    e_elem = folded(f.p4, f.l4, f.mu2)

    def doubly(p_num, l_num, p_den, l_den, mu):
        ratio = _ratio(_powered(p_num, l_num), _powered(p_den, l_den))
        if ratio is None:
            return None
        return _mu(_wrap(f.gt, _wrap(f.ht, ratio)), mu)

    c_elem = doubly(f.p5, f.l5, f.p6, f.l6, f.mu3)
    f_elem = doubly(f.p7, f.l7, f.p8, f.l8, f.mu4)

    a_elem = _maybe_abs(a_elem, "A", f.abs_elems)
    b_elem = _maybe_abs(b_elem, "B", f.abs_elems)
    c_elem = _maybe_abs(c_elem, "C", f.abs_elems)
    d_elem = _maybe_abs(d_elem, "D", f.abs_elems)
    e_elem = _maybe_abs(e_elem, "E", f.abs_elems)
    f_elem = _maybe_abs(f_elem, "F", f.abs_elems)

    pieces = [
        r for r in (
            _ratio(a_elem, d_elem),
            _ratio(b_elem, e_elem),
            _ratio(c_elem, f_elem),
        ) if r is not None
    ]
    if not pieces:
        return Const(1.0)
    out = pieces[0]
    for piece in pieces[1:]:
        out = mul(out, piece)
    return out


def build_family(cfg: FamilyConfig) -> Expr:
    """Expand a family configuration into a single implicit expression."""
    term_exprs = []
    for factors in cfg.terms:
        term = _factor_expr(factors[0])
        for f in factors[1:]:
            term = mul(term, _factor_expr(f))
        term_exprs.append(term)
    total = term_exprs[0]
    for t in term_exprs[1:]:
        total = add(total, t)
    if cfg.d == 0:
        return total
    return sub(total, Const(cfg.d))


# ---------------------------------------------------------------------------
# JSON configuration (fixed keys: d, terms[][].{P1..P8, l1..l8, mu1..mu4,
# Ht, Gt, abs}); see docs/formats.md.

_JSON_KEYS = (
    {f"P{i}" for i in range(1, 9)}
    | {f"l{i}" for i in range(1, 9)}
    | {f"mu{i}" for i in range(1, 5)}
    | {"Ht", "Gt", "abs"}
)


def _factor_from_json(obj, where: str) -> FamilyFactor:
    if not isinstance(obj, dict):
        raise ValueError(f"{where}: factor must be an object")
    unknown = set(obj) - _JSON_KEYS
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for i in range(1, 9):
        terms = obj.get(f"P{i}")
        if terms is not None:
            if not isinstance(terms, list):
                raise ValueError(f"{where}: P{i} must be a list of monomial terms")
            kwargs[f"p{i}"] = tuple(tuple(t) for t in terms)
        lam = obj.get(f"l{i}")
        if lam is not None:
            kwargs[f"l{i}"] = float(lam)
    for i in range(1, 5):
        mu = obj.get(f"mu{i}")
        if mu is not None:
            kwargs[f"mu{i}"] = float(mu)
    kwargs["ht"] = obj.get("Ht", "identity")
    kwargs["gt"] = obj.get("Gt", "identity")
    kwargs["abs_elems"] = frozenset(obj.get("abs", ()))
    return FamilyFactor(**kwargs)


def config_from_json(text: str) -> FamilyConfig:
    """Parse the documented JSON schema into a FamilyConfig."""
    obj = json.loads(text)
    if not isinstance(obj, dict) or "terms" not in obj:
        raise ValueError("config must be an object with 'd' and 'terms'")
    terms = obj["terms"]
    if not isinstance(terms, list):
        raise ValueError("'terms' must be a list of factor lists")
    parsed = []
    for i, factors in enumerate(terms):
        if not isinstance(factors, list):
            raise ValueError(f"terms[{i}] must be a list of factors")
        parsed.append(tuple(
            _factor_from_json(f, f"terms[{i}][{m}]") for m, f in enumerate(factors)
        ))
    return FamilyConfig(d=float(obj.get("d", 0.0)), terms=tuple(parsed))


# ---------------------------------------------------------------------------
# Scenes and presets


@dataclass
class SceneSpec:
    """An implicit expression plus its working space and bound parameters."""

    expr: Expr
    grid: GridSpec
    params: dict[str, float] = field(default_factory=dict)
    iso: float = 0.0
    name: str = ""

    def __post_init__(self):
        variables, wanted = free_names(self.expr)
        extra = variables - {"x", "y", "z"}
        if extra:
            raise ValueError(f"scene expression may only use x, y, z; found {sorted(extra)}")
        missing = wanted - set(self.params)
        if missing:
            raise ValueError(f"scene leaves parameters unbound: {sorted(missing)}")


@dataclass
class ParametricScene:
    """A quantized parametric patch preset (meshes directly, no field)."""

    spec: ParametricSpec
    name: str = ""


class UnknownPresetError(ValueError):
    def __init__(self, name: str):
        super().__init__(
            f"unknown preset '{name}' (known: {', '.join(preset_names())})"
        )


# Sharp shell plus cubed arctangent folds; high sensitivity to m near 0.85.
_EQA_TEXT = """
(abs(x)^3.3 + abs(y)^3.3 + abs(z)^3.3 - 600)
+ (atan(tan(1 - abs(x)^0.31 + 5.76*abs(x)^1.38/abs(abs(x)^1.3 + abs(y)^1.3 + abs(z)^1.3)))^3
 + atan(tan(1 - abs(y)^0.31 + 5.76*abs(y)^1.38/abs(abs(x)^1.3 + abs(y)^1.3 + abs(z)^1.3)))^3
 + atan(tan(1 - abs(z)^0.31 + 5.76*abs(z)^1.38/abs(abs(x)^1.3 + abs(y)^1.3 + abs(z)^1.3)))^3)^3
- 0.51*((abs(x)^0.3/abs(cot(m*x)))^0.3
      + (abs(y)^0.3/abs(cot(m*y)))^0.3
      + (abs(z)^0.3/abs(cot(m*z)))^0.3)^3
+ 100
"""

# Quadric-times-power shell plus a cubed sum of folded ratios; singular on
# the coordinate planes where its inner denominators vanish.  The
# cos(0.1*y)^-1 factor appears in all three folded terms.
_EQB_TEXT = """
(1/24.4)*(x^2 + y^2 + z^2 - 5)*(abs(x)^0.13*abs(y)^0.13*abs(z)^0.13 - 5)
+ (abs(cos(2*x))*atan(tan(12*(x^2 + abs(y)^2 + z^2)/(x^2*y^2 + z^2)))^2*cos(0.1*y)^-1
 + abs(cos(2*y))*atan(tan(12*(y^2 + abs(z)^2 + x^2)/(x^2 + y^2*z^2)))^2*cos(0.1*y)^-1
 + abs(cos(2*z))*atan(tan(12*(z^2 + abs(x)^2 + y^2)/(y^2 + x^2*z^2)))^2*cos(0.1*y)^-1)^3
- 0.135
"""

# Folded cosine/sine lattice against a drifting cubic; low sensitivity to m.
_EQC_TEXT = """
(abs(cos(0.7*m*x^-1))/cos(0.003*x^2))^10
+ abs(sin(0.7*m*y))^10*abs(sin(0.7*m*z))^10/(cos(0.003*y^2)^10*cos(0.003*z^2)^10)
- 0.02*(x^3 + y^2 + z^2)
"""

# Eight chords concatenated through gate terms, written out longhand
# (the second block keeps its bare "6 - gate" and "-5*gate" pieces).
_FIG1_TEXT = """
0.5*((1 - (x-1)*(x-2)/(abs(x-1)*abs(x-2)))*(x-1)
   + (1 - (x-2)*(x-3)/(abs(x-2)*abs(x-3)))*(2*x-3)
   + (1 - (x-3)*(x-4)/(abs(x-3)*abs(x-4)))*(3*x-6)
   + (1 - (x-4)*(x-5)/(abs(x-4)*abs(x-5)))*(-4*x+22)
   + (1 - (x-5)*(x-7)/(abs(x-5)*abs(x-7)))*(1/2*x+9/2)
   + 6 - (x-7)*(x-9)/(abs(x-7)*abs(x-9))
   + (1 - (x-9)*(x-10)/(abs(x-9)*abs(x-10)))*(-x+10)
   - 5*(x-10)*(x-10.5)/(abs(x-10)*abs(x-10.5)))
"""


def _cube_grid(half: float, n: int) -> GridSpec:
    return GridSpec(-half, half, -half, half, -half, half, n, n, n)


@lru_cache(maxsize=None)
def _catalog() -> dict:
    eqa = parse(_EQA_TEXT)
    eqb = parse(_EQB_TEXT)
    eqc = parse(_EQC_TEXT)
    fig1 = parse(_FIG1_TEXT)
    cube = ParametricSpec(
        parse("cos(3.141592653589793*u)"),
        parse("cos(3.141592653589793*v)"),
        parse("cos(3.141592653589793*(u+v))"),
        u_min=0.02, u_max=1.98, nu=64,
        v_min=0.02, v_max=1.98, nv=64,
        sign_axes=(True, True, True),
    )
    return {
        "eqA": lambda: SceneSpec(eqa, _cube_grid(155.0, 82), {"m": 0.851}, name="eqA"),
        "eqB-I3": lambda: SceneSpec(eqb, _cube_grid(7.0, 34), name="eqB-I3"),
        "eqB-I4": lambda: SceneSpec(eqb, _cube_grid(7.05, 34), name="eqB-I4"),
        "eqB-I5": lambda: SceneSpec(eqb, _cube_grid(7.05, 33), name="eqB-I5"),
        "eqC": lambda: SceneSpec(eqc, _cube_grid(10.0, 64), {"m": 0.25}, name="eqC"),
        "fig1-curve": lambda: SceneSpec(
            fig1, GridSpec(0.5, 11.0, -0.5, 0.5, -0.5, 0.5, 421, 2, 2),
            name="fig1-curve",
        ),
        "cube-sign": lambda: ParametricScene(cube, name="cube-sign"),
    }


def preset_names() -> tuple[str, ...]:
    return tuple(_catalog())


def preset(name: str) -> SceneSpec | ParametricScene:
    """Fetch a catalog scene by name; raises UnknownPresetError otherwise.

    Parameters in the returned scene (eqA's and eqC's m) are default
    bindings ready to override per run or sweep.
    """
    try:
        builder = _catalog()[name]
    except KeyError:
        raise UnknownPresetError(name) from None
    return builder()
