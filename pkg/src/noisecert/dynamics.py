"""Piecewise monotone interval maps with certified evaluation and inversion.

A map is a list of branches.  Each branch carries a closed-form expression in
the variable ``x`` (parsed by sympy), so that the first and second derivatives
are exact symbolic derivatives.  The three expressions are compiled to small
closures that run on :class:`~noisecert.interval.Interval` or
:class:`~noisecert.interval.IntervalArray` arguments.

Branch domain endpoints are intervals, because split points such as 0.3 are
not machine numbers.  The *inner* domain ``[left.hi, right.lo]`` is the part
certainly owned by the branch; the expression must also be valid on the
*outer* domain ``[left.lo, right.hi]``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import parse_expr, rationalize, standard_transformations

from . import interval as ia
from .interval import DomainError, Interval, IntervalArray

__all__ = [
    "Branch",
    "MapModel",
    "DerivativeBounds",
    "BZ_B_LO",
    "BZ_B_HI",
    "make_bz_map",
    "make_toy_map",
    "make_doubling_map",
    "make_tent_map",
    "make_perturbed_doubling_map",
    "make_identity_map",
    "map_from_dict",
    "load_map",
    "builtin_map",
    "invert_branch",
    "preimage_points",
    "derivative_bounds",
]

# Certified enclosure of the BZ offset parameter (decimal digits of the bounds).
BZ_B_LO = "0.02328852830307032054478158044023918735669943648088852646123182739831022528158"
BZ_B_HI = "0.02328852830307032054478158044023918735669943648088852646123182739831022528213"

X = sp.Symbol("x", real=True)


class Cbrt(sp.Function):
    """Real cube root, defined on all of the real line."""

    nargs = 1

    def fdiff(self, argindex=1):
        return sp.Rational(1, 3) / Cbrt(self.args[0]) ** 2

    @classmethod
    def eval(cls, arg):
        if arg.is_Number and arg.is_Rational:
            r = sp.integer_nthroot(abs(arg.p), 3)
            s = sp.integer_nthroot(arg.q, 3)
            if r[1] and s[1]:
                return sp.sign(arg) * sp.Rational(r[0], s[0])
        return None


_LOCALS = {"cbrt": Cbrt, "Cbrt": Cbrt, "exp": sp.exp, "log": sp.log, "x": X}
_TRANSFORMS = standard_transformations + (rationalize,)


def parse_expression(text: str, params: Sequence[str] = ()) -> sp.Expr:
    """Parse an expression string; decimal literals become exact rationals."""
    local = dict(_LOCALS)
    for name in params:
        local[name] = sp.Symbol(name, real=True)
    return parse_expr(text, local_dict=local, transformations=_TRANSFORMS, evaluate=True)


# ---------------------------------------------------------------------------
# Compilation of sympy trees to interval closures
# ---------------------------------------------------------------------------

Evaluator = Callable[[object, dict], object]


def _compile(expr: sp.Expr) -> Evaluator:
    """Turn a sympy expression into ``f(x, params)`` over interval carriers."""
    if expr.is_Symbol:
        name = expr.name
        if name == "x":
            return lambda x, p: x
        return lambda x, p, _n=name: p[_n]
    if expr.is_Rational:
        const = Interval.from_fraction(Fraction(int(expr.p), int(expr.q)))
        return lambda x, p, _c=const: _c
    if expr.is_Number:
        # irrational sympy constants (e.g. pi, E) are not expected in maps
        const = Interval.from_fraction(Fraction(str(sp.Float(expr, 40))))
        return lambda x, p, _c=const.widen(1e-30): _c
    if expr is sp.E:
        return lambda x, p: ia.exp(Interval(1.0, 1.0))
    if expr.is_Add:
        parts = [_compile(a) for a in expr.args]

        def add(x, p, _parts=parts):
            acc = _parts[0](x, p)
            for f in _parts[1:]:
                acc = _lift(acc, x) + f(x, p)
            return acc

        return add
    if expr.is_Mul:
        parts = [_compile(a) for a in expr.args]

        def mul(x, p, _parts=parts):
            acc = _parts[0](x, p)
            for f in _parts[1:]:
                acc = _lift(acc, x) * f(x, p)
            return acc

        return mul
    if expr.is_Pow:
        base = _compile(expr.base)
        e = expr.exp
        if e.is_Integer:
            n = int(e)
            return lambda x, p, _b=base, _n=n: ia.pow_int(_lift(_b(x, p), x), _n)
        if e.is_Rational:
            num, den = int(e.p), int(e.q)
            return lambda x, p, _b=base, _p=num, _q=den: ia.pow_frac(_lift(_b(x, p), x), _p, _q)
        ex = _compile(e)
        return lambda x, p, _b=base, _e=ex: ia.exp(_lift(_e(x, p), x) * ia.log(_lift(_b(x, p), x)))
    if isinstance(expr, sp.exp):
        arg = _compile(expr.args[0])
        return lambda x, p, _a=arg: ia.exp(_lift(_a(x, p), x))
    if isinstance(expr, sp.log):
        arg = _compile(expr.args[0])
        return lambda x, p, _a=arg: ia.log(_lift(_a(x, p), x))
    if isinstance(expr, Cbrt):
        arg = _compile(expr.args[0])
        return lambda x, p, _a=arg: ia.cbrt(_lift(_a(x, p), x))
    raise ValueError(f"unsupported expression node {expr.func.__name__}")


def _lift(value, x):
    """Broadcast a scalar interval to the array carrier when ``x`` is an array."""
    if isinstance(x, IntervalArray) and isinstance(value, Interval):
        return IntervalArray.full(x.shape, value)
    return value


def _eval_param(text, params: dict) -> Interval:
    """A parameter is a decimal pair ``[lo, hi]``, a decimal string, or an expression."""
    if isinstance(text, (list, tuple)):
        return Interval.from_decimal(str(text[0]), str(text[1]))
    if isinstance(text, dict) and "lo" in text:
        return Interval.from_decimal(str(text["lo"]), str(text["hi"]))
    text = str(text)
    try:
        Fraction(text)
    except ValueError:
        expr = parse_expression(text, list(params))
        return _compile(expr)(Interval(0.0, 0.0), params)
    return ia.parse_decimal(text)


# ---------------------------------------------------------------------------
# Branches and maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Branch:
    """One monotone piece of a map.

    Attributes
    ----------
    left, right : Interval
        Enclosures of the domain endpoints.
    monotonicity : str
        ``"increasing"``, ``"decreasing"`` or ``"constant"``.
    expr : sympy.Expr
        Closed form of the branch in the variable ``x``.
    """

    left: Interval
    right: Interval
    monotonicity: str
    expr: sp.Expr
    source: str = ""
    _f: Evaluator = field(repr=False, compare=False, default=None)
    _df: Evaluator = field(repr=False, compare=False, default=None)
    _d2f: Evaluator = field(repr=False, compare=False, default=None)
    params: dict = field(repr=False, compare=False, default_factory=dict)

    @staticmethod
    def build(left: Interval, right: Interval, monotonicity: str, expr: sp.Expr,
              params: dict, source: str = "") -> "Branch":
        if monotonicity not in ("increasing", "decreasing", "constant"):
            raise ValueError(f"bad monotonicity {monotonicity!r}")
        d1 = sp.diff(expr, X)
        d2 = sp.diff(d1, X)
        return Branch(left, right, monotonicity, expr, source,
                      _compile(expr), _compile(sp.factor_terms(d1)), _compile(sp.factor_terms(d2)),
                      dict(params))

    @property
    def inner(self) -> tuple[float, float]:
        return self.left.hi, self.right.lo

    @property
    def outer(self) -> tuple[float, float]:
        return self.left.lo, self.right.hi

    @property
    def increasing(self) -> bool:
        return self.monotonicity == "increasing"

    @property
    def constant(self) -> bool:
        return self.monotonicity == "constant"

    def T(self, x):
        return _lift(self._f(_as_carrier(x), self.params), _as_carrier(x))

    def dT(self, x):
        return _lift(self._df(_as_carrier(x), self.params), _as_carrier(x))

    def d2T(self, x):
        return _lift(self._d2f(_as_carrier(x), self.params), _as_carrier(x))

    @property
    def rational(self) -> bool:
        """True when the branch is a rational function of ``x`` with rational coefficients."""
        e = self.expr
        return (e.free_symbols <= {X} and e.is_rational_function(X)
                and all(a.is_Rational for a in e.atoms(sp.Number)))

    def T_exact(self, x: Fraction) -> Fraction:
        """Exact value at a rational point (only for :attr:`rational` branches)."""
        v = self.expr.subs(X, sp.Rational(x.numerator, x.denominator))
        if not v.is_Rational:
            raise ValueError("branch is not rational")
        return Fraction(int(v.p), int(v.q))

    def image(self) -> Interval:
        """Enclosure of the branch image over its outer domain."""
        a = self.T(self.left)
        b = self.T(self.right)
        if self.constant:
            return a.hull(b)
        return a.hull(b)


def _as_carrier(x):
    if isinstance(x, (Interval, IntervalArray)):
        return x
    if isinstance(x, np.ndarray):
        return IntervalArray(x)
    return ia._coerce(x)


@dataclass(frozen=True)
class MapModel:
    """A piecewise monotone map of the unit interval."""

    identifier: str
    branches: tuple[Branch, ...]
    params: dict
    singular_points: tuple[Interval, ...] = ()
    critical_points: tuple[Interval, ...] = ()
    definition: dict = field(default_factory=dict, compare=False, repr=False)

    def branch_index(self, x: float) -> int:
        """Index of the branch whose inner domain contains the float ``x``."""
        for i, b in enumerate(self.branches):
            if b.inner[0] <= x <= b.inner[1]:
                return i
        for i, b in enumerate(self.branches):
            if b.outer[0] <= x <= b.outer[1]:
                return i
        raise ValueError(f"{x!r} outside the map domain")

    def T(self, x):
        """Interval evaluation of T at a scalar interval inside one branch."""
        x = ia._coerce(x)
        hits = [b for b in self.branches if x.lo <= b.right.hi and x.hi >= b.left.lo]
        vals = []
        for b in hits:
            lo = max(x.lo, b.outer[0])
            hi = min(x.hi, b.outer[1])
            if lo <= hi:
                vals.append(b.T(Interval(lo, hi)))
        return Interval.hull_of(vals)

    def T_float(self, x: np.ndarray) -> np.ndarray:
        """Floating-point evaluation (midpoints), for simulation and plotting."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        assigned = np.zeros(x.shape, dtype=bool)
        for b in self.branches:
            mask = (~assigned) & (x >= b.outer[0]) & (x <= b.outer[1])
            if np.any(mask):
                out[mask] = b.T(IntervalArray(x[mask])).mid
                assigned |= mask
        return out

    def dT_float(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        assigned = np.zeros(x.shape, dtype=bool)
        for b in self.branches:
            mask = (~assigned) & (x >= b.outer[0]) & (x <= b.outer[1])
            if np.any(mask):
                with np.errstate(all="ignore"):
                    out[mask] = b.dT(IntervalArray(x[mask])).mid
                assigned |= mask
        return out

    def content_hash(self) -> str:
        payload = json.dumps(self.definition, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def cut_points(self) -> list[Interval]:
        return [b.right for b in self.branches[:-1]]


def map_from_dict(spec: dict) -> MapModel:
    """Build a map from its JSON description.

    Expected keys: ``id``; ``params`` (name to ``[lo, hi]`` decimal strings, a
    decimal string, or an expression in earlier parameters); ``branches`` (list
    of objects with ``domain`` ``[left, right]``, ``expr`` and
    ``monotonicity``); optional ``singular_points`` and ``critical_points``.
    """
    params: dict[str, Interval] = {}
    for name, val in spec.get("params", {}).items():
        params[name] = _eval_param(val, params)
    branches = []
    for bs in spec["branches"]:
        left = _eval_param(bs["domain"][0], params)
        right = _eval_param(bs["domain"][1], params)
        expr = parse_expression(bs["expr"], list(params))
        branches.append(Branch.build(left, right, bs["monotonicity"], expr, params, bs["expr"]))
    if branches[0].left.lo != 0.0 or branches[-1].right.hi != 1.0:
        raise ValueError("branches must cover [0, 1]")
    for a, b in zip(branches, branches[1:]):
        if a.right != b.left:
            raise ValueError("consecutive branch endpoints must coincide")
    sing = tuple(_eval_param(s, params) for s in spec.get("singular_points", []))
    crit = tuple(_eval_param(s, params) for s in spec.get("critical_points", []))
    return MapModel(spec["id"], tuple(branches), params, sing, crit, definition=spec)


def load_map(path: str) -> MapModel:
    with open(path) as fh:
        return map_from_dict(json.load(fh))


BZ_DEFINITION = {
    "id": "bz",
    "params": {
        "a": "(19/42)*(7/5)**(1/3)",
        "b": [BZ_B_LO, BZ_B_HI],
        "c": "20/(3**20*7)*(7/5)**(1/3)*exp(187/10)",
    },
    "branches": [
        {"domain": ["0", "0.3"], "expr": "(a + cbrt(x - 1/8))*exp(-x) + b", "monotonicity": "increasing"},
        {"domain": ["0.3", "1"], "expr": "c*(10*x*exp(-10*x/3))**19 + b", "monotonicity": "decreasing"},
    ],
    "singular_points": ["0.125"],
    "critical_points": ["0.3"],
}


def make_bz_map(**overrides) -> MapModel:
    """The Belousov-Zhabotinsky map with its certified parameters.

    Keyword overrides replace parameter definitions (e.g. ``a=["0.5", "0.5"]``),
    which is how perturbed maps are built for stability experiments.
    """
    spec = json.loads(json.dumps(BZ_DEFINITION))
    for k, v in overrides.items():
        spec["params"][k] = v
    if overrides:
        spec["id"] = "bz[" + ",".join(f"{k}={v}" for k, v in sorted(overrides.items())) + "]"
    return map_from_dict(spec)


def make_toy_map(epsilon: float | str = 0) -> MapModel:
    """Tent-like map with a flat (or nearly flat) right half.

    For ``epsilon == 0`` the right half is sent to 0.  For ``epsilon > 0`` it is
    replaced by the piecewise-linear bump ``epsilon * min(x - 1/2, 1 - x)``.
    """
    eps = Fraction(str(epsilon))
    if not 0 <= eps < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    branches = [
        {"domain": ["0", "1/4"], "expr": "2*x", "monotonicity": "increasing"},
        {"domain": ["1/4", "1/2"], "expr": "-2*(x - 1/2)", "monotonicity": "decreasing"},
    ]
    if eps == 0:
        branches.append({"domain": ["1/2", "1"], "expr": "0", "monotonicity": "constant"})
    else:
        e = f"{eps.numerator}/{eps.denominator}"
        branches += [
            {"domain": ["1/2", "3/4"], "expr": f"({e})*(x - 1/2)", "monotonicity": "increasing"},
            {"domain": ["3/4", "1"], "expr": f"({e})*(1 - x)", "monotonicity": "decreasing"},
        ]
    return map_from_dict({"id": f"toy[eps={epsilon}]", "params": {}, "branches": branches})


def make_doubling_map() -> MapModel:
    return map_from_dict({
        "id": "doubling",
        "branches": [
            {"domain": ["0", "1/2"], "expr": "2*x", "monotonicity": "increasing"},
            {"domain": ["1/2", "1"], "expr": "2*x - 1", "monotonicity": "increasing"},
        ],
    })


def make_tent_map() -> MapModel:
    return map_from_dict({
        "id": "tent",
        "branches": [
            {"domain": ["0", "1/2"], "expr": "2*x", "monotonicity": "increasing"},
            {"domain": ["1/2", "1"], "expr": "2 - 2*x", "monotonicity": "decreasing"},
        ],
    })


def make_perturbed_doubling_map(epsilon: float | str) -> MapModel:
    """Doubling map with the slope bent by ``epsilon``.

    Each branch gains ``epsilon * u * (1 - 2u)`` with ``u`` the offset from the
    branch start, so endpoints stay fixed, the slope ranges over
    ``[2 - epsilon, 2 + epsilon]`` and the sup distance to the doubling map is
    ``epsilon / 8``.
    """
    e = Fraction(str(epsilon))
    es = f"({e.numerator}/{e.denominator})"
    return map_from_dict({
        "id": f"doubling[bend={epsilon}]",
        "branches": [
            {"domain": ["0", "1/2"], "expr": f"2*x + {es}*x*(1 - 2*x)", "monotonicity": "increasing"},
            {"domain": ["1/2", "1"], "expr": f"2*x - 1 + {es}*(x - 1/2)*(1 - 2*(x - 1/2))",
             "monotonicity": "increasing"},
        ],
    })


def make_identity_map() -> MapModel:
    """Identity map, used as a no-contraction test stub."""
    return map_from_dict({
        "id": "identity",
        "branches": [{"domain": ["0", "1"], "expr": "x", "monotonicity": "increasing"}],
    })


_BUILTINS = {
    "bz": make_bz_map,
    "doubling": make_doubling_map,
    "tent": make_tent_map,
    "toy": make_toy_map,
    "identity": make_identity_map,
}


def builtin_map(name: str, **kwargs) -> MapModel:
    """Look up a built-in map by name (``bz``, ``doubling``, ``tent``, ``toy``, ``identity``)."""
    if name.startswith("toy:"):
        return make_toy_map(name.split(":", 1)[1])
    try:
        return _BUILTINS[name](**kwargs)
    except KeyError:
        raise KeyError(f"unknown map {name!r}; choose from {sorted(_BUILTINS)}") from None


# ---------------------------------------------------------------------------
# Inversion
# ---------------------------------------------------------------------------


def _bits(x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=np.float64).view(np.int64)


def _from_bits(b: np.ndarray) -> np.ndarray:
    return np.asarray(b, dtype=np.int64).view(np.float64)


def _bisect(pred: Callable[[np.ndarray], np.ndarray], a: np.ndarray, b: np.ndarray,
            tol: float, max_iter: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised bisection on the float lattice of nonnegative numbers.

    ``pred`` must be true at ``a`` and false at ``b`` (as far as the caller
    knows).  Returns the final ``(a, b)`` bracket; each iteration halves the
    number of floats in between, so at most 64 steps reach adjacency.
    """
    ia_, ib_ = _bits(a).copy(), _bits(b).copy()
    for _ in range(max_iter):
        gap = ib_ - ia_
        active = (gap > 1) & (_from_bits(ib_) - _from_bits(ia_) > tol)
        if not np.any(active):
            break
        mid = ia_ + gap // 2
        ok = pred(_from_bits(mid))
        ia_ = np.where(active & ok, mid, ia_)
        ib_ = np.where(active & ~ok, mid, ib_)
    return _from_bits(ia_), _from_bits(ib_)


def preimage_points(branch: Branch, y: np.ndarray, tol: float = 0.0,
                    max_iter: int = 128) -> tuple[np.ndarray, np.ndarray]:
    """Enclose the clamped inverse ``phi(y)`` of a monotone branch.

    ``phi(y)`` is the point of the inner domain with ``T(phi(y)) = y``, clamped
    to the domain endpoint when ``y`` is outside the image.  With this
    convention ``T^{-1}([y1, y2])`` restricted to the branch is the interval
    between ``phi(y1)`` and ``phi(y2)``.

    Returns arrays ``(lo, hi)`` with ``lo <= phi(y) <= hi``.
    """
    if branch.constant:
        raise ValueError("constant branches have no inverse")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    d_lo, d_hi = branch.inner
    inc = branch.increasing

    def tval(x: np.ndarray) -> IntervalArray:
        with np.errstate(all="ignore"):
            return branch.T(IntervalArray(x))

    def left_of(x):  # x certainly < phi(y)
        t = tval(x)
        return (t.hi < y_cur) if inc else (t.lo > y_cur)

    def right_of(x):  # x certainly > phi(y)
        t = tval(x)
        return (t.lo > y_cur) if inc else (t.hi < y_cur)

    n = y.size
    lo = np.full(n, d_lo)
    hi = np.full(n, d_hi)
    y_cur = y
    at_hi = left_of(np.full(n, d_hi))  # phi(y) = d_hi after clamping
    at_lo = right_of(np.full(n, d_lo))  # phi(y) = d_lo after clamping
    lo[at_hi] = d_hi
    hi[at_lo] = d_lo
    todo = ~(at_hi | at_lo)
    if np.any(todo):
        y_cur = y[todo]
        m = int(np.count_nonzero(todo))
        a, _ = _bisect(left_of, np.full(m, d_lo), np.full(m, d_hi), tol, max_iter)
        _, b = _bisect(lambda x: ~right_of(x), np.full(m, d_lo), np.full(m, d_hi), tol, max_iter)
        lo[todo] = a
        hi[todo] = b
    return lo, hi


def invert_branch(m: MapModel, branch: int, y, tol: float = 2.0**-40,
                  max_iter: int = 128) -> Interval | None:
    """Enclosure of ``T_branch^{-1}(y)``, or ``None`` when ``y`` misses the image.

    Examples
    --------
    >>> d = make_doubling_map()
    >>> iv = invert_branch(d, 0, Interval(0.5, 0.5))
    >>> iv.contains(0.25) and iv.width <= 1e-12
    True
    """
    b = m.branches[branch]
    y = ia._coerce(y)
    img = b.image()
    if y.hi < img.lo or y.lo > img.hi:
        return None
    if b.constant:
        return Interval(b.left.lo, b.right.hi)
    lo, hi = preimage_points(b, np.array([y.lo, y.hi]), tol, max_iter)
    return Interval(float(min(lo)), float(max(hi)))


# ---------------------------------------------------------------------------
# Derivative bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DerivativeBounds:
    """Certified bounds of ``|T'|`` and of the distortion ``|T''|/T'^2`` on a set."""

    inf_abs_dT: float
    sup_abs_dT: float
    sup_distortion: float
    unbounded: bool

    @property
    def sup_inv_dT(self) -> float:
        return math.inf if self.inf_abs_dT == 0.0 else ia.up(1.0 / self.inf_abs_dT)


def _branch_pieces(m: MapModel, I: Interval) -> list[tuple[Branch, float, float]]:
    out = []
    for b in m.branches:
        lo = max(I.lo, b.outer[0])
        hi = min(I.hi, b.outer[1])
        if lo < hi or (lo == hi and b.inner[0] <= lo <= b.inner[1]):
            out.append((b, lo, hi))
    return out


def derivative_bounds(m: MapModel, I, pieces: int = 64) -> DerivativeBounds:
    """Bounds on ``inf|T'|``, ``sup|T'|`` and ``sup|T''/T'^2|`` over ``I``.

    The query is split at branch cuts and singular points and each piece is
    evaluated on ``pieces`` uniform sub-intervals.  Points where the distortion
    cannot be bounded give ``unbounded=True`` and an infinite value instead of
    an exception.
    """
    I = ia._coerce(I)
    inf_d, sup_d, sup_dist = math.inf, 0.0, 0.0
    for b, lo, hi in _branch_pieces(m, I):
        cuts = [lo, hi]
        for s in m.singular_points:
            for v in (s.lo, s.hi):
                if lo < v < hi:
                    cuts.append(v)
        cuts = sorted(set(cuts))
        for a, c in zip(cuts[:-1] or [lo], cuts[1:] or [hi]):
            xs = np.linspace(a, c, pieces + 1)
            xs[0], xs[-1] = a, c
            X_ = IntervalArray(xs[:-1], xs[1:])
            with np.errstate(all="ignore"):
                d1 = abs(b.dT(X_))
                d2 = abs(b.d2T(X_))
                dist = d2 * d1.sqr().reciprocal()
            lo1 = np.where(np.isnan(d1.lo), 0.0, d1.lo)
            hi1 = np.where(np.isnan(d1.hi), math.inf, d1.hi)
            hid = np.where(np.isnan(dist.hi), math.inf, dist.hi)
            inf_d = min(inf_d, float(np.min(lo1)))
            sup_d = max(sup_d, float(np.max(hi1)))
            sup_dist = max(sup_dist, float(np.max(hid)))
    return DerivativeBounds(inf_d, sup_d, sup_dist, not math.isfinite(sup_dist))
