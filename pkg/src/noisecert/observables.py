"""Certified Lyapunov exponents ``lambda = int log|T'| f_xi``.

The observable ``h = log|T'|`` is integrated against the computed density
outside a small neighbourhood ``E`` of the points where it is unbounded.
Inside ``E`` the contribution is bounded by ``||h||_{L1(E)} ||f_xi||_{Linf(E)}``,
using closed-form integrals for the Belousov-Zhabotinsky map and interval
quadrature otherwise.

With ``c = (sup + inf) / 2`` of ``h`` on ``X \\ E`` and ``e = f_xi - f``,

    int_{X\\E} h e = int_{X\\E} (h - c) e + c int_{X\\E} e,

so the error of the truncated integral has three parts: the ``E`` term, the
oscillation term ``(sup - inf)/2 * ||e||_1`` and the mass term
``|c| * |int_{X\\E} e|``.  The last one is needed because ``e`` restricted to
``X \\ E`` has no reason to have zero average.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import interval as ia
from .certification import DensityEnclosure
from .dynamics import MapModel, BZ_DEFINITION
from .interval import DomainError, Interval, IntervalArray

__all__ = [
    "zero_average_bound",
    "bathtub_bound",
    "bz_l1_near_eighth",
    "bz_integral_left_of_critical",
    "bz_integral_right_of_critical",
    "l1_log_bounds_bz",
    "ObservableSpec",
    "LyapunovEnclosure",
    "NoCandidateError",
    "estimate_lyapunov",
    "e_ladder",
]

INF = math.inf


class NoCandidateError(RuntimeError):
    pass


def zero_average_bound(H_sup, H_inf, v_l1) -> Interval:
    """``(sup H - inf H) / 2 * ||v||_1`` for a zero-average ``v``.

    >>> round(zero_average_bound(3.0, 1.0, 0.1).hi, 12)
    0.1
    """
    s, i, v = ia._coerce(H_sup), ia._coerce(H_inf), ia._coerce(v_l1)
    val = (s - i) / 2 * v
    return Interval(0.0, max(val.hi, 0.0))


def bathtub_bound(g: np.ndarray, caps: np.ndarray, budget: float) -> float:
    """Largest ``sum g_j w_j`` subject to ``0 <= w_j <= caps_j`` and ``sum w_j <= budget``.

    Bounds ``int |H| |v|`` when ``|H| <= g_j`` and ``int_j |v| <= caps_j`` on
    piece ``j`` and ``||v||_1 <= budget``: the extremal ``v`` puts its mass
    where ``g`` is largest.

    >>> bathtub_bound(np.array([1.0, 5.0, 2.0]), np.array([1.0, 0.1, 1.0]), 0.5)  # doctest: +ELLIPSIS
    1.30000000000...
    """
    g = np.asarray(g, dtype=float)
    caps = np.asarray(caps, dtype=float)
    order = np.argsort(-g, kind="stable")
    gs, cs = g[order], caps[order]
    before = np.concatenate([[0.0], np.cumsum(cs)[:-1]])
    take = np.clip(budget - before, 0.0, cs)
    take = np.nextafter(take, INF) * (1 + 2.0**-50)
    return ia.up(float(np.dot(gs, take)) * (1 + (g.size + 4) * 2.0**-52) + 1e-300)


# ---------------------------------------------------------------------------
# Closed-form integrals of log|T'| for the BZ map
# ---------------------------------------------------------------------------

_EIGHTH = Interval(0.125, 0.125)
_CRIT = Interval.from_decimal("0.3")


def _xlogx(x: Interval) -> Interval:
    if x.lo <= 0.0:
        raise DomainError("x log x needs a positive argument here")
    return x * ia.log(x)


def bz_l1_near_eighth(u: float, v: float) -> Interval:
    """Enclosure of ``int_u^v log|T'|`` for ``1/8 - 2^-6 < u <= 1/8 <= v < 1/8 + 2^-6``.

    On that window ``log|T'(x)| = log(phi(x)) - x`` with
    ``phi = |s|^{-2/3}/3 - s^{1/3} - a`` and ``s = x - 1/8``, and
    ``(4/5) |s|^{-2/3}/3 <= phi <= |s|^{-2/3}/3``.  The integrand is positive,
    so the enclosure is also one for the L1 norm.
    """
    w = 2.0**-6
    if not (0.125 - w < u <= 0.125 <= v < 0.125 + w):
        raise DomainError("endpoints outside the validity window around 1/8")
    U, V = Interval(u, u), Interval(v, v)
    p, q = _EIGHTH - U, V - _EIGHTH

    def part(t: Interval) -> Interval:
        if t.hi == 0.0:
            return Interval(0.0, 0.0)
        return _xlogx(t) - t

    three = Interval(3.0, 3.0)
    upper = Interval(-2.0, -2.0) / three * (part(p) + part(q)) - (V - U) * ia.log(three) \
        - (V * V - U * U) / 2
    shift = (V - U) * ia.log(Interval(1.25, 1.25))
    return Interval(ia.down(upper.lo - shift.hi), upper.hi)


def _phi(x: Interval, a: Interval) -> Interval:
    s = x - _EIGHTH
    r = ia.cbrt(s)
    return Interval(1.0, 1.0) / (3 * r.sqr()) - r - a


def bz_integral_left_of_critical(x: float, a: Interval | None = None) -> Interval:
    """Enclosure of ``int_x^{0.3} log|T'|`` for ``0.2 < x < 0.3``.

    ``phi`` is convex and vanishes at 0.3, so on ``[x, 0.3]`` it lies between
    its tangent at 0.3 (slope ``-d1``) and the chord from ``x`` (slope ``-d2``).
    """
    if not (0.2 < x < 0.3):
        raise DomainError("x must lie in (0.2, 0.3)")
    if a is None:
        a = _bz_param("a")
    X = Interval(x, x)
    L = _CRIT - X
    if L.lo <= 0.0:
        raise DomainError("x too close to 0.3 for a separated enclosure")
    t = _CRIT - _EIGHTH
    d1 = (Interval(2.0, 2.0) / 9) * ia.pow_frac(t, -5, 3) + ia.pow_frac(t, -2, 3) / 3
    d2 = _phi(X, a) / L
    d = d1.hull(d2)
    val = (ia.log(d) + ia.log(L) - 1) * L - (_CRIT * _CRIT - X * X) / 2
    return val


def bz_integral_right_of_critical(x: float, c: Interval | None = None) -> Interval:
    """Enclosure of ``int_{0.3}^x log|T'|`` for ``0.3 < x < 0.303`` (exact antiderivative)."""
    if not (0.3 < x < 0.303):
        raise DomainError("x must lie in (0.3, 0.303)")
    if c is None:
        c = _bz_param("c")
    X = Interval(x, x)
    eps = X - _CRIT
    if eps.lo <= 0.0:
        raise DomainError("x too close to 0.3 for a separated enclosure")
    K = ia.log(c) + ia.log(Interval(19.0, 19.0)) + 19 * ia.log(Interval(10.0, 10.0)) - 38 \
        + ia.log(Interval(10.0, 10.0) / 3)
    return K * eps + 18 * (_xlogx(X) - _xlogx(_CRIT)) + _xlogx(eps) - Interval(190.0, 190.0) / 6 * eps.sqr()


def l1_log_bounds_bz(point: str, lo: float, hi: float | None = None) -> Interval:
    """Enclosure of ``||log|T'|||_{L1}`` on a neighbourhood piece of a BZ singular point.

    Parameters
    ----------
    point : {"0.125", "0.3_left", "0.3_right"}
    lo, hi : float
        Interval endpoints.  For ``"0.125"`` both are needed; for
        ``"0.3_left"`` the interval is ``(lo, 0.3)``; for ``"0.3_right"`` it is
        ``(0.3, lo)``.
    """
    if point in ("0.125", "eighth"):
        if hi is None:
            raise ValueError("two endpoints needed")
        if lo == hi:
            return Interval(0.0, 0.0)
        return bz_l1_near_eighth(lo, hi)
    if point == "0.3_left":
        v = bz_integral_left_of_critical(lo)
        if v.hi >= 0.0:
            raise DomainError("sign of log|T'| not certified on the interval")
        return -v
    if point == "0.3_right":
        v = bz_integral_right_of_critical(lo)
        if v.hi >= 0.0:
            raise DomainError("sign of log|T'| not certified on the interval")
        return -v
    raise ValueError(f"unknown point {point!r}")


def _bz_param(name: str) -> Interval:
    from .dynamics import make_bz_map
    return make_bz_map().params[name]


# ---------------------------------------------------------------------------
# Observable specification
# ---------------------------------------------------------------------------


def _log_abs_derivative(m: MapModel, lo: np.ndarray, hi: np.ndarray) -> IntervalArray:
    """Enclosure of ``log|T'|`` over each ``[lo, hi]``, branch-aware."""
    out_lo = np.full(lo.size, INF)
    out_hi = np.full(lo.size, -INF)
    for br in m.branches:
        a = np.maximum(lo, br.outer[0])
        b = np.minimum(hi, br.outer[1])
        ok = b >= a
        if not np.any(ok):
            continue
        if br.constant:
            out_lo[ok] = -INF
            out_hi[ok] = np.maximum(out_hi[ok], -INF)
            continue
        with np.errstate(all="ignore"):
            d = abs(br.dT(IntervalArray(a[ok], b[ok])))
            hv = d.log()
        hl = np.where(np.isnan(hv.lo), -INF, hv.lo)
        hh = np.where(np.isnan(hv.hi), INF, hv.hi)
        out_lo[ok] = np.minimum(out_lo[ok], hl)
        out_hi[ok] = np.maximum(out_hi[ok], hh)
    return IntervalArray(out_lo, out_hi)


@dataclass
class ObservableSpec:
    """``h = log|T'|`` for a given map, plus L1 providers near its singular points.

    ``l1_provider(center, r)`` returns an upper bound on ``||h||_{L1}`` over
    ``[center - r, center + r]`` or ``inf`` when ``r`` is outside its validity
    window.  ``radius_window[center]`` lists the admissible radii.
    """

    m: MapModel
    singular: list[float]
    l1_provider: Callable[[float, float], float]
    max_radius: dict = field(default_factory=dict)

    def h(self, lo: np.ndarray, hi: np.ndarray) -> IntervalArray:
        return _log_abs_derivative(self.m, np.asarray(lo, float), np.asarray(hi, float))

    @staticmethod
    def for_map(m: MapModel) -> "ObservableSpec":
        pts = sorted({float(p.mid) if isinstance(p, Interval) else float(p)
                      for p in list(m.singular_points) + list(m.critical_points)})
        if m.definition == BZ_DEFINITION or m.content_hash() == _bz_hash():
            return ObservableSpec(m, pts, _bz_provider, {p: (2.0**-6 if abs(p - 0.125) < 1e-12 else 0.003) * 0.999 for p in pts})
        spec = ObservableSpec(m, pts, lambda c, r: INF)
        spec.l1_provider = lambda c, r, _s=spec: _quadrature_l1(_s, c - r, c + r)
        return spec


_BZ_HASH: list = []


def _bz_hash() -> str:
    if not _BZ_HASH:
        from .dynamics import make_bz_map
        _BZ_HASH.append(make_bz_map().content_hash())
    return _BZ_HASH[0]


def _bz_provider(center: float, r: float) -> float:
    try:
        if abs(center - 0.125) < 1e-12:
            return l1_log_bounds_bz("0.125", ia.down(center - r), ia.up(center + r)).hi
        if abs(center - 0.3) < 1e-12:
            left = l1_log_bounds_bz("0.3_left", ia.down(center - r))
            right = l1_log_bounds_bz("0.3_right", ia.up(center + r))
            return (left + right).hi
    except DomainError:
        return INF
    return INF


def _quadrature_l1(spec: ObservableSpec, lo: float, hi: float, pieces: int = 256) -> float:
    """Interval quadrature bound on ``int_lo^hi |h|`` (infinite near singularities)."""
    lo, hi = max(lo, 0.0), min(hi, 1.0)
    if hi <= lo:
        return 0.0
    e = np.linspace(lo, hi, pieces + 1)
    e[0], e[-1] = lo, hi
    hv = spec.h(e[:-1], e[1:])
    mag = np.maximum(np.abs(hv.lo), np.abs(hv.hi))
    if not np.all(np.isfinite(mag)):
        return INF
    return ia.sum_up(np.nextafter(mag * np.nextafter(np.diff(e), INF), INF))


def e_ladder(spec: ObservableSpec, r_max: float = 2.0**-6, r_min: float = 2.0**-16) -> list[dict]:
    """Candidate neighbourhoods: one radius per singular point, octave steps."""
    if not spec.singular:
        return [{}]
    radii = []
    r = r_max
    while r >= r_min:
        radii.append(r)
        r /= 2
    per_point = []
    for p in spec.singular:
        cap = spec.max_radius.get(p, r_max)
        per_point.append([r for r in radii if r <= cap] or [r_min])
    cands = [{}]
    for p, rs in zip(spec.singular, per_point):
        cands = [dict(c, **{repr(p): r}) for c in cands for r in rs]
    return cands


# ---------------------------------------------------------------------------
# Lyapunov enclosure
# ---------------------------------------------------------------------------


@dataclass
class LyapunovEnclosure:
    """Certified enclosure of the Lyapunov exponent with its error breakdown."""

    lam: Interval
    E: dict
    main: Interval
    e_term: float
    oscillation_term: float
    mass_term: float
    h_sup: float
    h_inf: float

    @property
    def verdict(self) -> str:
        if self.lam.hi < 0.0:
            return "negative"
        if self.lam.lo > 0.0:
            return "positive"
        return "indeterminate"

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam.to_strings(),
            "verdict": self.verdict,
            "E": {k: repr(v) for k, v in self.E.items()},
            "main_integral": self.main.to_strings(),
            "E_term": repr(self.e_term),
            "oscillation_term": repr(self.oscillation_term),
            "mass_term": repr(self.mass_term),
            "h_sup": repr(self.h_sup),
            "h_inf": repr(self.h_inf),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _pieces_outside(k: int, comps: list[tuple[float, float]]):
    """Pieces of the uniform grid lying outside the union of ``comps``.

    Returns ``(cell, lo, hi)`` arrays; a cell cut by a component boundary
    contributes only its outside part(s).
    """
    edges_lo = np.arange(k) / k
    edges_hi = np.arange(1, k + 1) / k
    cell = np.arange(k)
    lo, hi = edges_lo.copy(), edges_hi.copy()
    extra = []
    for (a, b) in comps:
        inside = (lo >= a) & (hi <= b)
        cut_left = (lo < a) & (hi > a)   # keep [lo, a]
        cut_right = (lo < b) & (hi > b)  # keep [b, hi]
        both = cut_left & cut_right
        for j in np.nonzero(both)[0]:
            extra.append((cell[j], b, hi[j]))
        hi = np.where(cut_left, np.minimum(hi, a), hi)
        lo = np.where(cut_right & ~both, np.maximum(lo, b), lo)
        keep = ~inside
        cell, lo, hi = cell[keep], lo[keep], hi[keep]
    if extra:
        ec, el, eh = map(np.array, zip(*extra))
        cell, lo, hi = np.concatenate([cell, ec]), np.concatenate([lo, el]), np.concatenate([hi, eh])
    good = hi > lo
    return cell[good], lo[good], hi[good]


def _candidate(density: DensityEnclosure, spec: ObservableSpec, E: dict) -> LyapunovEnclosure:
    k = density.k
    f = np.maximum(density.values, 0.0)
    comps = sorted((max(float(p) - r, 0.0), min(float(p) + r, 1.0)) for p, r in E.items())
    comps = [(ia.down(a), ia.up(b)) for a, b in comps]
    cell, lo, hi = _pieces_outside(k, comps)
    hv = spec.h(lo, hi)
    h_sup, h_inf = float(np.max(hv.hi)), float(np.min(hv.lo))
    if not (math.isfinite(h_sup) and math.isfinite(h_inf)):
        raise NoCandidateError("log|T'| is unbounded outside E")
    w = IntervalArray(np.nextafter(hi - lo, -INF), np.nextafter(hi - lo, INF))
    contrib = hv * w * IntervalArray(f[cell], f[cell])
    main = contrib.sum()

    # E term
    e_term = 0.0
    e_mass_tilde = 0.0
    e_meas = 0.0
    for (p, r), (a, b) in zip(sorted(((float(p), r) for p, r in E.items())), comps):
        l1 = spec.l1_provider(p, r)
        if not math.isfinite(l1):
            raise NoCandidateError(f"no L1 bound for log|T'| around {p} with radius {r}")
        linf = density.linf_on(a, b)
        e_term = ia.up(e_term + ia.mul_up(l1, linf))
        e_meas = ia.up(e_meas + (b - a))
        ja, jb = int(math.floor(a * k)), min(int(math.ceil(b * k)), k)
        e_mass_tilde = ia.up(e_mass_tilde + ia.sum_up(f[ja:jb]) / k, 2)
    l1err = density.l1_error
    # |int_{X\E} (f_xi - f)| <= |1 - mass(f)| + int_E f_xi + int_E f
    mass_dev = max(density.mass.hi - 1.0, 1.0 - density.mass.lo, 0.0)
    linf_E = max((density.linf_on(a, b) for a, b in comps), default=0.0)
    e_out = ia.up(mass_dev + ia.mul_up(e_meas, linf_E) + e_mass_tilde, 2)
    e_out = min(e_out, l1err)
    # pointwise cap |f_xi - f| <= max(f_xi, f) on each piece
    led = density.ledgers
    pi_cell = np.minimum((lo * led.k_est).astype(np.int64), led.k_est - 1)
    caps = np.nextafter(np.maximum(density.linf[pi_cell], f[cell]) * np.nextafter(hi - lo, INF), INF)
    best = None
    mean = main.mid / max(density.mass.mid, 1e-300)
    for c in {0.5 * h_sup + 0.5 * h_inf, mean, 0.0}:
        if not math.isfinite(c):
            continue
        C = Interval(c, c)
        g = np.maximum(np.abs(hv.lo - c), np.abs(hv.hi - c))
        g = np.nextafter(g, INF) * (1 + 4 * 2.0**-52)
        osc = min(bathtub_bound(g, caps, l1err), zero_average_bound(h_sup, h_inf, l1err).hi
                  if c == 0.5 * h_sup + 0.5 * h_inf else INF)
        mass_term = ia.mul_up(abs(C).hi, e_out)
        tot = ia.up(osc + mass_term)
        if best is None or tot < best[0]:
            best = (tot, osc, mass_term)
    _, osc, mass_term = best
    rad = ia.up(ia.up(e_term + osc) + mass_term)
    lam = Interval(ia.down(main.lo - rad), ia.up(main.hi + rad))
    return LyapunovEnclosure(lam, dict(E), main, e_term, osc, mass_term, h_sup, h_inf)


def estimate_lyapunov(density: DensityEnclosure, spec: ObservableSpec | MapModel,
                      E_candidates: Sequence[dict] | None = None) -> LyapunovEnclosure:
    """Tightest certified enclosure of ``int log|T'| f_xi`` over the candidate sets ``E``.

    Parameters
    ----------
    density : DensityEnclosure
    spec : ObservableSpec or MapModel
    E_candidates : sequence of dict, optional
        Each maps a singular point (as ``repr(float)``) to a radius.  Defaults
        to :func:`e_ladder`.
    """
    if isinstance(spec, MapModel):
        spec = ObservableSpec.for_map(spec)
    cands = list(E_candidates) if E_candidates is not None else e_ladder(spec)
    best = None
    errors = []
    for E in cands:
        try:
            enc = _candidate(density, spec, E)
        except NoCandidateError as exc:
            errors.append(str(exc))
            continue
        if best is None or enc.lam.width < best.lam.width:
            best = enc
    if best is None:
        raise NoCandidateError("no candidate neighbourhood gives a finite bound: " + "; ".join(errors[:3]))
    return best
