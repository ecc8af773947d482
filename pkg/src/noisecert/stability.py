"""Quantitative stability of stationary densities and Lyapunov exponents.

Every constant is assembled from a contraction certificate through the
amplification factor ``S = sum_{i<N} C_i / (1 - C_N)``:

* map perturbations: ``||f_1 - f_2||_1 <= S ||T_1 - T_2||_inf ||rho_xi||_BV``;
* noise perturbations: ``||f_xi - f_xi'||_1 <= S ||rho_xi - rho_xi'||_1``;
* restricted L-infinity bounds on a set ``S`` where the densities may be
  large, and the resulting moduli of continuity of the Lyapunov exponent.

The Setting-3 quantities for the Belousov-Zhabotinsky map (bounds on
``log|T'|``, ``1/T'``, ``T''/T'^2`` and ``L 1`` near the singular set) are
recomputed by interval subdivision in :func:`verify_setting3`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import interval as ia
from .contraction import ContractionCertificate, make_certificate
from .dynamics import MapModel, make_bz_map, preimage_points
from .interval import DomainError, Interval, IntervalArray
from .observables import _log_abs_derivative, bz_integral_left_of_critical, bz_integral_right_of_critical, \
    bz_l1_near_eighth

__all__ = [
    "amplification",
    "stub_certificate",
    "markov_perturbation_bound",
    "map_perturbation_l1",
    "noise_kernel_distance",
    "noise_perturbation_l1",
    "two_sided_noise_l1",
    "StabilityInputs",
    "restricted_linf_map",
    "restricted_linf_noise",
    "bz_map_distance",
    "Setting3",
    "verify_setting3",
    "lyapunov_stability_report",
    "BZ_RESTRICTED_SET",
]

BZ_RESTRICTED_SET = ((0.1249, 0.1251), (0.2999, 0.3001))


def _I(x) -> Interval:
    return ia._coerce(x)


def amplification(cert: ContractionCertificate) -> Interval:
    """``sum_{i<N} C_i / (1 - C_N)``."""
    return _I(cert.sum_Ci) / (Interval(1.0, 1.0) - _I(cert.alpha))


def stub_certificate(sum_Ci: float, alpha: float, n_bar: int, xi: float) -> ContractionCertificate:
    """A certificate carrying only summary values (for reproducing published constants).

    The intermediate ``C_i`` are spread evenly so that ``sum_{i<n_bar} C_i``
    equals ``sum_Ci``.
    """
    if n_bar < 2:
        raise ValueError("n_bar must be at least 2")
    mid = (sum_Ci - 1.0) / (n_bar - 1)
    bounds = [1.0] + [mid] * (n_bar - 1) + [alpha]
    cert = ContractionCertificate(None, xi, n_bar, alpha, bounds, [{"step": "stub"}])
    return cert


def markov_perturbation_bound(cert: ContractionCertificate, op_distance) -> Interval:
    """Distance between fixed points of two Markov operators, ``S * ||L_1 - L_2||``."""
    d = _I(op_distance)
    return Interval(0.0, (amplification(cert) * d).hi)


def map_perturbation_l1(cert: ContractionCertificate, xi: float, sup_distance) -> Interval:
    """``S * ||T_1 - T_2||_inf * ||rho_xi||_BV`` with ``||rho_xi||_BV = 2 / xi``."""
    bv = Interval(2.0, 2.0) / Interval(xi, xi)
    return Interval(0.0, (amplification(cert) * bv * _I(sup_distance)).hi)


def noise_kernel_distance(xi: float, xi_t: float) -> Interval:
    """Upper bound ``(4/xi) |xi - xi_t|`` on ``||rho_xi - rho_xi_t||_1`` (needs ``xi/2 < xi_t < 2 xi``)."""
    if not (xi / 2 < xi_t < 2 * xi):
        raise DomainError("the uniform-kernel distance needs xi/2 < xi_t < 2 xi")
    d = abs(Interval(xi, xi) - Interval(xi_t, xi_t))
    return Interval(0.0, (Interval(4.0, 4.0) / Interval(xi, xi) * d).hi)


def noise_perturbation_l1(cert: ContractionCertificate, kernel_distance) -> Interval:
    """``S * ||rho_1 - rho_2||_1``."""
    return Interval(0.0, (amplification(cert) * _I(kernel_distance)).hi)


def two_sided_noise_l1(cert: ContractionCertificate, xi_hat: float, xi_t: float) -> Interval:
    """Fixed-point distance for two noises ``xi <= xi_hat, xi_t < 2^(1/N) xi``.

    Both transferred certificates satisfy ``C_i' <= (C_i + 1)/2`` for
    ``i <= N``, giving the factor ``(sum C_i + N) / (1 - alpha)``.
    """
    xi, N = cert.xi, cert.n_bar
    lim = xi * 2.0 ** (1.0 / N)
    if not (xi <= xi_hat < lim and xi <= xi_t < lim):
        raise DomainError(f"both noises must lie in [xi, 2^(1/{N}) xi)")
    fac = (_I(cert.sum_Ci) + N) / (Interval(1.0, 1.0) - _I(cert.alpha))
    d = abs(Interval(xi_hat, xi_hat) - Interval(xi_t, xi_t))
    return Interval(0.0, (fac * Interval(4.0, 4.0) / Interval(xi, xi) * d).hi)


@dataclass
class StabilityInputs:
    """Data for the restricted-set bounds.

    Attributes
    ----------
    xi : float
    eta : Interval
        Lower bound on ``|T'|`` on ``T^{-1}(S_xi)``.
    distortion : Interval
        Upper bound on ``|T''| / T'^2`` there.
    inv_eta : Interval
        Upper bound on ``1/|T'|`` there (``M / eta`` uses this).
    M : int
        Number of monotonicity intervals shared by both maps.
    K : Interval
        Size of the perturbation in the piecewise C1 norm.
    L1_on_Sxi : Interval
        Upper bound on ``||L 1||_{Linf(S_xi)}``.
    """

    xi: float
    eta: Interval
    distortion: Interval
    inv_eta: Interval
    M: int
    K: Interval = field(default_factory=lambda: Interval(0.0, 0.0))
    L1_on_Sxi: Interval = field(default_factory=lambda: Interval(1.0, 1.0))


def restricted_map_coefficient(inp: StabilityInputs) -> Interval:
    """``||rho_xi||_inf (2 + M D + M/eta + 2 Var(rho_xi)) / (eta - K)`` (multiplies ``K``)."""
    K = _I(inp.K)
    gap = _I(inp.eta) - K
    if gap.lo <= 0.0:
        raise DomainError("the perturbation must satisfy K < eta")
    inv_xi = Interval(1.0, 1.0) / Interval(inp.xi, inp.xi)
    num = Interval(2.0, 2.0) + inp.M * _I(inp.distortion) + inp.M * _I(inp.inv_eta) + 4 * inv_xi
    return inv_xi * num / gap


def restricted_linf_map(inp: StabilityInputs, l1_dist) -> Interval:
    """``||f_1 - f_2||_{Linf(S)} <= ||rho||_inf l1_dist + coefficient * K``."""
    inv_xi = Interval(1.0, 1.0) / Interval(inp.xi, inp.xi)
    val = inv_xi * _I(l1_dist) + restricted_map_coefficient(inp) * _I(inp.K)
    return Interval(0.0, val.hi)


def restricted_linf_noise(inp: StabilityInputs, l1_dist, kernel_distance) -> Interval:
    """``||rho_xi||_inf [l1_dist + 2 ||L 1||_{Linf(S_xi)} ||rho_xi - rho_xi'||_1]``."""
    inv_xi = Interval(1.0, 1.0) / Interval(inp.xi, inp.xi)
    val = inv_xi * (_I(l1_dist) + 2 * _I(inp.L1_on_Sxi) * _I(kernel_distance))
    return Interval(0.0, val.hi)


def bz_map_distance(p1: dict, p2: dict) -> dict:
    """Distances between two BZ maps with parameters ``{"a", "b", "c"}`` (floats or intervals).

    Returns ``sup`` (``|da| + |db| + 7|dc|``), ``c1pw`` (``2|da| + |db| + 57|dc|``)
    and ``obs_l1`` (``|da| (3 - 2 log|da|) + 0.7 |dc| / min(c, c')``), the last
    bounding ``||log|T_1'| - log|T_2'|||_1``.
    """
    a1, a2 = _I(p1["a"]), _I(p2["a"])
    b1, b2 = _I(p1["b"]), _I(p2["b"])
    c1, c2 = _I(p1["c"]), _I(p2["c"])
    for a in (a1, a2):
        if a.lo < 0.4 or a.hi > 0.58:
            raise DomainError("a must lie in [0.4, 0.58]")
    cmin = Interval(min(c1.lo, c2.lo), min(c1.hi, c2.hi))
    if cmin.lo <= 0.06:
        raise DomainError("min(c, c') must exceed 0.06")
    da, db, dc = abs(a1 - a2), abs(b1 - b2), abs(c1 - c2)
    sup = da + db + 7 * dc
    c1pw = 2 * da + db + 57 * dc
    if da.hi == 0.0:
        aterm = Interval(0.0, 0.0)
    else:
        # |x| (3 - 2 log|x|) is increasing for |x| < e^{-1/2}
        if da.hi >= math.exp(-0.5):
            raise DomainError("|a - a'| too large for the observable estimate")
        hi = Interval(da.hi, da.hi)
        aterm = Interval(0.0, (hi * (3 - 2 * ia.log(hi))).hi)
    obs = aterm + Interval(0.7, 0.7) * dc / cmin
    return {"sup": Interval(0.0, sup.hi), "c1pw": Interval(0.0, c1pw.hi), "obs_l1": Interval(0.0, obs.hi)}


# ---------------------------------------------------------------------------
# Setting-3 verification
# ---------------------------------------------------------------------------


def _adaptive_sup(fun, lo: float, hi: float, pieces: int = 256, rounds: int = 18, rel_tol: float = 1e-4):
    """Certified upper bound (and a sampled lower value) of ``sup fun`` on ``[lo, hi]``.

    ``fun(lo_arr, hi_arr)`` returns an IntervalArray enclosing a nonnegative
    function on each piece.  Pieces whose upper bound is above the best
    sampled value by more than ``rel_tol`` are bisected.
    """
    e = np.linspace(lo, hi, pieces + 1)
    e[0], e[-1] = lo, hi
    a, b = e[:-1], e[1:]
    done_hi = -math.inf
    best_lo = -math.inf
    for _ in range(rounds):
        v = fun(a, b)
        up = np.where(np.isnan(v.hi), math.inf, v.hi)
        m = 0.5 * a + 0.5 * b
        pv = fun(m, m)
        best_lo = max(best_lo, float(np.nanmax(pv.lo)))
        thresh = best_lo + rel_tol * max(abs(best_lo), 1e-300)
        split = (up > thresh) & (b - a > 1e-15 * max(abs(a).max(), 1.0))
        if np.any(~split):
            done_hi = max(done_hi, float(np.max(up[~split])))
        if not np.any(split):
            break
        a, b = a[split], b[split]
        m = 0.5 * a + 0.5 * b
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
        if a.size > 4_000_000:
            break
    else:
        v = fun(a, b)
        done_hi = max(done_hi, float(np.max(np.where(np.isnan(v.hi), math.inf, v.hi))))
    if a.size and np.any(True):
        v = fun(a, b)
        done_hi = max(done_hi, float(np.max(np.where(np.isnan(v.hi), math.inf, v.hi))))
    return done_hi, best_lo


@dataclass
class Setting3:
    """Certified upper bounds for the Setting-3 quantities of a restricted set ``A``."""

    A: tuple
    Xi: float
    linf_log_outside: float
    l1_log_on_A: float
    inv_dT_on_preimage: float
    distortion_on_preimage: float
    L1_on_A_Xi: float
    sampled: dict
    reach: tuple

    @staticmethod
    def from_values(linf_log_outside: float, l1_log_on_A: float, inv_dT_on_preimage: float,
                    distortion_on_preimage: float, L1_on_A_Xi: float, A=BZ_RESTRICTED_SET,
                    Xi: float = 0.01) -> "Setting3":
        """Build a record from externally supplied bounds (no verification is performed)."""
        return Setting3(tuple(A), Xi, linf_log_outside, l1_log_on_A, inv_dT_on_preimage,
                        distortion_on_preimage, L1_on_A_Xi, {}, (math.nan, math.nan))

    def to_dict(self) -> dict:
        d = asdict(self)
        return json.loads(json.dumps(d, default=repr))

    def inputs(self, xi: float, M: int, K=0.0) -> StabilityInputs:
        inv = Interval(0.0, self.inv_dT_on_preimage)
        e = ia.down(1.0 / self.inv_dT_on_preimage) if self.inv_dT_on_preimage > 0 else math.inf
        eta = Interval(e, e)
        return StabilityInputs(xi, eta, Interval(0.0, self.distortion_on_preimage), inv, M, _I(K),
                               Interval(0.0, self.L1_on_A_Xi))


def _neighbourhood(A, r):
    return tuple((max(p - r, 0.0), min(q + r, 1.0)) for p, q in A)


def _preimage_hulls(m: MapModel, comps) -> list:
    """``(branch, lo, hi)`` enclosing the preimage of each component under each branch."""
    out = []
    for br in m.branches:
        if br.constant:
            continue
        img = br.image()
        for p, q in comps:
            if q < img.lo or p > img.hi:
                continue
            lo, hi = preimage_points(br, np.array([p, q]))
            if br.increasing:
                a, b = lo[0], hi[1]
            else:
                a, b = lo[1], hi[0]
            a, b = max(a, br.outer[0]), min(b, br.outer[1])
            if b >= a:
                out.append((br, a, b))
    return out


def verify_setting3(m: MapModel | None = None, A=BZ_RESTRICTED_SET, Xi: float = 0.01,
                    rel_tol: float = 1e-4) -> Setting3:
    """Recompute the Setting-3 bounds for ``m`` (default: the BZ map) by interval subdivision.

    Conventions
    -----------
    * ``A^c`` is taken inside the region the noisy dynamics can reach,
      ``[0, max T + Xi] \\ A``: stationary densities vanish elsewhere, and
      ``log|T'|`` is much larger near ``x = 1`` where no mass ever goes.
    * ``A_Xi`` is the closed ``Xi``-neighbourhood of ``A``.
    """
    m = m or make_bz_map()
    # reachable region
    top = max(br.image().hi for br in m.branches)
    bot = min(br.image().lo for br in m.branches)
    r_lo, r_hi = max(0.0, ia.down(bot - Xi)), min(1.0, ia.up(top + Xi))
    comps = sorted(A)
    outside = []
    cur = r_lo
    for p, q in comps:
        if p > cur:
            outside.append((cur, min(p, r_hi)))
        cur = max(cur, q)
    if cur < r_hi:
        outside.append((cur, r_hi))

    def abs_h(lo, hi):
        return abs(_log_abs_derivative(m, np.asarray(lo, float), np.asarray(hi, float)))

    sampled = {}
    linf_out, s_lo = -math.inf, -math.inf
    for p, q in outside:
        u, l = _adaptive_sup(abs_h, p, q, rel_tol=rel_tol)
        linf_out, s_lo = max(linf_out, u), max(s_lo, l)
    sampled["linf_log_outside"] = s_lo

    # L1 of log|T'| on A via the closed forms
    l1A = Interval(0.0, 0.0)
    for p, q in comps:
        if p < 0.125 < q:
            l1A = l1A + bz_l1_near_eighth(p, q)
        elif p < 0.3 < q:
            l1A = l1A - bz_integral_left_of_critical(p) - bz_integral_right_of_critical(q)
        else:
            u, _ = _adaptive_sup(abs_h, p, q, rel_tol=rel_tol)
            l1A = l1A + Interval(0.0, ia.mul_up(u, q - p))
    l1A_hi = l1A.hi

    # 1/|T'| and distortion on T^{-1}(A_Xi)
    AX = _neighbourhood(comps, Xi)
    inv_hi = dist_hi = -math.inf
    inv_s = dist_s = -math.inf
    for br, a, b in _preimage_hulls(m, AX):
        def inv(lo, hi, _br=br):
            d = abs(_br.dT(IntervalArray(lo, hi)))
            with np.errstate(all="ignore"):
                return IntervalArray(np.where(d.hi > 0, 1.0 / d.hi, math.inf) * (1 - 2**-52),
                                     np.where(d.lo > 0, 1.0 / d.lo, math.inf) * (1 + 2**-52))

        def dist(lo, hi, _br=br):
            X = IntervalArray(lo, hi)
            with np.errstate(all="ignore"):
                d1 = abs(_br.dT(X))
                d2 = abs(_br.d2T(X))
                den_lo = d1.lo * d1.lo * (1 - 2**-51)
                den_hi = d1.hi * d1.hi * (1 + 2**-51)
                return IntervalArray(np.where(den_hi > 0, d2.lo / den_hi, 0.0) * (1 - 2**-52),
                                     np.where(den_lo > 0, d2.hi / den_lo, math.inf) * (1 + 2**-52))

        u, l = _adaptive_sup(inv, a, b, rel_tol=rel_tol)
        inv_hi, inv_s = max(inv_hi, u), max(inv_s, l)
        u, l = _adaptive_sup(dist, a, b, rel_tol=rel_tol)
        dist_hi, dist_s = max(dist_hi, u), max(dist_s, l)
    sampled["inv_dT_on_preimage"] = inv_s
    sampled["distortion_on_preimage"] = dist_s

    # ||L 1||_{Linf(A_Xi)}: sum over branches of sup 1/|T'| on preimages of small pieces
    L1_hi, L1_s = -math.inf, -math.inf
    for p, q in AX:
        n = 4096
        ys = np.linspace(p, q, n + 1)
        tot_hi = np.zeros(n)
        tot_s = np.zeros(n)
        for br in m.branches:
            if br.constant:
                continue
            lo, hi = preimage_points(br, ys)
            if br.increasing:
                a, b = lo[:-1], hi[1:]
            else:
                a, b = lo[1:], hi[:-1]
            ok = b >= a
            a, b = np.where(ok, a, 0.0), np.where(ok, b, 0.0)
            img = br.image()
            hit = ok & (ys[1:] >= img.lo) & (ys[:-1] <= img.hi)
            d = abs(br.dT(IntervalArray(a, b)))
            with np.errstate(all="ignore"):
                ub = np.where(d.lo > 0, 1.0 / d.lo, math.inf) * (1 + 2**-52)
            tot_hi += np.where(hit, ub, 0.0)
            mid = 0.5 * a + 0.5 * b
            dm = abs(br.dT(IntervalArray(mid, mid)))
            inside = hit & (ys[:-1] >= img.lo) & (ys[1:] <= img.hi)
            tot_s += np.where(inside, 1.0 / np.maximum(dm.hi, 1e-300), 0.0)
        L1_hi = max(L1_hi, float(np.max(tot_hi)))
        L1_s = max(L1_s, float(np.max(tot_s)))
    sampled["L1_on_A_Xi"] = L1_s

    def fin(v):  # an empty set contributes nothing
        return ia.up(v) if v > -math.inf else 0.0

    return Setting3(tuple(comps), Xi, fin(linf_out), l1A_hi, fin(inv_hi), fin(dist_hi), fin(L1_hi),
                    sampled, (r_lo, r_hi))


# ---------------------------------------------------------------------------
# Lyapunov moduli
# ---------------------------------------------------------------------------


def lyapunov_stability_report(cert: ContractionCertificate, setting: Setting3 | None = None, *,
                              M: int = 3, K: float = 0.8, map_params: dict | None = None,
                              map_moduli: bool = True) -> dict:
    """Moduli of continuity of the Lyapunov exponent from a certificate and Setting-3 bounds.

    Map moduli (BZ parameters ``a, b, c``; only with ``map_moduli``)::

        |lambda - lambda'| <= C_a (-|da| log|da|) + C_a' |da| + C_b |db| + C_c |dc|

    Noise moduli::

        |lambda_xi - lambda_xi'| <= C_xi |xi - xi'|   (xi/2 < xi' < 2 xi)
        |lambda_xh - lambda_xt| <= C_xi2 |xh - xt|     (xi <= xh, xt < 2^(1/N) xi)
    """
    xi = cert.xi
    out: dict = {"xi": repr(xi), "sum_Ci": repr(cert.sum_Ci), "alpha": repr(cert.alpha), "n_bar": cert.n_bar}
    if setting is None:
        out["withheld"] = "Setting-3 bounds unavailable"
        return out
    inv_xi = Interval(1.0, 1.0) / Interval(xi, xi)
    S = amplification(cert)
    map_coef = S * 2 * inv_xi                              # per unit sup distance
    noise_coef = S * 4 * inv_xi                            # per unit |xi - xi'|
    N = cert.n_bar
    noise2_coef = (_I(cert.sum_Ci) + N) / (Interval(1.0, 1.0) - _I(cert.alpha)) * 4 * inv_xi
    inp = setting.inputs(xi, M, K)
    R = restricted_map_coefficient(inp) if setting.inv_dT_on_preimage > 0 else Interval(0.0, 0.0)
    L1A = Interval(0.0, setting.l1_log_on_A)
    LinfAc = Interval(0.0, setting.linf_log_outside)
    L1S = Interval(0.0, setting.L1_on_A_Xi)
    linf_noise = inv_xi * (noise_coef + 2 * L1S * 4 * inv_xi)
    linf_noise2 = inv_xi * (noise2_coef + 2 * L1S * 4 * inv_xi)
    C_xi = L1A * linf_noise + LinfAc * noise_coef
    C_xi2 = L1A * linf_noise2 + LinfAc * noise2_coef
    # map moduli: ||f1-f2||_1 <= map_coef * sup,  ||f1-f2||_{Linf(A)} <= inv_xi * l1 + R * c1pw
    cmin = 0.06 if map_params is None else float(map_params.get("c_min", 0.06))
    C_a_log = 2 * inv_xi
    C_a = 3 * inv_xi + L1A * (inv_xi * map_coef + 2 * R) + LinfAc * map_coef
    C_b = L1A * (inv_xi * map_coef + R) + LinfAc * map_coef
    C_c = Interval(0.7, 0.7) / Interval(cmin, cmin) * inv_xi + L1A * (7 * inv_xi * map_coef + 57 * R) \
        + 7 * LinfAc * map_coef
    out.update({
        "amplification": S.to_strings(),
        "map_l1_coefficient": map_coef.to_strings(),
        "noise_l1_coefficient": noise_coef.to_strings(),
        "noise_l1_two_sided_coefficient": noise2_coef.to_strings(),
        "restricted_map_coefficient": R.to_strings(),
        "restricted_linf_noise_coefficient": linf_noise.to_strings(),
        "restricted_linf_noise_two_sided_coefficient": linf_noise2.to_strings(),
        "lambda_noise_coefficient": C_xi.to_strings(),
        "lambda_noise_two_sided_coefficient": C_xi2.to_strings(),
        "two_sided_window": repr(xi * 2.0 ** (1.0 / N)),
        "setting3": setting.to_dict(),
    })
    if map_moduli:
        out["lambda_map"] = {"C_a_log": C_a_log.to_strings(), "C_a": C_a.to_strings(),
                             "C_b": C_b.to_strings(), "C_c": C_c.to_strings()}
    return out
