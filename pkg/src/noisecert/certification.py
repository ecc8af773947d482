"""Certified L1 distance between the computed density and the stationary one.

Pipeline
--------
1. :func:`fixed_point` runs float power iteration and bounds the distance to
   the exact discrete fixed point through the contraction certificate.
2. :func:`a_priori_error` gives the bound that only uses ``delta / xi``.
3. :func:`variation_ledgers` pushes the computed density ``f`` through each
   branch on a coarse partition and records certified local masses and
   variations of ``L_i f`` and ``N L f``.
4. :func:`bootstrap_error` turns the ledgers into the constants ``A_i, B_i``
   and solves the resulting linear inequality for the final error.

Densities are float arrays on the uniform ``k``-cell grid; the computed
density is *defined* as that step function, so quantities about it are exact
up to the rounding of the arithmetic used to evaluate them.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sps

from . import interval as ia
from .contraction import ContractionCertificate
from .dynamics import Branch, MapModel, preimage_points
from .interval import Interval, IntervalArray
from .noise import NoiseKernel, apply_noise_discrete, gamma
from .ulam import UlamOperator

log = logging.getLogger(__name__)

__all__ = [
    "ConvergenceError",
    "fixed_point",
    "a_priori_error",
    "Pushforward",
    "Ledgers",
    "variation_ledgers",
    "ErrorBudget",
    "bootstrap_error",
    "local_linf_bounds",
    "DensityEnclosure",
    "certify_density",
]

INF = math.inf


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def _xi_of(kernel) -> float:
    return kernel.xi if isinstance(kernel, NoiseKernel) else float(kernel)


def _iv(x) -> Interval:
    return x if isinstance(x, Interval) else Interval(float(x), float(x))


def fixed_point(op: UlamOperator, kernel: NoiseKernel | float, cert: ContractionCertificate,
                tol: float = 1e-13, max_iter: int = 200000, start: np.ndarray | None = None,
                ) -> tuple[np.ndarray, float, float]:
    """Approximate fixed point of the noisy Ulam operator with a certified error.

    Returns
    -------
    f : ndarray
        Density values on the grid (nonnegative, mass close to 1).
    numerical_error : float
        Upper bound on ``||f - f_{delta,xi}||_{L1}``.
    residual : float
        Certified upper bound on ``||L_{delta,xi} f - f||_{L1}``.
    """
    xi = _xi_of(kernel)
    k = op.k
    g = np.full(k, 1.0 / k) if start is None else np.asarray(start, float) / np.sum(start)
    res = INF
    for _ in range(max_iter):
        h = apply_noise_discrete(xi, op.P_mid @ g)
        h = np.maximum(h, 0.0)
        h /= h.sum()
        res = float(np.abs(h - g).sum())
        g = h
        if res <= tol:
            break
    else:
        raise ConvergenceError(f"power iteration stalled at residual {res:.3g}", res)
    # certified residual of the final iterate
    h = apply_noise_discrete(xi, op.P_mid @ g)
    mass = Interval(ia.sum_down(g), ia.sum_up(g))
    e_step = op.step_error_factor(xi)
    r = ia.up(float(np.abs(h - g).sum()) * (1 + gamma(k + 2)))
    r = ia.up(r + e_step * mass.hi, 2)
    # ||u - f*|| <= sum C / (1 - alpha) * r / m for u = g / m; then add |1 - m|
    amp = cert.amplification
    num = ia.up(amp * ia.div_up(r, mass.lo))
    num = ia.up(num + max(mass.hi - 1.0, 1.0 - mass.lo, 0.0), 1)
    return g * k, num, r


def a_priori_error(cert: ContractionCertificate, k: int, kernel: NoiseKernel | float) -> Interval:
    """``(1 + 2 sum C_i) / (2 (1 - alpha)) * delta * Var(rho) / xi`` as an upper bound.

    Examples
    --------
    >>> from noisecert.contraction import make_certificate
    >>> c = make_certificate([1.0, 1.0, 0.5], target_alpha=0.5)
    >>> round(a_priori_error(c, 1000, 0.1).hi, 12)
    0.1
    """
    kern = kernel if isinstance(kernel, NoiseKernel) else NoiseKernel(float(kernel))
    s = _iv(cert.sum_Ci)
    one = Interval(1.0, 1.0)
    delta = Interval.from_fraction(Fraction(1, k))
    val = (one + 2 * s) / (2 * (one - _iv(cert.alpha))) * delta * kern.var_rho / Interval(kern.xi, kern.xi)
    return Interval(0.0, val.hi)


# ---------------------------------------------------------------------------
# Pushforward bookkeeping
# ---------------------------------------------------------------------------


class Pushforward:
    """Certified local masses and variations of ``L_i f`` for a step density ``f``.

    Parameters
    ----------
    m : MapModel
    f : ndarray
        Density values on ``len(f)`` uniform cells.
    """

    def __init__(self, m: MapModel, f: np.ndarray):
        self.m = m
        self.f = np.maximum(np.asarray(f, dtype=float), 0.0)
        self.k = k = self.f.size
        cell_mass = self.f / k
        self.prefix = np.concatenate([[0.0], np.cumsum(cell_mass)])
        self.total = ia.sum_up(cell_mass)
        jumps = np.abs(np.diff(self.f))
        self.jump_prefix = np.concatenate([[0.0, 0.0], np.cumsum(jumps)])  # index m -> sum of jumps at points < m/k
        jt = ia.sum_up(jumps) if jumps.size else 0.0
        self.mass_slack = ia.up(2 * gamma(k + 8) * (self.total + float(np.max(self.f, initial=0.0)) / k + 1e-300))
        self.var_slack = ia.up(2 * gamma(k + 8) * (jt + 1e-300))
        self._phi_cache: dict = {}

    # -- functions of f on the domain -------------------------------------
    def cum_mass(self, x: np.ndarray) -> np.ndarray:
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        j = np.minimum((x * self.k).astype(np.int64), self.k - 1)
        return self.prefix[j] + self.f[j] * (x - j / self.k)

    def mass(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Upper bound on ``int_a^b f`` (zero when ``a >= b``)."""
        a = np.clip(np.asarray(a, dtype=float), 0.0, 1.0)
        b = np.clip(np.asarray(b, dtype=float), 0.0, 1.0)
        raw = self.cum_mass(b) - self.cum_mass(a)
        out = np.where(b > a, np.maximum(raw, 0.0) + self.mass_slack, 0.0)
        return np.nextafter(out, INF) * (b > a)

    def variation(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Upper bound on the variation of ``f`` over the open interval ``(a, b)``.

        Only jumps at grid points strictly inside ``(a, b)`` count.  When ``k`` is
        not a power of two the products ``a * k`` may be rounded, and the test is
        relaxed by one ulp so that no interior jump is lost.
        """
        a = np.clip(np.asarray(a, dtype=float), 0.0, 1.0)
        b = np.clip(np.asarray(b, dtype=float), 0.0, 1.0)
        k = self.k
        ta, tb = a * k, b * k
        if k & (k - 1):
            ta, tb = np.nextafter(ta, -INF), np.nextafter(tb, INF)
        m_lo = np.clip(np.floor(ta).astype(np.int64) + 1, 1, k)
        m_hi = np.clip(np.ceil(tb).astype(np.int64) - 1, 0, k - 1)
        raw = self.jump_prefix[m_hi + 1] - self.jump_prefix[m_lo]
        ok = (m_hi >= m_lo) & (b > a)
        return np.where(ok, np.nextafter(np.maximum(raw, 0.0) + self.var_slack, INF), 0.0)

    def sup_near(self, y: float) -> float:
        """Largest value of ``f`` on the cells touching the point ``y``."""
        k = self.k
        j = min(max(int(math.floor(y * k)), 0), k - 1)
        lo = max(j - 1, 0)
        return float(np.max(self.f[lo:j + 2]))

    # -- preimages ----------------------------------------------------------
    def phi(self, bi: int, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        b = self.m.branches[bi]
        y = np.asarray(y, dtype=float)
        return preimage_points(b, y, tol=0.0, max_iter=80)

    # -- pushforward quantities -------------------------------------------------
    def branch_window(self, bi: int, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Upper bounds on the mass of ``L_bi f`` on ``[a, b]`` and its variation on ``(a, b)``."""
        br = self.m.branches[bi]
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        n = a.size
        if br.constant:
            d0, d1 = br.inner
            val = br.T(Interval(d0, d1))
            hit = (val.lo <= b) & (val.hi >= a)
            ms = float(self.mass(np.array([d0]), np.array([d1]))[0])
            mass = np.where(hit, ms, 0.0)
            var = np.where(hit & (ms > 0), INF, 0.0)
            return mass, var
        ya = np.concatenate([a, b])
        plo, phi_ = self.phi(bi, ya)
        pa_lo, pb_lo = plo[:n], plo[n:]
        pa_hi, pb_hi = phi_[:n], phi_[n:]
        if br.increasing:
            Jlo, Jhi = pa_lo, pb_hi
        else:
            Jlo, Jhi = pb_lo, pa_hi
        nonempty = Jhi >= Jlo
        Jlo = np.where(nonempty, Jlo, 0.0)
        Jhi = np.where(nonempty, Jhi, 0.0)
        mass = np.where(nonempty, self.mass(Jlo, Jhi), 0.0)
        vlo, vhi = self._snap_to_grid(br, Jlo, Jhi, a, b)
        varJ = np.where(nonempty, self.variation(vlo, vhi), 0.0)
        inv, dist = _inverse_derivative_bounds(br, Jlo, Jhi)
        with np.errstate(invalid="ignore"):
            t1 = np.where(varJ > 0, varJ * inv, 0.0)
            t2 = np.where(mass > 0, mass * dist, 0.0)
        var = np.nextafter(np.nextafter(t1 + t2, INF), INF)
        var = np.where(np.isnan(var), INF, var)
        # jumps of L_i f at the images of the branch endpoints
        for y in br.inner:
            Ty = br.T(Interval(y, y))
            hit = (Ty.lo < b) & (Ty.hi > a)
            if not np.any(hit):
                continue
            fy = self.sup_near(y)
            if fy == 0.0:
                continue
            try:
                dTy = abs(br.dT(Interval(y, y)))
                term = INF if dTy.lo == 0.0 else (Interval(fy, fy) / dTy.mig).hi
            except ia.DomainError:
                term = INF
            var = np.where(hit, np.nextafter(var + term, INF), var)
        return mass, var

    def _snap_to_grid(self, br, Jlo, Jhi, a, b):
        """Shrink ``(Jlo, Jhi)`` to the nearest grid points still outside ``(phi(a), phi(b))``.

        A preimage enclosure a few ulps wide can straddle a grid point that the
        true open preimage does not contain, which would charge that jump to
        two neighbouring windows.  A grid point ``p`` may replace ``Jlo`` when
        ``T(p)`` is certified to lie on the outer side of the window edge.
        """
        k = self.k
        p = np.ceil(Jlo * k) / k
        q = np.floor(Jhi * k) / k
        lo_edge, hi_edge = (a, b) if br.increasing else (b, a)
        with np.errstate(all="ignore"):
            tp, tq = br.T(IntervalArray(p)), br.T(IntervalArray(q))
        if br.increasing:
            ok_p, ok_q = tp.hi <= lo_edge, tq.lo >= hi_edge
        else:
            ok_p, ok_q = tp.lo >= lo_edge, tq.hi <= hi_edge
        ok_p &= (p >= Jlo) & (p <= Jhi)
        ok_q &= (q >= Jlo) & (q <= Jhi)
        if br.rational:
            # ties T(p) == edge cannot be certified by outward-rounded evaluation
            sign = 1 if br.increasing else -1
            for pts, ok, edge, side in ((p, ok_p, lo_edge, 1), (q, ok_q, hi_edge, -1)):
                near = ~ok & (pts >= Jlo) & (pts <= Jhi)
                for j in np.nonzero(near)[0]:
                    diff = br.T_exact(Fraction(float(pts[j]))) - Fraction(float(edge[j]))
                    ok[j] = sign * side * diff <= 0
        return np.where(ok_p, p, Jlo), np.where(ok_q, q, Jhi)

    def gap_window(self, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Contribution of the slivers between the inner domains of adjacent branches."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        mass = np.zeros(a.size)
        var = np.zeros(a.size)
        for p, q in zip(self.m.branches, self.m.branches[1:]):
            g0, g1 = p.inner[1], q.inner[0]
            if g1 <= g0:
                continue
            gap = Interval(g0, g1)
            img = p.T(gap).hull(q.T(gap))
            ms = (Interval(self.sup_near(g0), self.sup_near(g0)) * gap.width).hi
            hit = (img.lo <= b) & (img.hi >= a)
            mass = np.where(hit, np.nextafter(mass + ms, INF), mass)
            var = np.where(hit & (ms > 0), INF, var)
        return mass, var

    def window(self, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Upper bounds on the mass of ``L f`` on ``[a, b]`` and its variation on ``(a, b)``."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        mass, var = self.gap_window(a, b)
        for bi in range(len(self.m.branches)):
            ms, vr = self.branch_window(bi, a, b)
            mass = np.nextafter(mass + ms, INF)
            var = np.nextafter(var + vr, INF)
        valid = b >= a
        return np.where(valid, mass, 0.0), np.where(valid, var, 0.0)


def _inverse_derivative_bounds(br: Branch, lo: np.ndarray, hi: np.ndarray, pieces: int = 4):
    """Sup of ``1/|T'|`` and of ``|T''|/T'^2`` over each ``[lo, hi]``."""
    n = lo.size
    t = np.linspace(0.0, 1.0, pieces + 1)
    pts = lo[:, None] + (hi - lo)[:, None] * t[None, :]
    pts[:, 0], pts[:, -1] = lo, hi
    pts = np.maximum.accumulate(pts, axis=1)
    X = IntervalArray(pts[:, :-1], pts[:, 1:])
    with np.errstate(all="ignore"):
        d1 = abs(br.dT(X))
        d2 = abs(br.d2T(X))
        mig = d1.lo
        inv = np.where(mig > 0, np.nextafter(1.0 / mig, INF), INF)
        den = np.where(mig > 0, np.nextafter(mig * mig, -INF), 0.0)
        dist = np.where(den > 0, np.nextafter(d2.hi / den, INF), INF)
    inv = np.where(np.isnan(inv), INF, inv)
    dist = np.where(np.isnan(dist) | np.isnan(d2.hi), INF, dist)
    return inv.max(axis=1).reshape(n), dist.max(axis=1).reshape(n)


# ---------------------------------------------------------------------------
# Ledgers
# ---------------------------------------------------------------------------


@dataclass
class Ledgers:
    """Per-cell certified bounds on the coarse partition ``Pi``.

    All arrays are indexed by the cells of ``Pi`` (``k_est`` cells); the
    branch-resolved ones have a leading axis over branches plus one extra row
    for the inter-branch slivers.
    """

    k_est: int
    edges: np.ndarray
    var_Li: np.ndarray
    mass_Li: np.ndarray
    var_NL: np.ndarray
    mass_NL: np.ndarray
    var_NL_total: float
    sup_dT: np.ndarray
    var_L: np.ndarray = field(default=None)
    mass_L: np.ndarray = field(default=None)
    reach: np.ndarray = field(default=None)

    def to_csv(self, path: str, linf: np.ndarray | None = None) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["interval", "lo", "hi", "var_NLf", "mass_NLf", "linf"])
            for i in range(self.k_est):
                w.writerow([i, repr(self.edges[i]), repr(self.edges[i + 1]), repr(float(self.var_NL[i])),
                            repr(float(self.mass_NL[i])), "" if linf is None else repr(float(linf[i]))])


def _kernel_sup_matrix(edges: np.ndarray, wedges: np.ndarray, xi: float) -> sps.csr_matrix:
    """Matrix ``K[I, q] >= sup_{y in W_q} P(y + noise folds into I)``."""
    h = xi / 2
    K_n = edges.size - 1
    Q = wedges.size - 1
    wq = wedges[1] - wedges[0]
    a, b = edges[:-1], edges[1:]
    rows, cols, vals = [], [], []
    for r0, r1 in ((a, b), (-b, -a), (2.0 - b, 2.0 - a)):
        q_lo = np.clip(np.floor((r0 - h) / wq).astype(np.int64) - 1, 0, Q)
        q_hi = np.clip(np.ceil((r1 + h) / wq).astype(np.int64) + 1, 0, Q)
        span = np.maximum(q_hi - q_lo, 0)
        if span.sum() == 0:
            continue
        I = np.repeat(np.arange(K_n), span)
        q = np.repeat(q_lo, span) + (np.arange(span.sum()) - np.repeat(np.cumsum(span) - span, span))
        R0, R1 = np.repeat(r0, span), np.repeat(r1, span)
        w0, w1 = wedges[q], wedges[q + 1]
        inter = np.minimum(R1, w1 + h) - np.maximum(R0, w0 - h)
        ov = np.minimum(np.minimum(R1 - R0, xi), np.maximum(inter, 0.0))
        keep = ov > 0
        rows.append(I[keep]); cols.append(q[keep]); vals.append(np.nextafter(ov[keep], INF))
    M = sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(K_n, Q))
    M.sum_duplicates()
    M.data = np.minimum(np.nextafter(np.nextafter(M.data, INF) / xi, INF) * (1 + 4 * gamma(4)), 1.0)
    return M


def variation_ledgers(m: MapModel, kernel: NoiseKernel | float, f: np.ndarray, k_est: int,
                      sub: int = 4) -> Ledgers:
    """Certified local ledgers of ``L f`` and ``N L f`` on ``k_est`` uniform cells.

    Parameters
    ----------
    m : MapModel
    kernel : NoiseKernel or float
    f : ndarray
        Density values on the fine grid; ``len(f)`` must be a multiple of ``k_est``.
    k_est : int
        Number of cells of the coarse partition.
    sub : int
        Sub-windows per coarse cell used to bound the mass of ``N L f``.
    """
    xi = _xi_of(kernel)
    h = xi / 2
    pf = Pushforward(m, f)
    if pf.k % k_est:
        raise ValueError("the coarse partition must be made of whole fine cells")
    edges = np.arange(k_est + 1) / k_est
    a, b = edges[:-1], edges[1:]
    nb = len(m.branches)
    var_Li = np.zeros((nb + 1, k_est))
    mass_Li = np.zeros((nb + 1, k_est))
    for bi in range(nb):
        mass_Li[bi], var_Li[bi] = pf.branch_window(bi, a, b)
    mass_Li[nb], var_Li[nb] = pf.gap_window(a, b)
    mass_L = np.nextafter(mass_Li.sum(axis=0), INF) * (1 + gamma(nb + 2))
    var_L = np.nextafter(var_Li.sum(axis=0), INF) * (1 + gamma(nb + 2))

    dn = lambda x: np.nextafter(x, -INF)
    upx = lambda x: np.nextafter(x, INF)
    # direct term of the local noise bound: min of the mass and variation alternatives
    mL_minus, _ = pf.window(dn(a - h), upx(b - h))
    mL_plus, _ = pf.window(dn(a + h), upx(b + h))
    _, vL_wide = pf.window(dn(a - h), upx(b + h))
    inv_xi = (Interval(1.0, 1.0) / Interval(xi, xi)).hi
    mass_alt = upx(upx(mL_minus + mL_plus) * inv_xi)
    inside = (dn(a - h) >= 0.0) & (upx(b + h) <= 1.0)
    with np.errstate(invalid="ignore"):
        var_alt = np.where(inside & np.isfinite(vL_wide), upx(upx((b - a) * vL_wide) * inv_xi), INF)
    direct = np.minimum(mass_alt, var_alt)
    # reflections at 0 and 1 (mass alternative only)
    m0, _ = pf.window(np.maximum(dn(h - b), 0.0), np.minimum(upx(h - a), 1.0))
    m1, _ = pf.window(np.maximum(dn(2.0 - b - h), 0.0), np.minimum(upx(2.0 - a - h), 1.0))
    refl0 = np.where(a < h, upx(m0 * inv_xi), 0.0)
    refl1 = np.where(b > 1.0 - h, upx(m1 * inv_xi), 0.0)
    var_NL = upx(upx(direct + refl0) + refl1)

    # mass of N L f on each cell through the folded kernel
    Q = k_est * sub
    wedges = np.arange(Q + 1) / Q
    mass_W, _ = pf.window(wedges[:-1], wedges[1:])
    K = _kernel_sup_matrix(edges, wedges, xi)
    nnz_row = int(np.max(np.diff(K.indptr))) if K.nnz else 0
    mass_NL = np.minimum(upx((K @ mass_W) * (1 + gamma(nnz_row + 2))), upx(pf.total * (1 + gamma(4))))

    total_mass = upx(pf.total + float(np.max(mass_Li[nb], initial=0.0)) * (nb + 1))
    var_total = min(ia.sum_up(var_NL) if np.all(np.isfinite(var_NL)) else INF,
                    ia.up((Interval(2.0, 2.0) / Interval(xi, xi)).hi * total_mass))

    sup_dT = _sup_abs_derivative(m, edges)
    reach = _reachable_cells(m, edges, h)
    return Ledgers(k_est, edges, var_Li, mass_Li, var_NL, mass_NL, var_total, sup_dT, var_L, mass_L, reach)


def _reachable_cells(m: MapModel, edges: np.ndarray, h: float) -> np.ndarray:
    """Cells that ``N L`` of any measure can charge.

    ``N L g`` vanishes on cells whose folded ``h``-neighbourhood misses the
    range of ``T``; stationary densities vanish there too.
    """
    rng = None
    for br in m.branches:
        img = br.image()
        rng = img if rng is None else rng.hull(img)
    a, b = edges[:-1], edges[1:]
    lo, hi = np.nextafter(a - h, -INF), np.nextafter(b + h, INF)
    hit = (lo <= rng.hi) & (hi >= rng.lo)
    hit |= (lo < 0.0) & (-lo >= rng.lo)                     # reflection at 0
    hit |= (hi > 1.0) & (2.0 - hi <= rng.hi)                 # reflection at 1
    return hit


def _sup_abs_derivative(m: MapModel, edges: np.ndarray, pieces: int = 8) -> np.ndarray:
    """``sup |T'|`` on each cell (infinite near singular points)."""
    K_n = edges.size - 1
    out = np.zeros(K_n)
    t = np.linspace(0.0, 1.0, pieces + 1)
    for br in m.branches:
        lo = np.maximum(edges[:-1], br.outer[0])
        hi = np.minimum(edges[1:], br.outer[1])
        ok = hi >= lo
        if not np.any(ok):
            continue
        L, H = lo[ok], hi[ok]
        pts = L[:, None] + (H - L)[:, None] * t[None, :]
        pts[:, 0], pts[:, -1] = L, H
        pts = np.maximum.accumulate(pts, axis=1)
        with np.errstate(all="ignore"):
            d = abs(br.dT(IntervalArray(pts[:, :-1], pts[:, 1:])))
        s = np.where(np.isnan(d.hi), INF, d.hi).max(axis=1)
        out[ok] = np.maximum(out[ok], s)
    return out


# ---------------------------------------------------------------------------
# Error budget
# ---------------------------------------------------------------------------


@dataclass
class ErrorBudget:
    """Constants of the bootstrap bound and the resulting L1 error.

    ``D = A / (1 - alpha)`` multiplies the unknown error and
    ``C = B / (1 - alpha)`` is additive, so that
    ``final_l1 = (numerical_error + C) / (1 - D)``.
    """

    A1: float
    B1: float
    A2: float
    B2: float
    A3: float
    B3: float
    A: float
    B: float
    C: float
    D: float
    numerical_error: float
    a_priori: float
    bootstrap_l1: float
    final_l1: float
    downgraded: bool

    def to_dict(self) -> dict:
        return {name: {"lo": repr(0.0), "hi": repr(float(getattr(self, name)))}
                for name in ("A1", "B1", "A2", "B2", "A3", "B3", "A", "B", "C", "D",
                             "numerical_error", "a_priori", "bootstrap_l1", "final_l1")} | {
            "downgraded": self.downgraded}


def bootstrap_error(m: MapModel, kernel: NoiseKernel | float, cert: ContractionCertificate, f: np.ndarray,
                    numerical_error: float, ledgers: Ledgers) -> ErrorBudget:
    """Combine the ledgers into the a-posteriori bound on ``||f_xi - f||_{L1}``."""
    kern = kernel if isinstance(kernel, NoiseKernel) else NoiseKernel(float(kernel))
    k = np.asarray(f).size
    delta = Interval.from_fraction(Fraction(1, k))
    var_rho_xi = kern.var_rho_xi
    half = delta / 2
    A1 = (half * var_rho_xi).hi
    A2 = A1
    A3 = A1
    var_tot = Interval(0.0, ledgers.var_NL_total)
    B1 = (half * var_tot).hi
    quarter = (delta / 4).hi
    with np.errstate(invalid="ignore"):
        terms = np.minimum(np.where(ledgers.var_Li > 0, ledgers.var_Li * quarter, 0.0), ledgers.mass_Li)
    terms = np.nextafter(terms, INF)
    B2 = (half * var_rho_xi * Interval(0.0, ia.sum_up(terms))).hi
    c8 = (delta * delta / 8 * var_rho_xi).hi
    with np.errstate(invalid="ignore"):
        w = np.minimum(np.nextafter(c8 * ledgers.sup_dT, INF), half.hi)
        t3 = np.where(ledgers.var_NL > 0, np.nextafter(w * ledgers.var_NL, INF), 0.0)
    B3 = ia.up(ia.sum_up(t3) + (delta * delta / 4 * var_rho_xi * var_tot).hi, 1)
    S = _iv(cert.sum_Ci)
    one = Interval(1.0, 1.0)
    A = (Interval(A1, A1) + (Interval(A2, A2) + Interval(A3, A3)) * S).hi
    B = (Interval(B1, B1) + (Interval(B2, B2) + Interval(B3, B3)) * S).hi
    gap = one - _iv(cert.alpha)
    D = (Interval(A, A) / gap).hi
    C = (Interval(B, B) / gap).hi
    a_pri = a_priori_error(cert, k, kern).hi
    fallback = ia.up(a_pri + numerical_error)
    if D < 1.0 and math.isfinite(C):
        boot = ((Interval(numerical_error, numerical_error) + Interval(C, C)) / (one - Interval(D, D))).hi
    else:
        boot = INF
    final = min(boot, fallback)
    return ErrorBudget(A1, B1, A2, B2, A3, B3, A, B, C, D, numerical_error, a_pri, boot, final,
                       downgraded=not boot <= fallback)


def local_linf_bounds(ledgers: Ledgers, l1_error: float, kernel: NoiseKernel | float) -> np.ndarray:
    """Upper bounds on ``sup_I f_xi`` for each cell ``I`` of the coarse partition.

    ``Var_I(N L f) + ||N L f||_{L1(I)} / |I| + ||f - f_xi||_{L1} ||rho_xi||_inf``,
    never exceeding the global bound ``||rho_xi||_inf``, and zero on cells that
    the noisy dynamics cannot reach.
    """
    xi = _xi_of(kernel)
    inv_xi = (Interval(1.0, 1.0) / Interval(xi, xi)).hi
    width = 1.0 / ledgers.k_est
    avg = np.nextafter(ledgers.mass_NL / width, INF)
    err = ia.up(l1_error * inv_xi)
    local = np.nextafter(np.nextafter(ledgers.var_NL + avg, INF) + err, INF)
    local = np.minimum(local, inv_xi)
    if ledgers.reach is not None:
        local = np.where(ledgers.reach, local, 0.0)
    return local


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


@dataclass
class DensityEnclosure:
    """A computed stationary density with its certified error and ledgers."""

    k: int
    xi: float
    values: np.ndarray
    mass: Interval
    l1_error: float
    numerical_error: float
    budget: ErrorBudget
    ledgers: Ledgers
    linf: np.ndarray

    @property
    def delta(self) -> Interval:
        return Interval.from_fraction(Fraction(1, self.k))

    def linf_on(self, lo: float, hi: float) -> float:
        """Certified bound on ``sup f_xi`` over ``[lo, hi]``."""
        e = self.ledgers.edges
        i0 = max(int(np.searchsorted(e, lo, side="right")) - 1, 0)
        i1 = min(int(np.searchsorted(e, hi, side="left")), self.ledgers.k_est)
        return float(np.max(self.linf[i0:max(i1, i0 + 1)]))

    def report(self) -> dict:
        return {
            "k": self.k,
            "xi": repr(self.xi),
            "mass": self.mass.to_strings(),
            "l1_error": {"lo": "0.0", "hi": repr(self.l1_error)},
            "budget": self.budget.to_dict(),
        }


def certify_density(m: MapModel, op: UlamOperator, kernel: NoiseKernel | float, cert: ContractionCertificate,
                    k_est: int | None = None, tol: float = 1e-13) -> DensityEnclosure:
    """Fixed point, a-priori and bootstrap errors, and local L-infinity bounds."""
    xi = _xi_of(kernel)
    if k_est is None:
        k_est = max(op.k // 64, 1)
    f, num, _ = fixed_point(op, xi, cert, tol=tol)
    led = variation_ledgers(m, xi, f, k_est)
    budget = bootstrap_error(m, xi, cert, f, num, led)
    linf = local_linf_bounds(led, budget.final_l1, xi)
    mass = Interval(ia.sum_down(f / op.k), ia.sum_up(f / op.k))
    return DensityEnclosure(op.k, xi, f, mass, budget.final_l1, num, budget, led, linf)
