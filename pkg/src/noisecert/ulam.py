"""Ulam discretisation: projection onto cell averages and rigorous assembly.

The discretised transfer operator ``pi_delta L pi_delta`` on ``k`` cells is the
column-stochastic matrix with entries ``P[i, j] = k * |I_j ∩ T^{-1}(I_i)|``.
Each entry is enclosed by an interval: upper bounds come from outer enclosures
of the branch preimages, lower bounds from inner ones.  A float matrix of
midpoints is kept for fast products, together with the constant ``eps_P``,
the largest column sum of entry radii, which bounds ``||(P - P_mid) v||_1``.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
import scipy.sparse as sps

from . import interval as ia
from .dynamics import Branch, MapModel, preimage_points
from .interval import Interval, IntervalArray
from .noise import NoiseKernel, apply_noise_discrete, gamma, noise_error_factor

log = logging.getLogger(__name__)

__all__ = ["UlamGrid", "UlamOperator", "project", "assemble", "apply", "load_operator"]


@dataclass(frozen=True)
class UlamGrid:
    """Uniform partition of ``[0, 1]`` into ``k`` cells."""

    k: int

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")

    @property
    def delta(self) -> Interval:
        return Interval.from_fraction(Fraction(1, self.k))

    @property
    def exact(self) -> bool:
        """True when every boundary ``i/k`` is a float (``k`` a power of two)."""
        return self.k & (self.k - 1) == 0

    def boundaries(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper float enclosures of the points ``i/k``, ``i = 0..k``."""
        i = np.arange(self.k + 1, dtype=float)
        x = i / self.k
        if self.exact:
            return x, x
        return np.maximum(np.nextafter(x, -np.inf), 0.0), np.minimum(np.nextafter(x, np.inf), 1.0)

    def centers(self) -> np.ndarray:
        return (np.arange(self.k) + 0.5) / self.k


def project(grid: UlamGrid | int, f: Callable | None = None, antiderivative: Callable | None = None,
            subdivisions: int = 16) -> IntervalArray:
    """Certified cell averages of a density.

    Parameters
    ----------
    grid : UlamGrid or int
    f : callable, optional
        Interval evaluator ``IntervalArray -> IntervalArray`` of the density.
        Averages are enclosed by the range of ``f`` over ``subdivisions`` pieces
        of each cell.
    antiderivative : callable, optional
        Interval evaluator of a primitive ``F``; averages are then
        ``k (F(x_{i+1}) - F(x_i))``, which is exact up to rounding.
    """
    grid = grid if isinstance(grid, UlamGrid) else UlamGrid(int(grid))
    k = grid.k
    lo_b, hi_b = grid.boundaries()
    if antiderivative is not None:
        Fv = antiderivative(IntervalArray(lo_b, hi_b))
        return (Fv[1:] - Fv[:-1]) * float(k) if grid.exact else (Fv[1:] - Fv[:-1]) / grid.delta.lo
    if f is None:
        raise ValueError("need f or antiderivative")
    s = subdivisions
    t = np.arange(s + 1) / s
    pts = lo_b[:-1, None] + (hi_b[1:, None] - lo_b[:-1, None]) * t[None, :]
    pts[:, 0], pts[:, -1] = lo_b[:-1], hi_b[1:]
    vals = f(IntervalArray(pts[:, :-1], pts[:, 1:]))
    lo = np.min(np.broadcast_to(vals.lo, (k, s)), axis=1)
    hi = np.max(np.broadcast_to(vals.hi, (k, s)), axis=1)
    return IntervalArray(lo, hi)


@dataclass
class UlamOperator:
    """Interval-valued Ulam matrix with a float midpoint copy.

    Attributes
    ----------
    k : int
    P_lo, P_hi, P_mid : scipy.sparse.csr_matrix
        Entrywise lower, upper and midpoint matrices on a common pattern.
    eps_P : float
        Upper bound on ``max_j sum_i (P_hi - P_mid)`` and ``(P_mid - P_lo)``.
    """

    k: int
    map_id: str
    map_hash: str
    P_lo: sps.csr_matrix
    P_hi: sps.csr_matrix
    P_mid: sps.csr_matrix
    eps_P: float
    col_sum_lo: np.ndarray
    col_sum_hi: np.ndarray
    warnings: list = field(default_factory=list)

    @property
    def grid(self) -> UlamGrid:
        return UlamGrid(self.k)

    @property
    def matvec_error(self) -> float:
        """Relative l1 bound of float rounding in ``P_mid @ v``.

        CSR products accumulate each row sequentially, so row ``i`` errs by at
        most ``gamma(nnz_i) sum_j |P_ij v_j|``; summing over rows gives
        ``gamma(max nnz) * max column sum * ||v||_1``.
        """
        nnz_row = int(np.max(np.diff(self.P_mid.indptr))) if self.P_mid.nnz else 0
        colsum = float(np.max(np.asarray(abs(self.P_mid).sum(axis=0)))) if self.P_mid.nnz else 0.0
        return ia.up(gamma(nnz_row + 1) * ia.up(colsum * (1 + gamma(self.k))), 1)

    @property
    def max_col_sum(self) -> float:
        return float(np.max(self.col_sum_hi))

    def step_error_factor(self, kernel: NoiseKernel | float) -> float:
        """Bound ``e`` with ``||L v - apply(v)||_1 <= e ||v||_1`` for one noisy step.

        Covers the entry enclosures, matvec rounding and the noise rounding.
        """
        xi = kernel.xi if isinstance(kernel, NoiseKernel) else float(kernel)
        a = ia.up(self.eps_P + self.matvec_error)
        mass = ia.up(self.max_col_sum + a)
        return ia.up(a + noise_error_factor(self.k, xi) * mass, 2)

    def column_sums_contain_one(self) -> bool:
        return bool(np.all(self.col_sum_lo <= 1.0) and np.all(self.col_sum_hi >= 1.0))

    def entry(self, i: int, j: int) -> Interval:
        return Interval(float(self.P_lo[i, j]), float(self.P_hi[i, j]))

    def save(self, path: str) -> None:
        """Write the operator to an ``.npz`` file (bit-exact reload)."""
        np.savez_compressed(
            path, k=self.k, map_id=self.map_id, map_hash=self.map_hash,
            indptr=self.P_lo.indptr, indices=self.P_lo.indices,
            lo=self.P_lo.data, hi=self.P_hi.data, eps_P=self.eps_P,
            col_sum_lo=self.col_sum_lo, col_sum_hi=self.col_sum_hi,
        )


def load_operator(path: str, expected_hash: str | None = None) -> UlamOperator:
    d = np.load(path, allow_pickle=False)
    if expected_hash is not None and str(d["map_hash"]) != expected_hash:
        raise ValueError("cached operator belongs to a different map definition")
    k = int(d["k"])
    shape = (k, k)
    lo = sps.csr_matrix((d["lo"], d["indices"], d["indptr"]), shape=shape)
    hi = sps.csr_matrix((d["hi"], d["indices"], d["indptr"]), shape=shape)
    mid = sps.csr_matrix((0.5 * d["lo"] + 0.5 * d["hi"], d["indices"], d["indptr"]), shape=shape)
    return UlamOperator(k, str(d["map_id"]), str(d["map_hash"]), lo, hi, mid, float(d["eps_P"]),
                        d["col_sum_lo"], d["col_sum_hi"])


def _segment_entries(p_out, q_out, p_in, q_in, rows, xlo, xhi, k, exact):
    """Distribute preimage segments ``[p, q]`` over the columns they meet.

    Returns COO triples for upper (outer) and lower (inner) entry bounds.
    """
    keep = q_out > p_out
    p_out, q_out, p_in, q_in, rows = p_out[keep], q_out[keep], p_in[keep], q_in[keep], rows[keep]
    if rows.size == 0:
        z = np.zeros(0)
        return z.astype(np.int64), z.astype(np.int64), z, z
    j0 = np.clip(np.searchsorted(xhi, p_out, side="right") - 1, 0, k - 1)
    j1 = np.clip(np.searchsorted(xlo, q_out, side="left") - 1, 0, k - 1)
    j1 = np.maximum(j1, j0)
    span = j1 - j0 + 1
    r = np.repeat(rows, span)
    start = np.repeat(j0, span)
    offs = np.arange(span.sum()) - np.repeat(np.cumsum(span) - span, span)
    c = start + offs
    po, qo = np.repeat(p_out, span), np.repeat(q_out, span)
    pi_, qi_ = np.repeat(p_in, span), np.repeat(q_in, span)
    # outer: segment ∩ outer column [xlo_j, xhi_{j+1}]
    up_len = np.minimum(qo, xhi[c + 1]) - np.maximum(po, xlo[c])
    up_len = np.where(up_len > 0, np.nextafter(up_len, np.inf), 0.0)
    lo_len = np.minimum(qi_, xlo[c + 1]) - np.maximum(pi_, xhi[c])
    lo_len = np.where(lo_len > 0, np.nextafter(lo_len, -np.inf), 0.0)
    if exact:
        hi_v = np.minimum(up_len * k, 1.0)
        lo_v = np.maximum(lo_len * k, 0.0)
    else:
        hi_v = np.minimum(np.nextafter(up_len * k, np.inf), 1.0)
        lo_v = np.maximum(np.nextafter(lo_len * k, -np.inf), 0.0)
    good = hi_v > 0
    return r[good], c[good], lo_v[good], hi_v[good]


def _preimages_on_grid(branch: Branch, ylo: np.ndarray, yhi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo1, hi1 = preimage_points(branch, ylo, tol=0.0, max_iter=80)
    if ylo is yhi or np.array_equal(ylo, yhi):
        return lo1, hi1
    lo2, hi2 = preimage_points(branch, yhi, tol=0.0, max_iter=80)
    return np.minimum(lo1, lo2), np.maximum(hi1, hi2)


def assemble(m: MapModel, grid: UlamGrid | int) -> UlamOperator:
    """Rigorously assemble the Ulam matrix of ``m`` on ``grid``.

    Examples
    --------
    >>> from noisecert.dynamics import make_doubling_map
    >>> op = assemble(make_doubling_map(), 2)
    >>> op.entry(0, 0).contains(0.5)
    True
    """
    grid = grid if isinstance(grid, UlamGrid) else UlamGrid(int(grid))
    k = grid.k
    xlo, xhi = grid.boundaries()
    rows_all, cols_all, lo_all, hi_all = [], [], [], []
    warnings = []
    for b in m.branches:
        d0, d1 = b.inner
        if d1 <= d0:
            continue
        if b.constant:
            val = b.T(Interval(d0, d1))
            r0 = int(min(max(math.floor(val.lo * k), 0), k - 1))
            r1 = int(min(max(math.floor(val.hi * k), 0), k - 1))
            # mass of the domain piece inside each column
            seg_lo = np.array([d0])
            seg_hi = np.array([d1])
            for r in range(r0, r1 + 1):
                rr, cc, lo_v, hi_v = _segment_entries(seg_lo, seg_hi, seg_lo, seg_hi,
                                                      np.array([r]), xlo, xhi, k, grid.exact)
                if r0 != r1:
                    lo_v = np.zeros_like(lo_v)
                rows_all.append(rr); cols_all.append(cc); lo_all.append(lo_v); hi_all.append(hi_v)
            continue
        phi_lo, phi_hi = _preimages_on_grid(b, xlo, xhi)
        # preimage of row i is between phi(y_i) and phi(y_{i+1})
        if b.increasing:
            p_out, q_out = phi_lo[:-1], phi_hi[1:]
            p_in, q_in = phi_hi[:-1], phi_lo[1:]
        else:
            p_out, q_out = phi_lo[1:], phi_hi[:-1]
            p_in, q_in = phi_hi[1:], phi_lo[:-1]
        rows = np.arange(k)
        rr, cc, lo_v, hi_v = _segment_entries(p_out, q_out, p_in, q_in, rows, xlo, xhi, k, grid.exact)
        rows_all.append(rr); cols_all.append(cc); lo_all.append(lo_v); hi_all.append(hi_v)
        width = float(np.max(phi_hi - phi_lo)) if phi_hi.size else 0.0
        if width * k > 1.0:
            warnings.append(f"branch preimages wider than one cell (max width {width:.3g})")
    # mass in the slivers between inner domains of consecutive branches
    for a, b in zip(m.branches, m.branches[1:]):
        g0, g1 = a.inner[1], b.inner[0]
        if g1 > g0:
            gap = Interval(g0, g1)
            img = a.T(gap).hull(b.T(gap))
            r0 = int(min(max(math.floor(img.lo * k), 0), k - 1))
            r1 = int(min(max(math.floor(img.hi * k), 0), k - 1))
            for r in range(r0, r1 + 1):
                rr, cc, _, hi_v = _segment_entries(np.array([g0]), np.array([g1]), np.array([g0]),
                                                   np.array([g0]), np.array([r]), xlo, xhi, k, grid.exact)
                rows_all.append(rr); cols_all.append(cc)
                lo_all.append(np.zeros_like(hi_v)); hi_all.append(hi_v)
    rows = np.concatenate(rows_all)
    cols = np.concatenate(cols_all)
    lo = np.concatenate(lo_all)
    hi = np.concatenate(hi_all)
    P_hi = sps.csr_matrix((hi, (rows, cols)), shape=(k, k))
    P_lo = sps.csr_matrix((lo, (rows, cols)), shape=(k, k))
    P_hi.sum_duplicates()
    P_lo.sum_duplicates()
    P_lo = _same_pattern(P_lo, P_hi)
    # duplicate summation rounds to nearest; widen by one ulp to stay rigorous
    # (entries are measures of subsets of a cell, so 1 is always a valid cap)
    P_hi.data = np.minimum(np.nextafter(P_hi.data, np.inf), 1.0)
    P_lo.data = np.maximum(np.nextafter(P_lo.data, -np.inf), 0.0)
    P_mid = P_hi.copy()
    P_mid.data = 0.5 * P_lo.data + 0.5 * P_hi.data
    rad = np.maximum(P_hi.data - P_mid.data, P_mid.data - P_lo.data)
    R = P_hi.copy()
    R.data = np.nextafter(rad, np.inf)
    col_rad = np.asarray(R.sum(axis=0)).ravel()
    eps_P = ia.up(float(np.max(col_rad)) * (1 + gamma(k)), 1)
    col_lo = _col_sums_directed(P_lo, down=True)
    col_hi = _col_sums_directed(P_hi, down=False)
    op = UlamOperator(k, m.identifier, m.content_hash(), P_lo, P_hi, P_mid, eps_P, col_lo, col_hi, warnings)
    if not op.column_sums_contain_one():
        bad = int(np.count_nonzero((col_lo > 1.0) | (col_hi < 1.0)))
        raise AssertionError(f"{bad} column-sum enclosures miss 1")
    return op


def _same_pattern(A: sps.csr_matrix, B: sps.csr_matrix) -> sps.csr_matrix:
    """Return A re-expressed on the sparsity pattern of B (missing entries are 0)."""
    A = A.tocsr()
    A.sort_indices()
    B.sort_indices()
    out = B.copy()
    out.data = np.asarray(A[B.nonzero()]).ravel() if B.nnz else out.data
    # nonzero() order matches csr data order for sorted indices
    return out


def _col_sums_directed(A: sps.csr_matrix, down: bool) -> np.ndarray:
    C = A.tocsc()
    s = np.asarray(C.sum(axis=0)).ravel()
    n = np.diff(C.indptr)
    g = np.array([gamma(int(x) + 1) for x in n])
    slack = g * s
    return np.maximum(s - slack, 0.0) if down else s + slack


def apply(op: UlamOperator, kernel: NoiseKernel | float, v: np.ndarray) -> np.ndarray:
    """One step of the noisy discretised operator: Ulam matrix, then noise."""
    return apply_noise_discrete(kernel, op.P_mid @ v)


def assemble_cached(m: MapModel, k: int, cache_dir: str | None) -> UlamOperator:
    """Assemble, or reload from ``cache_dir`` when a matching file exists."""
    if not cache_dir:
        return assemble(m, k)
    os.makedirs(cache_dir, exist_ok=True)
    name = f"ulam-{m.content_hash()}-k{k}.npz"
    path = os.path.join(cache_dir, name)
    if os.path.exists(path):
        log.info("reusing cached operator %s", path)
        return load_operator(path, m.content_hash())
    op = assemble(m, k)
    op.save(path)
    return op
