"""Certified contraction of the noisy Ulam operator on zero-average vectors.

For mass vectors the unit ball of the zero-average subspace ``V`` is the
convex hull of the vectors ``(e_i - e_j) / 2``.  Writing
``d_j >= ||L^n e_j - g||_1`` for an arbitrary reference vector ``g`` gives

    ||L^n|_V|| <= max_{i != j} (d_i + d_j) / 2,

so iterating every basis column once (in batches) yields rigorous bounds
``C_n`` for all ``n`` up to the iteration horizon.  Float rounding is tracked
through the per-step error factor of the operator.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from fractions import Fraction

import numpy as np
from scipy.spatial.distance import cdist

from . import interval as ia
from .interval import Interval
from .noise import NoiseKernel, apply_noise_discrete, gamma, noise_matrix
from .ulam import UlamOperator

log = logging.getLogger(__name__)

__all__ = [
    "ContractionCertificate",
    "NoContractionError",
    "TransferFailedError",
    "approximate_fixed_point",
    "iterate_norm_bound",
    "dobrushin_exact",
    "make_certificate",
    "coarse_fine_transfer",
    "noise_monotonicity",
    "certify_contraction",
    "transfer_bounds",
]


class NoContractionError(ValueError):
    """No iterate bound fell below 1."""


class TransferFailedError(ValueError):
    """The coarse-to-fine correction destroyed contraction."""

    def __init__(self, message: str, value: float):
        super().__init__(message)
        self.value = value


@dataclass
class ContractionCertificate:
    """Upper bounds ``C_i >= ||L^i|_V||`` with ``C_{n_bar} = alpha < 1``.

    ``bounds`` keeps every computed ``C_0 .. C_N`` (``C_0 = 1``); ``Ci`` are the
    first ``n_bar`` of them and ``sum_Ci`` their upward-rounded sum.
    """

    k: int | None
    xi: float
    n_bar: int
    alpha: float
    bounds: list
    provenance: list = field(default_factory=list)

    def __post_init__(self):
        if not (1 <= self.n_bar < len(self.bounds)):
            raise ValueError("n_bar out of range")
        if not self.alpha < 1.0:
            raise NoContractionError(f"alpha={self.alpha} is not below 1")
        if any(c > 1.0 for c in self.bounds):
            raise ValueError("iterate bounds must not exceed 1")

    @property
    def Ci(self) -> list:
        return list(self.bounds[: self.n_bar])

    @property
    def sum_Ci(self) -> float:
        return ia.sum_up(self.Ci)

    @property
    def delta(self) -> Interval | None:
        return None if self.k is None else Interval.from_fraction(Fraction(1, self.k))

    @property
    def amplification(self) -> float:
        """Upper bound on ``sum_Ci / (1 - alpha)``."""
        return ia.div_up(self.sum_Ci, ia.down(1.0 - self.alpha))

    def to_dict(self) -> dict:
        iv = lambda v: {"lo": repr(0.0), "hi": repr(float(v))}
        return {
            "k": self.k,
            "delta": None if self.k is None else f"1/{self.k}",
            "xi": repr(self.xi),
            "n_bar": self.n_bar,
            "alpha": iv(self.alpha),
            "Ci": [iv(c) for c in self.Ci],
            "sum_Ci": iv(self.sum_Ci),
            "bounds": [repr(float(c)) for c in self.bounds],
            "provenance": self.provenance,
        }

    @staticmethod
    def from_dict(d: dict) -> "ContractionCertificate":
        return ContractionCertificate(d["k"], float(d["xi"]), int(d["n_bar"]), float(d["alpha"]["hi"]),
                                      [float(c) for c in d["bounds"]], list(d.get("provenance", [])))

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def approximate_fixed_point(op: UlamOperator, kernel: NoiseKernel | float, tol: float = 1e-14,
                            max_iter: int = 100000, start: np.ndarray | None = None) -> tuple[np.ndarray, float, int]:
    """Float power iteration from the uniform mass vector.

    Returns ``(g, residual, iterations)`` where ``residual`` is the float
    value of ``||L g - g||_1`` (not certified).
    """
    k = op.k
    g = np.full(k, 1.0 / k) if start is None else np.asarray(start, dtype=float).copy()
    res = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        h = apply_noise_discrete(kernel, op.P_mid @ g)
        h /= h.sum()
        res = float(np.abs(h - g).sum())
        g = h
        if res <= tol:
            break
    return g, res, it


def _run_batch(op: UlamOperator, xi: float, cols: np.ndarray, g: np.ndarray, n_max: int,
               audit_every: int, audit_matrix) -> np.ndarray:
    """Return ``D[n, c] ~ ||L^n e_c - g||_1`` (float) for ``n = 1..n_max``."""
    k = op.k
    V = np.zeros((k, cols.size))
    V[cols, np.arange(cols.size)] = 1.0
    D = np.empty((n_max, cols.size))
    for n in range(1, n_max + 1):
        W = apply_noise_discrete(xi, op.P_mid @ V)
        if audit_matrix is not None and n % audit_every == 0:
            ref = audit_matrix @ (op.P_mid @ V[:, :4])
            diff = np.abs(ref - W[:, :4]).sum(axis=0)
            scale = np.abs(V[:, :4]).sum(axis=0)
            allowed = 4 * op.step_error_factor(xi) * scale + 1e-300
            if np.any(diff > allowed):
                raise RuntimeError(f"audit mismatch at step {n}: {diff.max():.3g} > {allowed.max():.3g}")
        V = W
        D[n - 1] = np.abs(V - g[:, None]).sum(axis=0)
    return D


def iterate_norm_bound(op: UlamOperator, kernel: NoiseKernel | float, n: int, *, batch: int = 512,
                       reference: np.ndarray | None = None, workers: int = 1,
                       audit_every: int = 8, audit: bool = True) -> list[float]:
    """Certified upper bounds ``C_1 .. C_n`` on ``||L^i_{delta,xi}|_V||_{L1}``.

    Parameters
    ----------
    op : UlamOperator
    kernel : NoiseKernel or float
    n : int
        Number of iterates.
    batch : int
        Columns iterated together.
    reference : ndarray, optional
        Reference vector ``g`` (defaults to an approximate fixed point).
    workers : int
        Threads used over column batches; the max-reduction makes the result
        independent of the worker count.
    audit_every : int
        Every so many steps the fast noise path is compared against an
        independently built sparse noise matrix; a mismatch raises.

    Returns
    -------
    list of float
        ``[C_1, ..., C_n]``, each clipped at 1.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    xi = kernel.xi if isinstance(kernel, NoiseKernel) else float(kernel)
    k = op.k
    g = approximate_fixed_point(op, xi, tol=1e-13, max_iter=5000)[0] if reference is None else reference
    audit_matrix = noise_matrix(k, xi) if audit else None
    starts = list(range(0, k, batch))

    def work(s):
        cols = np.arange(s, min(s + batch, k))
        D = _run_batch(op, xi, cols, g, n, audit_every, audit_matrix)
        # keep the two largest per step
        if D.shape[1] >= 2:
            part = -np.partition(-D, 1, axis=1)[:, :2]
        else:
            part = np.concatenate([D, np.zeros_like(D)], axis=1)
        return part

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    allp = np.concatenate(parts, axis=1)
    top = -np.partition(-allp, 1, axis=1)[:, :2]
    # rounding of the float norms and of the iterates themselves
    e_step = op.step_error_factor(xi)
    norm_slack = gamma(k + 2)
    g_norm = ia.sum_up(np.abs(g))
    bounds = []
    err = 0.0
    for i in range(n):
        err = ia.up(err + e_step * ia.up(1.0 + err), 1)
        t1 = ia.up(top[i, 0] + norm_slack * ia.up(1.0 + err + g_norm)) + err
        t2 = ia.up(top[i, 1] + norm_slack * ia.up(1.0 + err + g_norm)) + err
        c = ia.up(0.5 * ia.up(t1 + t2), 2)
        bounds.append(min(1.0, c))
    return bounds


def dobrushin_exact(op: UlamOperator, kernel: NoiseKernel | float, n: int) -> list[float]:
    """Float values of ``||L^i|_V||`` for ``i = 1..n`` on small grids.

    Uses the dense matrix and the exact extreme-point formula
    ``max_{i,j} ||L^n e_i - L^n e_j||_1 / 2``; intended as a test oracle.
    """
    xi = kernel.xi if isinstance(kernel, NoiseKernel) else float(kernel)
    M = (noise_matrix(op.k, xi) @ op.P_mid).toarray()
    A = np.eye(op.k)
    out = []
    for _ in range(n):
        A = M @ A
        out.append(0.5 * float(cdist(A.T, A.T, "cityblock").max()))
    return out


def _objective(bounds: list, n: int) -> float:
    s = ia.sum_up(bounds[:n])
    return ia.div_up(s, ia.down(1.0 - bounds[n])) if bounds[n] < 1.0 else math.inf


def make_certificate(bounds, target_alpha: float = 0.5, k: int | None = None, xi: float = math.nan,
                     provenance: list | None = None) -> ContractionCertificate:
    """Choose ``n_bar`` trading off its size against ``alpha``.

    ``bounds`` is ``[C_0, C_1, ...]`` (``C_0 = 1``).  Among indices with
    ``C_n <= target_alpha`` the one minimising ``sum_{i<n} C_i / (1 - C_n)``
    is chosen; otherwise the smallest bound below 1.

    Examples
    --------
    >>> c = make_certificate([1, 0.5, 0.1], target_alpha=0.2)
    >>> c.n_bar, c.alpha, c.sum_Ci
    (2, 0.1, 1.5)
    """
    bounds = [float(b) for b in bounds]
    if len(bounds) < 2:
        raise NoContractionError("need at least C_0 and C_1")
    cand = [n for n in range(1, len(bounds)) if bounds[n] <= target_alpha]
    if not cand:
        below = [n for n in range(1, len(bounds)) if bounds[n] < 1.0]
        if not below:
            raise NoContractionError("no iterate bound is below 1")
        best = min(bounds[n] for n in below)
        cand = [n for n in below if bounds[n] == best]
    n_bar = min(cand, key=lambda n: (_objective(bounds, n), n))
    return ContractionCertificate(k, xi, n_bar, bounds[n_bar], bounds, list(provenance or []))


def certify_contraction(op: UlamOperator, kernel: NoiseKernel | float, *, target_alpha: float = 0.5,
                        n_cap: int = 400, batch: int = 512, workers: int = 1) -> ContractionCertificate:
    """Pick an iteration horizon from a probe batch, then bound all iterates."""
    xi = kernel.xi if isinstance(kernel, NoiseKernel) else float(kernel)
    g = approximate_fixed_point(op, xi, tol=1e-13, max_iter=20000)[0]
    probe = np.unique(np.linspace(0, op.k - 1, min(op.k, 128)).astype(int))
    D = _run_batch(op, xi, probe, g, n_cap, 8, None)
    est = 0.5 * (-np.partition(-D, 1, axis=1)[:, :2]).sum(axis=1) if probe.size > 1 else D[:, 0]
    hit = np.nonzero(est < target_alpha / 8)[0]
    n_max = n_cap if hit.size == 0 else min(n_cap, int(hit[0] + 1) + 4)
    log.info("contraction horizon n_max=%d for k=%d xi=%g", n_max, op.k, xi)
    bounds = [1.0] + iterate_norm_bound(op, xi, n_max, batch=batch, reference=g, workers=workers)
    return make_certificate(bounds, target_alpha, k=op.k, xi=xi,
                            provenance=[{"step": "direct", "k": op.k, "map": op.map_id, "hash": op.map_hash}])


def transfer_bounds(coarse_bounds: list, coarse_k: int, kernel: NoiseKernel | float) -> list[float]:
    """Fine-level (and continuum) iterate bounds from coarse ones.

    ``C^f_0 = 1`` and ``C^f_{i+1} = min(1, C^c_i + q (2 sum_{j<i} C^c_j + 1))``
    with ``q = delta_c Var(rho) / (2 xi)``.
    """
    kern = kernel if isinstance(kernel, NoiseKernel) else NoiseKernel(float(kernel))
    q = (Interval.from_fraction(Fraction(1, coarse_k)) * kern.var_rho / 2 / Interval(kern.xi, kern.xi)).hi
    out = [1.0]
    s = 0.0
    for i, c in enumerate(coarse_bounds):
        corr = ia.up(q * ia.up(2.0 * s + 1.0))
        out.append(min(1.0, ia.up(c + corr)))
        s = ia.up(s + c)
        if corr >= 1.0:
            break
    return out


def coarse_fine_transfer(coarse: ContractionCertificate, fine_k: int | None, kernel: NoiseKernel | float,
                         target_alpha: float = 0.5) -> ContractionCertificate:
    """Transfer a coarse certificate to a finer grid (``fine_k=None``: continuum).

    Raises
    ------
    TransferFailedError
        If no transferred bound is below 1.
    """
    if coarse.k is None:
        raise ValueError("coarse certificate has no grid")
    if fine_k is not None and fine_k % coarse.k != 0:
        raise ValueError("the fine grid must refine the coarse grid by an integer factor")
    xi = kernel.xi if isinstance(kernel, NoiseKernel) else float(kernel)
    fine = transfer_bounds(coarse.bounds, coarse.k, xi)
    best = min(fine[1:]) if len(fine) > 1 else 1.0
    if best >= 1.0:
        q = transfer_bounds(coarse.bounds[: coarse.n_bar + 1], coarse.k, xi)
        raw = coarse.alpha + ia.up(
            (2.0 * coarse.sum_Ci + 1.0) * (Interval.from_fraction(Fraction(1, coarse.k)) / Interval(xi, xi)).hi)
        raise TransferFailedError(f"transferred bound {raw:.4g} is not below 1", raw)
    prov = list(coarse.provenance) + [{"step": "coarse-fine", "from_k": coarse.k, "to_k": fine_k}]
    return make_certificate(fine, target_alpha, k=fine_k, xi=xi, provenance=prov)


def noise_monotonicity(cert: ContractionCertificate, xi_hat: float,
                       target_alpha: float | None = None) -> ContractionCertificate:
    """Certificate for a larger uniform noise ``xi_hat >= xi``.

    With ``r = xi / xi_hat`` the wider kernel is the mixture ``r * rho_xi +
    (1 - r) * (other)``, hence ``C_i -> C_i r^i + 1 - r^i``.
    """
    if xi_hat < cert.xi:
        raise ValueError("xi_hat must not be smaller than xi")
    r = Interval(cert.xi, cert.xi) / Interval(xi_hat, xi_hat)
    new = []
    for i, c in enumerate(cert.bounds):
        ri = ia.pow_int(r, i)
        val = Interval(1.0, 1.0) - ri * (Interval(1.0, 1.0) - Interval(c, c))
        new.append(min(1.0, val.hi))
    prov = list(cert.provenance) + [{"step": "noise-monotonicity", "from_xi": repr(cert.xi), "to_xi": repr(xi_hat)}]
    if target_alpha is None:
        n_bar = cert.n_bar
        if new[n_bar] >= 1.0:
            return make_certificate(new, 0.5, k=cert.k, xi=xi_hat, provenance=prov)
        return ContractionCertificate(cert.k, xi_hat, n_bar, new[n_bar], new, prov)
    return make_certificate(new, target_alpha, k=cert.k, xi=xi_hat, provenance=prov)
