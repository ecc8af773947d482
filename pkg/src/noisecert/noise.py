"""Uniform additive noise with reflecting boundary, exact and discretised.

The continuous operator convolves a density with ``rho_xi = (1/xi) 1_[-xi/2, xi/2]``
and folds the real line onto ``[0, 1]`` through ``pi(x) = min_i |x - 2i|``.

On a uniform grid of ``k`` cells, projecting the convolution of a
piecewise-constant density gives a Toeplitz stencil ``g(m)`` (the probability
that a uniform point of one cell plus noise lands ``m`` cells away), after
which folding is an exact permutation-and-sum of cells.  Vectors are *mass*
vectors (cell integrals); on a uniform grid this is the density scaled by
``1/k``, and the stencil is the same for both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sps

from . import interval as ia
from .interval import Interval

__all__ = [
    "NoiseKernel",
    "fold_point",
    "fold_index",
    "stencil",
    "apply_noise_discrete",
    "noise_matrix",
    "noise_error_factor",
    "kernel_norms",
    "gamma",
]

U_ROUND = 2.0**-53


def gamma(n: int) -> float:
    """Classical bound ``n u / (1 - n u)`` on accumulated relative rounding error."""
    nu = n * U_ROUND
    return ia.up(nu / (1.0 - nu), 2)


@dataclass(frozen=True)
class NoiseKernel:
    """Uniform kernel of amplitude ``xi`` (support ``[-xi/2, xi/2]``)."""

    xi: float
    kind: str = "uniform"

    def __post_init__(self):
        if self.kind != "uniform":
            raise NotImplementedError("only the uniform kernel is implemented")
        if not (0.0 <= self.xi <= 1.0):
            raise ValueError("xi must lie in [0, 1]")

    @property
    def var_rho(self) -> Interval:
        """Variation of the unit kernel (two jumps of height 1)."""
        return Interval(2.0, 2.0)

    @property
    def var_rho_xi(self) -> Interval:
        return Interval(2.0, 2.0) / Interval(self.xi, self.xi)

    @property
    def sup_rho_xi(self) -> Interval:
        return Interval(1.0, 1.0) / Interval(self.xi, self.xi)

    @property
    def half_width(self) -> float:
        return self.xi / 2

    def density(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= self.xi / 2, 1.0 / self.xi, 0.0)


def fold_point(x):
    """The folding map ``pi(x) = min_i |x - 2i|`` onto ``[0, 1]``."""
    x = np.asarray(x, dtype=float)
    r = np.mod(x, 2.0)
    return np.where(r <= 1.0, r, 2.0 - r)


def fold_index(e: np.ndarray, k: int) -> np.ndarray:
    """Cell of ``[0, 1]`` receiving extended-grid cell ``e`` after folding."""
    r = np.mod(np.asarray(e), 2 * k)
    return np.where(r < k, r, 2 * k - 1 - r)


def _tri_cdf(u: float) -> float:
    """CDF of the difference of two independent uniforms on [0, 1]."""
    if u <= -1.0:
        return 0.0
    if u <= 0.0:
        return 0.5 * (1.0 + u) ** 2
    if u < 1.0:
        return 1.0 - 0.5 * (1.0 - u) ** 2
    return 1.0


@lru_cache(maxsize=64)
def stencil(k: int, xi: float) -> tuple[int, float, tuple[tuple[int, float], ...]]:
    """Decompose the projected kernel on a ``k``-cell grid.

    Returns ``(P, plateau, edges)``: offsets ``|m| <= P`` all carry the
    coefficient ``plateau = 1/w`` (``w = xi k``), and ``edges`` lists the
    remaining nonzero ``(m, g(m))`` pairs.  ``P = -1`` means no plateau.
    """
    if xi == 0.0:
        return -1, 0.0, ((0, 1.0),)
    w = xi * k
    h = w / 2
    plateau = 1.0 / w
    P = math.floor(h - 1.0) if h >= 1.0 else -1
    edges = []
    reach = math.ceil(h + 1.0)
    for m in range(-reach, reach + 1):
        if abs(m) <= P:
            continue
        g = (_tri_cdf(h - m) - _tri_cdf(-h - m)) / w
        if g > 0.0:
            edges.append((m, g))
    return P, plateau, tuple(edges)


def _reach(k: int, xi: float) -> int:
    P, _, edges = stencil(k, xi)
    return max([P] + [abs(m) for m, _ in edges])


@lru_cache(maxsize=64)
def _fold_matrix(k: int, E: int) -> sps.csr_matrix:
    e = np.arange(-E, k + E)
    rows = fold_index(e, k)
    return sps.csr_matrix((np.ones(e.size), (rows, np.arange(e.size))), shape=(k, e.size))


def apply_noise_discrete(kernel: NoiseKernel | float, v: np.ndarray) -> np.ndarray:
    """Apply the projected, folded noise to a grid vector (or a batch of columns).

    Parameters
    ----------
    kernel : NoiseKernel or float
        Noise amplitude.
    v : ndarray, shape (k,) or (k, B)
        Mass (or density) vectors on the uniform ``k``-cell grid.

    Returns
    -------
    ndarray
        Same shape as ``v``.  The float rounding error obeys
        ``||out - exact||_1 <= noise_error_factor(k, xi) * ||v||_1``.
    """
    xi = kernel.xi if isinstance(kernel, NoiseKernel) else float(kernel)
    v = np.asarray(v, dtype=float)
    squeeze = v.ndim == 1
    if squeeze:
        v = v[:, None]
    k = v.shape[0]
    P, plateau, edges = stencil(k, xi)
    E = _reach(k, xi)
    n_e = k + 2 * E
    out = np.zeros((n_e, v.shape[1]))
    # extended index e = j + E for grid cell j; out[e] = sum_j v_j g(e - E - j)
    if P >= 0:
        c = np.zeros((k + 1, v.shape[1]))
        np.cumsum(v, axis=0, out=c[1:])
        e = np.arange(n_e) - E
        hi = np.clip(e + P + 1, 0, k)
        lo = np.clip(e - P, 0, k)
        out += (c[hi] - c[lo]) * plateau
    for m, g in edges:
        # contribution g * v_j to extended cell j + m
        out[E + m:E + m + k] += g * v
    res = _fold_matrix(k, E) @ out
    return res[:, 0] if squeeze else res


def noise_error_factor(k: int, xi: float) -> float:
    """Relative l1 rounding-error bound of :func:`apply_noise_discrete`.

    The prefix sums contribute at most ``2 gamma(n_e) ||v||_1`` per extended
    cell before scaling by ``1/w``; coefficient evaluation and the few edge
    terms contribute ``gamma(n_edges + 16)`` relative to the output mass; each
    folded cell sums at most ``n_e / k + 2`` numbers.
    """
    if xi == 0.0:
        return 0.0
    P, plateau, edges = stencil(k, xi)
    E = _reach(k, xi)
    n_e = k + 2 * E
    w = xi * k
    box = 0.0 if P < 0 else ia.up(2.0 * n_e * gamma(n_e + 2) / w * (1.0 + 4.0 * U_ROUND), 2)
    local = gamma(len(edges) + 16)
    folds = gamma(n_e // k + 4)
    return ia.up(box + local + folds, 2)


def noise_matrix(k: int, xi: float) -> sps.csr_matrix:
    """Sparse matrix of the projected folded noise (columns sum to 1).

    Built directly from the stencil without prefix sums; used as an
    independent reference for the matrix-free path.
    """
    if xi == 0.0:
        return sps.identity(k, format="csr")
    P, plateau, edges = stencil(k, xi)
    offs = [(m, plateau) for m in range(-P, P + 1)] + list(edges)
    rows, cols, vals = [], [], []
    j = np.arange(k)
    for m, g in offs:
        rows.append(fold_index(j + m, k))
        cols.append(j)
        vals.append(np.full(k, g))
    M = sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(k, k))
    M.sum_duplicates()
    return M


def kernel_norms(kernel: NoiseKernel, delta: float | Interval | None = None) -> dict:
    """Certified upper bounds on the norms used by the error estimates.

    Returns a dict with ``var_rho_xi``, ``sup_rho_xi``, ``l1_to_var``,
    ``w_to_l1`` and, when ``delta`` is given, ``noise_after_projection`` and
    ``projection_after_noise`` (both ``delta * Var(rho) / (2 xi)``).
    """
    var = kernel.var_rho_xi
    out = {
        "var_rho_xi": var,
        "sup_rho_xi": kernel.sup_rho_xi,
        "l1_to_var": var,
        "w_to_l1": var,
    }
    if delta is not None:
        d = ia._coerce(delta)
        half = d * var / 2
        out["noise_after_projection"] = half
        out["projection_after_noise"] = half
    return out
