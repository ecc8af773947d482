"""Exact reference computations for step and piecewise-linear functions on [0, 1].

These are plain floating-point oracles (no directed rounding) used to check
norm inequalities and certified ledgers on small instances.  Functions are
represented as lists of linear segments, which is closed under every
operation needed here: Ulam projection, the reflecting uniform convolution
(which maps step functions to continuous piecewise-linear ones), and
pushforward under piecewise-linear full-branch maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Segments", "step", "uniform_step_grid", "convolve_uniform", "pushforward_linear", "w_norm"]


def _abs_int_linear(x0, x1, y0, y1):
    """``int_{x0}^{x1} |linear|`` for the linear function through ``(x0, y0)``, ``(x1, y1)``."""
    x0, x1, y0, y1 = map(np.asarray, (x0, x1, y0, y1))
    w = x1 - x0
    same = (y0 * y1) >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = w * (y0 * y0 + y1 * y1) / (2 * (np.abs(y0) + np.abs(y1)))
    return np.where(same, w * np.abs(y0 + y1) / 2, np.where(np.abs(y0) + np.abs(y1) > 0, cross, 0.0))


@dataclass
class Segments:
    """A function given by linear pieces on consecutive intervals ``[x[i], x[i+1]]``.

    ``left[i]`` and ``right[i]`` are the one-sided values at the ends of piece ``i``.
    """

    x: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.left = np.asarray(self.left, dtype=float)
        self.right = np.asarray(self.right, dtype=float)

    # -- evaluation -------------------------------------------------------------
    def at(self, t: np.ndarray, side: str = "right") -> np.ndarray:
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self.x, t, side=side) - 1, 0, self.left.size - 1)
        w = self.x[i + 1] - self.x[i]
        s = np.where(w > 0, (t - self.x[i]) / np.where(w > 0, w, 1.0), 0.0)
        return self.left[i] + s * (self.right[i] - self.left[i])

    def refine(self, pts) -> "Segments":
        """The same function with extra breakpoints."""
        new = np.union1d(self.x, np.clip(np.asarray(pts, dtype=float), self.x[0], self.x[-1]))
        a, b = new[:-1], new[1:]
        keep = b > a
        a, b = a[keep], b[keep]
        m = 0.5 * (a + b)
        i = np.clip(np.searchsorted(self.x, m, side="right") - 1, 0, self.left.size - 1)
        x0, x1 = self.x[i], self.x[i + 1]
        sl = (self.right[i] - self.left[i]) / (x1 - x0)
        return Segments(np.concatenate([a, b[-1:]]), self.left[i] + sl * (a - x0), self.left[i] + sl * (b - x0))

    # -- norms -------------------------------------------------------------------
    def l1(self, lo: float | None = None, hi: float | None = None) -> float:
        s = self if lo is None and hi is None else self.refine([v for v in (lo, hi) if v is not None])
        a, b = s.x[:-1], s.x[1:]
        sel = np.ones(a.size, bool)
        if lo is not None:
            sel &= a >= lo
        if hi is not None:
            sel &= b <= hi
        return float(np.sum(_abs_int_linear(a, b, s.left, s.right)[sel]))

    def integral(self) -> float:
        return float(np.sum((self.x[1:] - self.x[:-1]) * (self.left + self.right) / 2))

    def variation(self, lo: float | None = None, hi: float | None = None) -> float:
        """Variation over the open interval ``(lo, hi)`` (default: the whole domain, interior only)."""
        lo = self.x[0] if lo is None else lo
        hi = self.x[-1] if hi is None else hi
        s = self.refine([lo, hi])
        a, b = s.x[:-1], s.x[1:]
        sel = (a >= lo) & (b <= hi)
        inner = np.sum(np.abs(s.right - s.left)[sel])
        idx = np.nonzero(sel)[0]
        jumps = 0.0
        if idx.size > 1:
            jumps = np.sum(np.abs(s.left[idx[1:]] - s.right[idx[:-1]]))
        return float(inner + jumps)

    def cellwise_variation(self, k: int) -> float:
        """Sum over the cells of a ``k``-partition of the variation inside each open cell."""
        e = np.linspace(0.0, 1.0, k + 1)
        return float(sum(self.variation(e[j], e[j + 1]) for j in range(k)))

    # -- linear structure ----------------------------------------------------------
    def __sub__(self, other: "Segments") -> "Segments":
        x = np.union1d(self.x, other.x)
        a, b = self.refine(x), other.refine(x)
        return Segments(a.x, a.left - b.left, a.right - b.right)

    def scale(self, c: float) -> "Segments":
        return Segments(self.x, c * self.left, c * self.right)

    def primitive(self, t: np.ndarray) -> np.ndarray:
        """``int_0^t`` of the function, for ``t`` in the domain."""
        t = np.asarray(t, dtype=float)
        w = self.x[1:] - self.x[:-1]
        cum = np.concatenate([[0.0], np.cumsum(w * (self.left + self.right) / 2)])
        i = np.clip(np.searchsorted(self.x, t, side="right") - 1, 0, self.left.size - 1)
        d = t - self.x[i]
        sl = np.where(w[i] > 0, (self.right[i] - self.left[i]) / np.where(w[i] > 0, w[i], 1.0), 0.0)
        return cum[i] + self.left[i] * d + 0.5 * sl * d * d

    def project(self, k: int) -> "Segments":
        """Ulam projection: averages on the ``k`` uniform cells."""
        e = np.linspace(0.0, 1.0, k + 1)
        avg = np.diff(self.primitive(e)) * k
        return Segments(e, avg, avg)


def step(values, edges=None) -> Segments:
    """Step function with the given values (on uniform cells unless ``edges`` is given)."""
    v = np.asarray(values, dtype=float)
    e = np.linspace(0.0, 1.0, v.size + 1) if edges is None else np.asarray(edges, dtype=float)
    return Segments(e, v, v)


def uniform_step_grid(k: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, k + 1)


def w_norm(g: Segments) -> float:
    """``||G||_{L1}`` where ``G`` is the primitive of ``g`` (exact for step ``g``)."""
    if not np.allclose(g.left, g.right):
        raise ValueError("w_norm is exact only for step functions")
    G = g.primitive(g.x)
    return float(np.sum(_abs_int_linear(g.x[:-1], g.x[1:], G[:-1], G[1:])))


def convolve_uniform(g: Segments, xi: float) -> Segments:
    """``N_xi g`` for a step ``g``: uniform kernel on ``[-xi/2, xi/2]`` with reflection at 0 and 1."""
    if not (0.0 < xi <= 1.0):
        raise ValueError("xi must lie in (0, 1]")
    if not np.allclose(g.left, g.right):
        raise ValueError("convolve_uniform expects a step function")
    h = xi / 2
    e = g.x
    cand = np.concatenate([e + h, e - h, -e + h, -e - h, 2 - e + h, 2 - e - h, [0.0, 1.0]])
    knots = np.unique(np.clip(cand, 0.0, 1.0))
    total = g.integral()

    def ext(t):
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        neg, mid, big = t < 0, (t >= 0) & (t <= 1), t > 1
        out[neg] = -g.primitive(-t[neg])
        out[mid] = g.primitive(t[mid])
        out[big] = 2 * total - g.primitive(2 - t[big])
        return out

    vals = (ext(knots + h) - ext(knots - h)) / xi
    return Segments(knots, vals[:-1], vals[1:])


def pushforward_linear(g: Segments, breaks, increasing) -> Segments:
    """Transfer operator of a piecewise-linear map whose branches map ``[b_i, b_{i+1}]`` onto ``[0, 1]``.

    ``increasing[i]`` gives the orientation of branch ``i``; ``g`` must be a step function.
    """
    breaks = np.asarray(breaks, dtype=float)
    ys = [np.array([0.0, 1.0])]
    for i in range(breaks.size - 1):
        a, b = breaks[i], breaks[i + 1]
        inside = g.x[(g.x > a) & (g.x < b)]
        y = (inside - a) / (b - a)
        ys.append(y if increasing[i] else 1 - y)
    knots = np.unique(np.concatenate(ys))
    mids = 0.5 * (knots[:-1] + knots[1:])
    val = np.zeros(mids.size)
    for i in range(breaks.size - 1):
        a, b = breaks[i], breaks[i + 1]
        x = a + (mids if increasing[i] else 1 - mids) * (b - a)
        val += g.at(x) * (b - a)
    return Segments(knots, val, val)
