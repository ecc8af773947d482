import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from noisecert.certification import certify_density
from noisecert.contraction import certify_contraction
from noisecert.dynamics import make_doubling_map, make_tent_map, make_toy_map
from noisecert.interval import DomainError
from noisecert.noise import NoiseKernel
from noisecert.observables import (ObservableSpec, bathtub_bound, bz_integral_left_of_critical,
                                   bz_integral_right_of_critical, bz_l1_near_eighth, e_ladder,
                                   estimate_lyapunov, l1_log_bounds_bz, zero_average_bound)
from noisecert.ulam import UlamGrid, assemble

from oracles import bz_log_dT_left, bz_log_dT_right

W = 2.0**-6


def test_zero_average_examples():
    assert zero_average_bound(3.0, 1.0, 0.1).hi == pytest.approx(0.1, rel=1e-12)
    assert zero_average_bound(1.0, 1.0, 5.0).hi == 0.0
    assert zero_average_bound(2.0, -2.0, 0.0).hi == 0.0


@given(st.integers(2, 30), st.integers(0, 2**31))
def test_zero_average_brute_force(n, seed):
    rng = np.random.default_rng(seed)
    H = rng.normal(size=n)
    v = rng.normal(size=n)
    v -= v.mean()
    lhs = abs(float(np.dot(H, v)))
    assert lhs <= zero_average_bound(H.max(), H.min(), np.abs(v).sum()).hi * (1 + 1e-12) + 1e-15


@given(st.integers(1, 12), st.integers(0, 2**31))
def test_bathtub_matches_linear_program(n, seed):
    rng = np.random.default_rng(seed)
    g = rng.uniform(0, 5, n)
    caps = rng.uniform(0, 1, n)
    budget = float(rng.uniform(0, caps.sum() * 1.2))
    lp = linprog(-g, A_ub=[np.ones(n)], b_ub=[budget], bounds=list(zip(np.zeros(n), caps)))
    got = bathtub_bound(g, caps, budget)
    assert got >= -lp.fun - 1e-12
    assert got <= -lp.fun * (1 + 1e-9) + 1e-12


# -- closed forms against quadrature -------------------------------------------------

def _slack(enc, truth):
    return (enc.hi - enc.lo) / abs(truth)


def test_near_eighth_closed_form():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(20):
        u = 0.125 - rng.uniform(0, W * 0.999)
        v = 0.125 + rng.uniform(0, W * 0.999)
        truth = float(mp.quad(bz_log_dT_left, [u, 0.125, v]))
        enc = bz_l1_near_eighth(u, v)
        assert enc.lo <= truth <= enc.hi
        worst = max(worst, _slack(enc, truth))
    assert worst <= 10


def test_left_of_critical_closed_form():
    rng = np.random.default_rng(12)
    for _ in range(20):
        x = rng.uniform(0.2001, 0.2999)
        truth = float(mp.quad(bz_log_dT_left, [x, 0.3]))
        enc = bz_integral_left_of_critical(x)
        assert enc.lo <= truth <= enc.hi
        assert _slack(enc, truth) <= 10


def test_right_of_critical_closed_form():
    rng = np.random.default_rng(13)
    for _ in range(20):
        x = rng.uniform(0.30001, 0.30299)
        truth = float(mp.quad(bz_log_dT_right, [0.3, x]))
        enc = bz_integral_right_of_critical(x)
        assert enc.lo <= truth <= enc.hi
        assert _slack(enc, truth) <= 1e-6


def test_closed_form_domains_and_degenerate_pieces():
    with pytest.raises(DomainError):
        bz_l1_near_eighth(0.1, 0.13)
    with pytest.raises(DomainError):
        bz_integral_left_of_critical(0.3)
    with pytest.raises(DomainError):
        bz_integral_right_of_critical(0.31)
    assert l1_log_bounds_bz("0.125", 0.12, 0.12).hi == 0.0
    assert l1_log_bounds_bz("0.3_left", 0.29).lo > 0
    assert l1_log_bounds_bz("0.3_right", 0.301).lo > 0
    with pytest.raises(ValueError):
        l1_log_bounds_bz("0.7", 0.1, 0.2)


def test_bz_ladder_respects_validity_windows(bz):
    spec = ObservableSpec.for_map(bz)
    cands = e_ladder(spec)
    assert len(cands) > 1
    for E in cands:
        for p, r in E.items():
            assert math.isfinite(spec.l1_provider(float(p), r))


# -- Lyapunov enclosures ---------------------------------------------------------------

def _density(m, k, xi, k_est):
    op = assemble(m, UlamGrid(k))
    cert = certify_contraction(op, NoiseKernel(xi))
    return certify_density(m, op, xi, cert, k_est=k_est)


@pytest.mark.parametrize("maker", [make_doubling_map, make_tent_map])
def test_lyapunov_of_uniformly_expanding_maps(maker):
    d = _density(maker(), 256, 0.25, 32)
    lam = estimate_lyapunov(d, maker())
    assert lam.lam.contains(math.log(2))
    assert lam.lam.width < 1e-10
    assert lam.verdict == "positive"
    assert set(lam.to_dict()) >= {"lambda", "verdict", "E", "main_integral"}


def test_toy_map_enclosure_contains_monte_carlo():
    eps, xi = 1e-3, 0.1
    m = make_toy_map(eps)
    d = _density(m, 2048, xi, 64)
    lam = estimate_lyapunov(d, m)
    rng = np.random.default_rng(1)
    x = rng.random(100_000)
    acc = []
    for it in range(250):
        if it >= 50:
            acc.append(np.where(x < 0.5, math.log(2.0), math.log(eps)).mean())
        y = np.where(x < 0.25, 2 * x, np.where(x < 0.5, 1 - 2 * x,
                     np.where(x < 0.75, eps * (x - 0.5), eps * (1 - x))))
        y = np.abs(y + rng.uniform(-xi / 2, xi / 2, x.size))
        x = np.where(y > 1, 2 - y, y)
    mc = float(np.mean(acc))
    stderr = 0.01
    assert lam.lam.lo - stderr <= mc <= lam.lam.hi + stderr
    assert lam.verdict == "positive"


@pytest.mark.slow
def test_bz_candidates_intersect(bz):
    d = _density(bz, 2**12, 0.2, 2**8)
    spec = ObservableSpec.for_map(bz)
    encs = [estimate_lyapunov(d, spec, [E]) for E in e_ladder(spec)[::7]]
    assert max(e.lam.lo for e in encs) <= min(e.lam.hi for e in encs)
