import math

import numpy as np
import pytest

from noisecert import reference as ref
from noisecert.certification import (a_priori_error, bootstrap_error, certify_density, fixed_point,
                                     local_linf_bounds, variation_ledgers)
from noisecert.contraction import certify_contraction, make_certificate
from noisecert.dynamics import make_doubling_map, make_tent_map, make_toy_map
from noisecert.noise import NoiseKernel
from noisecert.stability import stub_certificate
from noisecert.ulam import UlamGrid, assemble


def _certified(m, k, xi):
    op = assemble(m, UlamGrid(k))
    cert = certify_contraction(op, NoiseKernel(xi))
    return op, cert


@pytest.fixture(scope="module")
def dbl():
    m = make_doubling_map()
    op, cert = _certified(m, 256, 0.25)
    return m, op, cert


@pytest.mark.parametrize("maker", [make_doubling_map, make_tent_map])
def test_fixed_point_is_uniform_for_lebesgue_preserving_maps(maker):
    op, cert = _certified(maker(), 256, 0.25)
    f, num, res = fixed_point(op, 0.25, cert)
    assert np.max(np.abs(f - 1.0)) < 1e-10
    assert 0.0 <= res < 1e-10
    assert num < 1e-8


def test_toy_map_density_concentrates_near_zero():
    xi = 0.1
    op, cert = _certified(make_toy_map(0), 1024, xi)
    f, num, _ = fixed_point(op, xi, cert)
    cut = int((0.6 + xi / 2) * 1024)
    assert f[:cut].sum() / 1024 >= 0.99
    assert num < 1e-6


def test_a_priori_example_and_linearity_in_delta():
    c = make_certificate([1.0, 1.0, 0.5], target_alpha=0.5)
    assert a_priori_error(c, 1000, 0.1).hi == pytest.approx(0.1, rel=1e-12)
    e1 = a_priori_error(c, 1000, 0.1).hi
    e2 = a_priori_error(c, 2000, 0.1).hi
    assert e2 == pytest.approx(e1 / 2, rel=1e-12)
    assert a_priori_error(c, 1000, 0.1).lo == 0.0


def test_a_priori_at_published_scale():
    # sum C = 29.54 and alpha = 0.044 at delta = 2^-27, xi = 0.0086; target about 0.445e-4
    cert = stub_certificate(29.54, 0.044, 40, 0.0086)
    val = a_priori_error(cert, 2**27, 0.0086).hi
    oracle = (1 + 2 * 29.54) / (2 * (1 - 0.044)) * 2.0**-27 * 2.0 / 0.0086
    assert val == pytest.approx(oracle, rel=1e-12)
    assert 0.445e-4 / 2 <= val <= 0.445e-4 * 2


def _exact_NLf(f_values, xi, increasing):
    g = ref.step(f_values)
    Lg = ref.pushforward_linear(g, [0.0, 0.5, 1.0], increasing)
    return Lg, ref.convolve_uniform(Lg, xi)


@pytest.mark.parametrize("increasing", [(True, True), (True, False)])
def test_ledgers_dominate_exact_values(increasing):
    rng = np.random.default_rng(3)
    k, k_est, xi = 128, 16, 0.2
    m = make_doubling_map() if increasing[1] else make_tent_map()
    f = rng.uniform(0.2, 2.0, k)
    f /= f.mean()
    led = variation_ledgers(m, xi, f, k_est)
    Lg, NLg = _exact_NLf(f, xi, increasing)
    e = np.linspace(0, 1, k_est + 1)
    for j in range(k_est):
        assert led.var_NL[j] >= NLg.variation(e[j], e[j + 1]) - 1e-12
        assert led.mass_NL[j] >= NLg.l1(e[j], e[j + 1]) - 1e-12
        assert led.mass_L[j] >= Lg.l1(e[j], e[j + 1]) - 1e-12
    assert led.var_NL_total >= NLg.variation() - 1e-12


def test_total_noisy_variation_is_capped(dbl):
    m, op, cert = dbl
    rng = np.random.default_rng(0)
    f = rng.exponential(size=op.k)
    f /= f.mean()
    led = variation_ledgers(m, 0.25, f, 32)
    assert led.var_NL_total <= 2 / 0.25 * (1 + 1e-12) * 1.0 + 1e-9


def test_doubling_uniform_boundary_terms(dbl):
    # L of the constant density is constant, so only cells within xi/2 of the
    # boundary (where the window bound gives way to mass and reflection terms)
    # carry a positive noisy variation
    m, op, cert = dbl
    led = variation_ledgers(m, 0.25, np.ones(op.k), 16)
    assert np.all(np.isfinite(led.var_NL))
    assert np.all(led.var_Li <= 1e-300)
    assert np.allclose(led.mass_L, 1 / 16, rtol=1e-9)
    lo, hi = np.arange(16) / 16, np.arange(1, 17) / 16
    near = (lo <= 0.125) | (hi >= 1 - 0.125)
    assert np.all(led.var_NL[~near] <= 1e-9)
    assert np.all(led.var_NL[near] > 0)


def test_refining_the_estimate_partition_does_not_hurt(dbl):
    m, op, cert = dbl
    rng = np.random.default_rng(1)
    f = np.convolve(rng.uniform(0.5, 1.5, op.k), np.ones(9) / 9, mode="same")
    f /= f.mean()
    prev = math.inf
    for k_est in (8, 16, 32, 64):
        b = bootstrap_error(m, 0.25, cert, f, 0.0, variation_ledgers(m, 0.25, f, k_est))
        assert b.B2 + b.B3 <= prev * (1 + 1e-12)
        prev = b.B2 + b.B3


def test_downgrade_to_a_priori(dbl):
    m, op, cert = dbl
    f = np.ones(op.k)
    led = variation_ledgers(m, 0.25, f, 16)
    led.var_NL_total = math.inf
    b = bootstrap_error(m, 0.25, cert, f, 1e-10, led)
    assert b.downgraded
    assert b.final_l1 == pytest.approx(b.a_priori + 1e-10, rel=1e-12)
    good = bootstrap_error(m, 0.25, cert, f, 1e-10, variation_ledgers(m, 0.25, f, 16))
    assert good.final_l1 <= good.a_priori + 1e-10


def test_certify_density_report(dbl):
    m, op, cert = dbl
    d = certify_density(m, op, 0.25, cert, k_est=16)
    assert d.mass.contains(1.0)
    assert d.l1_error < d.budget.a_priori
    rep = d.report()
    assert set(rep) == {"k", "xi", "mass", "l1_error", "budget"}
    assert float(rep["budget"]["D"]["hi"]) < 1


def test_local_linf_for_doubling(dbl):
    m, op, cert = dbl
    d = certify_density(m, op, 0.25, cert, k_est=16)
    assert np.all(d.linf >= 1.0)
    assert np.all(d.linf <= 1 / 0.25)
    assert d.linf_on(0.2, 0.3) >= 1.0
    stricter = local_linf_bounds(d.ledgers, 0.0, 0.25)
    assert np.all(stricter <= d.linf)


@pytest.mark.slow
def test_linf_bounds_cover_monte_carlo_histogram():
    xi, k, k_est = 0.1, 1024, 32
    m = make_toy_map(0)
    op, cert = _certified(m, k, xi)
    d = certify_density(m, op, xi, cert, k_est=k_est)
    rng = np.random.default_rng(7)
    n, burn = 400_000, 100
    x = rng.uniform(size=2000)
    counts = np.zeros(k_est)
    for step in range(burn + n // x.size):
        y = np.where(x < 0.25, 2 * x, np.where(x < 0.5, 1 - 2 * x + 0.0, 0.0))
        y = y + rng.uniform(-xi / 2, xi / 2, size=x.size)
        y = np.abs(y)
        y = np.where(y > 1, 2 - y, y)
        x = y
        if step >= burn:
            counts += np.bincount(np.minimum((x * k_est).astype(int), k_est - 1), minlength=k_est)
    hist = counts / counts.sum() * k_est
    sigma = np.sqrt(np.maximum(hist, 1e-3) * k_est / counts.sum()) * 10
    assert np.all(hist <= d.linf + 5 * sigma + 1e-3)
