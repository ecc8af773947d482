import math

import mpmath as mp
import numpy as np
import pytest

from noisecert.contraction import make_certificate
from noisecert.interval import DomainError, Interval
from noisecert.stability import (BZ_RESTRICTED_SET, Setting3, StabilityInputs, amplification, bz_map_distance,
                                 lyapunov_stability_report, map_perturbation_l1, markov_perturbation_bound,
                                 noise_kernel_distance, noise_perturbation_l1, restricted_linf_map,
                                 restricted_linf_noise, stub_certificate, two_sided_noise_l1, verify_setting3)

from oracles import BZ_A, BZ_C, bz_log_dT_left


def test_markov_example():
    cert = stub_certificate(75.05, 0.5, 80, 0.1)
    assert amplification(cert).hi == pytest.approx(150.1, rel=1e-12)
    d = 1e-3
    assert markov_perturbation_bound(cert, d).hi == pytest.approx(150.1 * d, rel=1e-12)
    assert markov_perturbation_bound(cert, 0.0).hi == 0.0


def _dobrushin(P):
    n = P.shape[1]
    return max(0.5 * np.abs(P[:, j] - P[:, k]).sum() for j in range(n) for k in range(n))


def _stationary(P):
    w, v = np.linalg.eig(P)
    f = np.real(v[:, np.argmin(np.abs(w - 1))])
    return f / f.sum()


@pytest.mark.parametrize("seed", range(5))
def test_markov_bound_on_random_chains(seed):
    rng = np.random.default_rng(seed)
    P1 = rng.uniform(size=(8, 8)) ** 4
    P1 /= P1.sum(axis=0)
    E = rng.normal(size=(8, 8)) * 1e-3
    E -= E.mean(axis=0)
    P2 = np.clip(P1 + E, 0, None)
    P2 /= P2.sum(axis=0)
    bounds = [1.0] + [_dobrushin(np.linalg.matrix_power(P1, i)) for i in range(1, 12)]
    cert = make_certificate(bounds, target_alpha=0.5)
    dist = np.abs(_stationary(P1) - _stationary(P2)).sum()
    op = np.abs(P1 - P2).sum(axis=0).max()
    assert dist <= markov_perturbation_bound(cert, op).hi


def test_map_and_noise_coefficients():
    cert = stub_certificate(29.0, 0.5, 40, 0.1)
    S = 58.0
    assert map_perturbation_l1(cert, 0.1, 1e-4).hi == pytest.approx(S * 20 * 1e-4, rel=1e-12)
    assert noise_perturbation_l1(cert, 0.0).hi == 0.0
    assert map_perturbation_l1(cert, 0.1, 0.0).hi == 0.0


@pytest.mark.parametrize("xi,xi_t", [(0.1, 0.11), (0.1, 0.06), (0.02, 0.0399), (0.3, 0.3)])
def test_kernel_distance_dominates_exact(xi, xi_t):
    exact = 2 * abs(xi_t - xi) / max(xi, xi_t)
    assert noise_kernel_distance(xi, xi_t).hi >= exact * (1 - 1e-12)


def test_domain_errors():
    cert = stub_certificate(10.0, 0.5, 10, 0.1)
    with pytest.raises(DomainError):
        noise_kernel_distance(0.1, 0.2)
    with pytest.raises(DomainError):
        noise_kernel_distance(0.1, 0.05)
    with pytest.raises(DomainError):
        two_sided_noise_l1(cert, 0.1, 0.1 * 2 ** (1 / 10))
    with pytest.raises(DomainError):
        two_sided_noise_l1(cert, 0.09, 0.1)
    inp = StabilityInputs(0.1, Interval(1.0, 1.0), Interval(1.0, 1.0), Interval(1.0, 1.0), 3, Interval(1.0, 1.0))
    with pytest.raises(DomainError):
        restricted_linf_map(inp, 0.1)
    base = {"a": 0.5, "b": 0.02, "c": 0.1}
    with pytest.raises(DomainError):
        bz_map_distance(base, dict(base, a=0.6))
    with pytest.raises(DomainError):
        bz_map_distance(base, dict(base, c=0.05))


def test_two_sided_window_edge():
    cert = stub_certificate(10.0, 0.5, 10, 0.1)
    hi = np.nextafter(0.1 * 2 ** (1 / 10), 0)
    v = two_sided_noise_l1(cert, 0.1, hi).hi
    assert v == pytest.approx((10 + 10) / 0.5 * 40 * (hi - 0.1), rel=1e-9)


def test_restricted_bounds_reduce_when_unperturbed():
    inp = StabilityInputs(0.1, Interval(2.0, 2.0), Interval(3.0, 3.0), Interval(0.5, 0.5), 3)
    assert restricted_linf_map(inp, 0.02).hi == pytest.approx(0.2, rel=1e-12)
    assert restricted_linf_noise(inp, 0.02, 0.0).hi == pytest.approx(0.2, rel=1e-12)
    inp.K = Interval(1.0, 1.0)
    coef = 10 * (2 + 9 + 1.5 + 40) / 1.0
    assert restricted_linf_map(inp, 0.0).hi == pytest.approx(coef, rel=1e-12)


def test_bz_map_distance_examples():
    p1 = {"a": float(BZ_A), "b": 0.0233, "c": float(BZ_C)}
    p2 = dict(p1, a=p1["a"] + 1e-4)
    d = bz_map_distance(p1, p2)
    assert d["sup"].hi == pytest.approx(1e-4, rel=1e-9)
    assert d["c1pw"].hi == pytest.approx(2e-4, rel=1e-9)
    assert d["obs_l1"].hi == pytest.approx(1e-4 * (3 - 2 * math.log(1e-4)), rel=1e-9)
    zero = bz_map_distance(p1, p1)
    assert zero["sup"].hi == zero["obs_l1"].hi == 0.0
    p3 = dict(p1, b=p1["b"] + 1e-5, c=p1["c"] + 1e-5)
    d3 = bz_map_distance(p1, p3)
    assert d3["sup"].hi == pytest.approx(8e-5, rel=1e-9)
    assert d3["c1pw"].hi == pytest.approx(58e-5, rel=1e-9)


def _critical(a):
    g = lambda x: (x - mp.mpf(1) / 8) ** (-mp.mpf(2) / 3) / 3 - a - mp.cbrt(x - mp.mpf(1) / 8)
    return mp.findroot(g, 0.3)


def test_observable_distance_against_quadrature():
    da = mp.mpf("1e-4")
    a2 = BZ_A + da
    r1, r2 = _critical(BZ_A), _critical(a2)

    def diff(x):
        # single points where either logarithm is infinite do not affect the integral
        v = abs(bz_log_dT_left(x) - bz_log_dT_left(x, a2))
        return v if mp.isfinite(v) else mp.mpf(0)

    pts = sorted([mp.mpf(0), mp.mpf(1) / 8, r1, r2, mp.mpf("0.3")])
    truth = float(mp.quad(diff, pts))
    bound = bz_map_distance({"a": float(BZ_A), "b": 0.0233, "c": 0.1},
                            {"a": float(a2), "b": 0.0233, "c": 0.1})["obs_l1"].hi
    assert truth <= bound


def test_setting3_enclosures_contain_samples():
    s = verify_setting3()
    assert set(s.sampled) >= {"linf_log_outside", "inv_dT_on_preimage", "distortion_on_preimage", "L1_on_A_Xi"}
    for name, val in s.sampled.items():
        assert getattr(s, name) >= val * (1 - 1e-12)
    assert s.l1_log_on_A > 0
    assert 0 < s.reach[0] < s.reach[1] < 1
    d = s.to_dict()
    assert tuple(map(tuple, d["A"])) == BZ_RESTRICTED_SET


def test_setting3_on_empty_set(doubling):
    s = verify_setting3(doubling, A=())
    assert s.l1_log_on_A == 0.0
    assert s.linf_log_outside >= math.log(2)
    rep = lyapunov_stability_report(stub_certificate(3.0, 0.1, 4, 0.25), s, map_moduli=False)
    assert float(rep["restricted_map_coefficient"]["hi"]) == 0.0
    assert "lambda_map" not in rep


def test_report_withholds_without_setting3():
    rep = lyapunov_stability_report(stub_certificate(3.0, 0.1, 4, 0.25))
    assert "withheld" in rep and "lambda_noise_coefficient" not in rep
