import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisecert.contraction import (ContractionCertificate, NoContractionError, TransferFailedError,
                                   coarse_fine_transfer, dobrushin_exact, iterate_norm_bound, make_certificate,
                                   noise_monotonicity)
from noisecert.dynamics import make_bz_map, make_doubling_map, make_identity_map, make_tent_map
from noisecert.noise import apply_noise_discrete
from noisecert.ulam import UlamGrid, assemble


@pytest.fixture(scope="module")
def dbl256():
    return assemble(make_doubling_map(), UlamGrid(256))


def test_doubling_contracts_quickly(dbl256):
    b = iterate_norm_bound(dbl256, 0.25, 10)
    assert min(b) < 1.0


def test_identity_never_contracts():
    op = assemble(make_identity_map(), UlamGrid(32))
    assert iterate_norm_bound(op, 0.0, 5) == [1.0] * 5


def test_exact_norms_submultiplicative():
    op = assemble(make_bz_map(), UlamGrid(64))
    n = dobrushin_exact(op, 0.2, 8)
    for i in range(1, 4):
        for j in range(1, 4):
            assert n[i + j - 1] <= n[i - 1] * n[j - 1] + 1e-12


def test_certified_bounds_dominate_exact_norms():
    op = assemble(make_bz_map(), UlamGrid(64))
    exact = dobrushin_exact(op, 0.1, 12)
    cert = iterate_norm_bound(op, 0.1, 12)
    assert all(c >= e - 1e-15 for c, e in zip(cert, exact))


@settings(max_examples=100)
@given(st.integers(0, 2**31 - 1))
def test_generating_set_soundness(seed):
    op = assemble(make_tent_map(), UlamGrid(32)) if seed % 2 else assemble(make_bz_map(), UlamGrid(32))
    rng = np.random.default_rng(seed)
    v = rng.normal(size=32)
    v -= v.mean()
    v /= np.abs(v).sum()
    bounds = iterate_norm_bound(op, 0.15, 6, audit=False)
    w = v.copy()
    for c in bounds:
        w = apply_noise_discrete(0.15, op.P_mid @ w)
        assert np.abs(w).sum() <= c + 1e-12


def test_make_certificate_examples():
    c = make_certificate([1, 0.5, 0.1], target_alpha=0.2)
    assert (c.n_bar, c.alpha, c.sum_Ci) == (2, 0.1, 1.5)
    with pytest.raises(NoContractionError):
        make_certificate([1, 1, 1])
    c1 = make_certificate([1, 0.044])
    assert c1.n_bar == 1 and c1.alpha == 0.044


def test_transfer_arithmetic():
    coarse = ContractionCertificate(1024, 0.9765625, 5, 0.1, [1, 1, 1, 1, 1, 0.1])
    fine = coarse_fine_transfer(coarse, 4096, coarse.xi)
    assert fine.bounds[6] == pytest.approx(0.111, abs=1e-12)
    assert fine.bounds[6] >= 0.111


def test_transfer_failure():
    coarse = ContractionCertificate(64, 0.01, 2, 0.5, [1, 0.9, 0.5])
    with pytest.raises(TransferFailedError) as err:
        coarse_fine_transfer(coarse, 1024, 0.01)
    assert err.value.value >= 1.0


def test_transfer_requires_integer_ratio():
    coarse = ContractionCertificate(64, 0.5, 2, 0.5, [1, 0.9, 0.5])
    with pytest.raises(ValueError):
        coarse_fine_transfer(coarse, 100, 0.5)


def test_noise_monotonicity_examples():
    c = ContractionCertificate(256, 0.1, 2, 0.5, [1.0, 0.8, 0.5])
    up = noise_monotonicity(c, 0.2)
    assert up.bounds[2] == pytest.approx(0.875)
    assert up.bounds[2] >= 0.875
    same = noise_monotonicity(c, 0.1)
    assert same.bounds == pytest.approx(c.bounds)


def test_certificate_json_round_trip(tmp_path):
    c = make_certificate([1, 0.7, 0.3, 0.2])
    p = tmp_path / "c.json"
    c.save(str(p))
    back = ContractionCertificate.from_dict(json.loads(p.read_text()))
    assert back.bounds == c.bounds and back.n_bar == c.n_bar and back.alpha == c.alpha


def test_transfer_and_monotonicity_orders_both_sound():
    m = make_bz_map()
    coarse_op = assemble(m, UlamGrid(256))
    xi, xh = 0.3, 0.4
    coarse = make_certificate([1.0] + iterate_norm_bound(coarse_op, xi, 20), 0.5, k=256, xi=xi)
    a = noise_monotonicity(coarse_fine_transfer(coarse, 1024, xi), xh)
    b = coarse_fine_transfer(noise_monotonicity(coarse, xh), 1024, xh)
    direct = dobrushin_exact(assemble(m, UlamGrid(1024)), xh, 8)
    for i, d in enumerate(direct, start=1):
        if i < len(a.bounds):
            assert d <= a.bounds[i] + 1e-12
        if i < len(b.bounds):
            assert d <= b.bounds[i] + 1e-12
