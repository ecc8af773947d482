import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from noisecert.dynamics import (BZ_B_HI, BZ_B_LO, builtin_map, derivative_bounds, invert_branch, load_map,
                                make_bz_map, make_doubling_map, make_tent_map, make_toy_map, map_from_dict)
from noisecert.interval import Interval


def test_bz_parameters(bz):
    a, c = bz.params["a"], bz.params["c"]
    with mpmath.workdps(40):
        a_exact = mpmath.mpf(19) / 42 * mpmath.cbrt(mpmath.mpf(7) / 5)
        c_exact = mpmath.mpf(20) / (3**20 * 7) * mpmath.cbrt(mpmath.mpf(7) / 5) * mpmath.exp(mpmath.mpf(187) / 10)
        assert mpmath.mpf(a.lo) <= a_exact <= mpmath.mpf(a.hi)
        assert mpmath.mpf(c.lo) <= c_exact <= mpmath.mpf(c.hi)
    assert a.contains(0.50607356903682235)
    assert 0.50607356 < a.lo and a.hi < 0.50607357
    b = bz.params["b"]
    assert mpmath.mpf(b.lo) <= mpmath.mpf(BZ_B_LO) and mpmath.mpf(BZ_B_HI) <= mpmath.mpf(b.hi)
    assert b.width < 1e-16


def test_bz_continuity_and_critical_point(bz):
    left = bz.branches[0].T(Interval(0.3, 0.3))
    right = bz.branches[1].T(Interval(0.3, 0.3))
    assert left.overlaps(right)
    d = bz.branches[0].dT(Interval(0.3 - 5e-7, 0.3 + 5e-7))
    assert d.contains(0.0)


def test_bz_range_inside_unit_interval(bz):
    for br in bz.branches:
        img = br.image()
        assert 0.0 <= img.lo and img.hi <= 1.0


def test_toy_examples():
    m = make_toy_map(0)
    assert m.T(0.75) == Interval(0.0, 0.0)
    assert m.T(0.25) == Interval(0.5, 0.5)
    assert m.T(0.375) == Interval(0.25, 0.25)
    assert len(m.branches) == 3 and m.branches[2].constant


def test_oracle_maps():
    assert make_doubling_map().T(0.3).contains(0.6)
    assert make_tent_map().T(0.75) == Interval(0.5, 0.5)
    for m in (make_doubling_map(), make_tent_map()):
        b = derivative_bounds(m, Interval(0.1, 0.9))
        assert b.inf_abs_dT == 2.0 and b.sup_abs_dT == 2.0 and b.sup_distortion == 0.0


def test_invert_branch_examples(bz):
    iv = invert_branch(make_doubling_map(), 0, Interval(0.5, 0.5))
    assert iv.contains(0.25) and iv.width <= 1e-12
    y = bz.branches[1].T(Interval(0.5, 0.5))
    assert invert_branch(bz, 1, y).contains(0.5)
    assert invert_branch(make_toy_map(0), 0, Interval(0.99, 1.0)) is None


@given(st.floats(1e-6, 1 - 1e-6))
def test_point_evaluation_contains_extended_precision(x):
    m = make_bz_map()
    a = mpmath.mpf(19) / 42 * mpmath.cbrt(mpmath.mpf(7) / 5)
    with mpmath.workdps(40):
        X = mpmath.mpf(x)
        c = mpmath.mpf(20) / (3**20 * 7) * mpmath.cbrt(mpmath.mpf(7) / 5) * mpmath.exp(mpmath.mpf(187) / 10)
        b = mpmath.mpf(BZ_B_LO)
        if x <= 0.3:
            s = X - mpmath.mpf(1) / 8
            cb = mpmath.sign(s) * mpmath.cbrt(abs(s))
            exact = (a + cb) * mpmath.exp(-X) + b
        else:
            exact = c * (10 * X * mpmath.exp(-10 * X / 3)) ** 19 + b
        R = m.T(x)
        tol = mpmath.mpf(2) ** -100
        assert mpmath.mpf(R.lo) - tol <= exact <= mpmath.mpf(R.hi) + tol


@given(st.integers(0, 1), st.floats(0.01, 0.99))
def test_invert_forward_round_trip(bi, s):
    m = make_bz_map()
    br = m.branches[bi]
    x = br.inner[0] + s * (br.inner[1] - br.inner[0])
    y = br.T(Interval(x, x))
    assert invert_branch(m, bi, y).contains(x)


@given(st.floats(0.0, 0.9), st.floats(0.001, 0.1), st.floats(0.0, 0.05))
def test_derivative_bounds_inclusion_monotone(a, w, e):
    m = make_doubling_map()
    inner = derivative_bounds(m, Interval(a, a + w))
    outer = derivative_bounds(m, Interval(max(a - e, 0.0), min(a + w + e, 1.0)))
    assert outer.inf_abs_dT <= inner.inf_abs_dT and outer.sup_abs_dT >= inner.sup_abs_dT
    assert outer.sup_distortion >= inner.sup_distortion


def test_derivative_bounds_bz(bz):
    near = derivative_bounds(bz, Interval(0.29, 0.31))
    assert math.isfinite(near.sup_abs_dT) and near.inf_abs_dT == 0.0
    sing = derivative_bounds(bz, Interval(0.12, 0.13))
    assert sing.unbounded or not math.isfinite(sing.sup_abs_dT)


def test_map_file_round_trip(tmp_path):
    spec = {"id": "half", "branches": [{"domain": ["0", "1"], "expr": "x/2", "monotonicity": "increasing"}]}
    p = tmp_path / "m.json"
    p.write_text(json.dumps(spec))
    m = load_map(str(p))
    assert m.T(0.5) == Interval(0.25, 0.25)
    with pytest.raises(ValueError):
        map_from_dict({"id": "bad", "branches": [{"domain": ["0", "0.5"], "expr": "x",
                                                  "monotonicity": "increasing"}]})


def test_builtin_lookup():
    assert builtin_map("toy:0.001").identifier.startswith("toy")
    with pytest.raises(KeyError):
        builtin_map("nope")


def test_content_hash_is_stable():
    assert make_bz_map().content_hash() == make_bz_map().content_hash()
    assert make_bz_map().content_hash() != make_bz_map(a=["0.5", "0.5"]).content_hash()
