"""Independent high-precision formulas shared by several test modules."""

import mpmath as mp

mp.mp.dps = 30

BZ_A = mp.mpf(19) / 42 * mp.cbrt(mp.mpf(7) / 5)
BZ_C = mp.mpf(20) / (mp.mpf(3) ** 20 * 7) * mp.cbrt(mp.mpf(7) / 5) * mp.exp(mp.mpf(187) / 10)


def _cbrt(s):
    return mp.sign(s) * mp.cbrt(abs(s))


def bz_log_dT_left(x, a=BZ_A):
    s = mp.mpf(x) - mp.mpf(1) / 8
    return mp.log(abs((abs(s) ** (-mp.mpf(2) / 3) / 3 - a - _cbrt(s)) * mp.exp(-x)))


def bz_log_dT_right(x, c=BZ_C):
    x = mp.mpf(x)
    g = 10 * x * mp.exp(-10 * x / 3)
    return mp.log(abs(c * 19 * g**18 * 10 * mp.exp(-10 * x / 3) * (1 - 10 * x / 3)))


def bz_T(x, a=BZ_A, b=mp.mpf("0.0232885283030703205447815804402391873566994364808885"), c=BZ_C):
    x = mp.mpf(x)
    if x <= mp.mpf("0.3"):
        return (a + _cbrt(x - mp.mpf(1) / 8)) * mp.exp(-x) + b
    return c * (10 * x * mp.exp(-10 * x / 3)) ** 19 + b
