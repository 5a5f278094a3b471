"""Wigner 3j, 6j and 9j symbols from exact rational Racah sums.

Arguments may be ints, floats or Fractions holding integer or half-integer
values.  Internally everything is converted to doubled integers so that the
cache keys are exact.  The square-root prefactor is kept as a Fraction until
the very end, so the only rounding is the final conversion to float.
"""
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt

__all__ = ["wigner_3j", "wigner_6j", "wigner_9j", "triangle", "two"]


def two(j):
    """Return 2*j as an int, checking that j is a half-integer."""
    d = 2 * Fraction(j).limit_denominator(2)
    if d.denominator != 1 or abs(float(d) - 2 * float(j)) > 1e-9:
        raise ValueError(f"{j!r} is not an integer or half-integer")
    return int(d)


def triangle(a, b, c):
    """True when (a, b, c) satisfy the triangle rule with integer perimeter."""
    ta, tb, tc = two(a), two(b), two(c)
    return _tri2(ta, tb, tc)


def _tri2(ta, tb, tc):
    if (ta + tb + tc) % 2:
        return False
    return abs(ta - tb) <= tc <= ta + tb


def _delta2(ta, tb, tc):
    # Delta(abc) for doubled arguments, as an exact Fraction
    return Fraction(
        factorial((ta + tb - tc) // 2)
        * factorial((ta - tb + tc) // 2)
        * factorial((-ta + tb + tc) // 2),
        factorial((ta + tb + tc) // 2 + 1),
    )


def _sqrt_fraction(q):
    return sqrt(q.numerator) / sqrt(q.denominator) if q else 0.0


@lru_cache(maxsize=None)
def _w3j2(t1, t2, t3, s1, s2, s3):
    if s1 + s2 + s3 != 0:
        return 0.0
    if not _tri2(t1, t2, t3):
        return 0.0
    for t, s in ((t1, s1), (t2, s2), (t3, s3)):
        if abs(s) > t or (t + s) % 2:
            return 0.0
    pref = _delta2(t1, t2, t3)
    for t, s in ((t1, s1), (t2, s2), (t3, s3)):
        pref *= factorial((t + s) // 2) * factorial((t - s) // 2)
    # summation bounds in ordinary (undoubled) units
    a1 = (t3 - t2 + s1) // 2
    a2 = (t3 - t1 - s2) // 2
    b1 = (t1 + t2 - t3) // 2
    b2 = (t1 - s1) // 2
    b3 = (t2 + s2) // 2
    kmin = max(0, -a1, -a2)
    kmax = min(b1, b2, b3)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            factorial(k)
            * factorial(a1 + k)
            * factorial(a2 + k)
            * factorial(b1 - k)
            * factorial(b2 - k)
            * factorial(b3 - k)
        )
        total += Fraction((-1) ** k, den)
    phase = -1 if ((t1 - t2 - s3) // 2) % 2 else 1
    # combine prefactor and sum exactly before the single sqrt
    sign = 1 if total >= 0 else -1
    return phase * sign * _sqrt_fraction(pref * total * total)


def wigner_3j(j1, j2, j3, m1, m2, m3):
    """Wigner 3j symbol (j1 j2 j3; m1 m2 m3)."""
    return _w3j2(two(j1), two(j2), two(j3), two(m1), two(m2), two(m3))


@lru_cache(maxsize=None)
def _w6j2(t1, t2, t3, t4, t5, t6):
    triads = ((t1, t2, t3), (t1, t5, t6), (t4, t2, t6), (t4, t5, t3))
    if not all(_tri2(*tr) for tr in triads):
        return 0.0
    pref = Fraction(1)
    for tr in triads:
        pref *= _delta2(*tr)
    a = [sum(tr) // 2 for tr in triads]
    b = [
        (t1 + t2 + t4 + t5) // 2,
        (t2 + t3 + t5 + t6) // 2,
        (t3 + t1 + t6 + t4) // 2,
    ]
    total = Fraction(0)
    for k in range(max(a), min(b) + 1):
        den = 1
        for ai in a:
            den *= factorial(k - ai)
        for bi in b:
            den *= factorial(bi - k)
        total += Fraction((-1) ** k * factorial(k + 1), den)
    sign = 1 if total >= 0 else -1
    return sign * _sqrt_fraction(pref * total * total)


def wigner_6j(j1, j2, j3, j4, j5, j6):
    """Wigner 6j symbol {j1 j2 j3; j4 j5 j6}."""
    return _w6j2(two(j1), two(j2), two(j3), two(j4), two(j5), two(j6))


@lru_cache(maxsize=None)
def _w9j2(t1, t2, t3, t4, t5, t6, t7, t8, t9):
    rows = ((t1, t2, t3), (t4, t5, t6), (t7, t8, t9))
    cols = ((t1, t4, t7), (t2, t5, t8), (t3, t6, t9))
    if not all(_tri2(*tr) for tr in rows + cols):
        return 0.0
    lo = max(abs(t1 - t9), abs(t4 - t8), abs(t2 - t6))
    hi = min(t1 + t9, t4 + t8, t2 + t6)
    total = 0.0
    for x in range(lo, hi + 1, 2):
        total += (
            (x + 1)
            * _w6j2(t1, t4, t7, t8, t9, x)
            * _w6j2(t2, t5, t8, t4, x, t6)
            * _w6j2(t3, t6, t9, x, t1, t2)
        ) * (-1 if x % 2 else 1)
    return total


def wigner_9j(j1, j2, j3, j4, j5, j6, j7, j8, j9):
    """Wigner 9j symbol with rows (j1 j2 j3), (j4 j5 j6), (j7 j8 j9)."""
    return _w9j2(*(two(j) for j in (j1, j2, j3, j4, j5, j6, j7, j8, j9)))
