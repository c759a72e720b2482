"""Exact Wigner 3j and 6j symbols.

Both symbols are evaluated with the Racah single-sum formulas in exact
rational arithmetic.  The result has the form ``sign * sqrt(p/q)``; the
rational ``p/q`` is formed exactly and only converted to a float at the very
end, so there is no cancellation error in the alternating sums.

Arguments may be ints, floats or :class:`fractions.Fraction` as long as they
are integers or half-integers.
"""

from fractions import Fraction
from math import factorial, sqrt

DEFAULT_CAP = 10


def _twice(x, cap):
    """Return ``2*x`` as an int, rejecting anything that is not a half-integer."""
    two_x = 2 * Fraction(x).limit_denominator(1000)
    if two_x.denominator != 1 or abs(float(2 * x) - float(two_x)) > 1e-9:
        raise ValueError(f"{x!r} is not an integer or half-integer")
    n = int(two_x)
    if abs(n) > 2 * cap:
        raise ValueError(f"{x!r} exceeds the angular momentum cap {cap}")
    return n


def _triangle_ok(ta, tb, tc):
    # doubled arguments
    return tc <= ta + tb and tc >= abs(ta - tb) and (ta + tb + tc) % 2 == 0


def _delta(ta, tb, tc):
    """Triangle coefficient (a+b-c)!(a-b+c)!(-a+b+c)!/(a+b+c+1)! as a Fraction."""
    return Fraction(
        factorial((ta + tb - tc) // 2)
        * factorial((ta - tb + tc) // 2)
        * factorial((-ta + tb + tc) // 2),
        factorial((ta + tb + tc) // 2 + 1),
    )


def _signed_sqrt(sign, square):
    if square == 0:
        return 0.0
    return sign * sqrt(float(square))


def wigner3j(j1, j2, j3, m1, m2, m3, cap=DEFAULT_CAP):
    """Wigner 3j symbol ``(j1 j2 j3; m1 m2 m3)``.

    Returns 0.0 when the triangle condition, the projection sum rule or
    ``|m| <= j`` fails.  Raises ``ValueError`` if an argument is not a
    half-integer, exceeds ``cap``, or if some ``j + m`` is not an integer.
    """
    tj1, tj2, tj3 = (_twice(x, cap) for x in (j1, j2, j3))
    tm1, tm2, tm3 = (_twice(x, cap) for x in (m1, m2, m3))
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tj3, tm3)):
        if tj < 0:
            raise ValueError("angular momenta must be non-negative")
        if (tj + tm) % 2:
            raise ValueError("j + m must be an integer for every column")

    if tm1 + tm2 + tm3 != 0:
        return 0.0
    if not _triangle_ok(tj1, tj2, tj3):
        return 0.0
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tm3) > tj3:
        return 0.0

    # everything below is in ordinary (undoubled) integers
    a = (tj1 + tj2 - tj3) // 2
    b = (tj1 - tm1) // 2
    c = (tj2 + tm2) // 2
    d = (tj3 - tj2 + tm1) // 2
    e = (tj3 - tj1 - tm2) // 2
    kmin = max(0, -d, -e)
    kmax = min(a, b, c)

    total = 0
    for k in range(kmin, kmax + 1):
        term = Fraction(
            1,
            factorial(k) * factorial(d + k) * factorial(e + k)
            * factorial(a - k) * factorial(b - k) * factorial(c - k),
        )
        total += -term if k % 2 else term

    root = _delta(tj1, tj2, tj3)
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tj3, tm3)):
        root *= factorial((tj + tm) // 2) * factorial((tj - tm) // 2)

    phase_exp = (tj1 - tj2 - tm3) // 2
    sign = -1 if (phase_exp % 2) else 1
    if total < 0:
        sign = -sign
    return _signed_sqrt(sign, root * total * total)


def wigner6j(j1, j2, j3, j4, j5, j6, cap=DEFAULT_CAP):
    """Wigner 6j symbol ``{j1 j2 j3; j4 j5 j6}``.

    Zero whenever one of the four triads (j1 j2 j3), (j1 j5 j6),
    (j4 j2 j6), (j4 j5 j3) violates the triangle rule.
    """
    t = [_twice(x, cap) for x in (j1, j2, j3, j4, j5, j6)]
    if any(x < 0 for x in t):
        raise ValueError("angular momenta must be non-negative")
    a, b, c, d, e, f = t
    triads = ((a, b, c), (a, e, f), (d, b, f), (d, e, c))
    if not all(_triangle_ok(*tr) for tr in triads):
        return 0.0

    root = Fraction(1)
    for tr in triads:
        root *= _delta(*tr)

    s1, s2, s3, s4 = ((x + y + z) // 2 for x, y, z in triads)
    p1 = (a + b + d + e) // 2
    p2 = (a + c + d + f) // 2
    p3 = (b + c + e + f) // 2

    total = 0
    for k in range(max(s1, s2, s3, s4), min(p1, p2, p3) + 1):
        term = Fraction(
            factorial(k + 1),
            factorial(k - s1) * factorial(k - s2) * factorial(k - s3) * factorial(k - s4)
            * factorial(p1 - k) * factorial(p2 - k) * factorial(p3 - k),
        )
        total += -term if k % 2 else term

    sign = -1 if total < 0 else 1
    return _signed_sqrt(sign, root * total * total)
