"""Wigner symbols against independent oracles."""

from fractions import Fraction
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlinterface.angular import wigner3j, wigner6j


def _halves(hi):
    return [Fraction(k, 2) for k in range(0, 2 * hi + 1)]


def _mrange(j):
    return [-j + k for k in range(int(2 * j) + 1)]


def _jminus(j, m):
    return math.sqrt(float(j * (j + 1) - m * (m - 1)))


def clebsch_gordan_table(j1, j2):
    """CG coefficients by lowering from stretched states plus Gram-Schmidt.

    Returns {(J, M): vector over the product basis (m1, m2)}.
    """
    prod = [(m1, m2) for m1 in _mrange(j1) for m2 in _mrange(j2)]
    index = {p: i for i, p in enumerate(prod)}

    def lower(vec):
        out = np.zeros(len(prod))
        for (m1, m2), c in zip(prod, vec):
            if c == 0:
                continue
            if m1 - 1 >= -j1:
                out[index[(m1 - 1, m2)]] += c * _jminus(j1, m1)
            if m2 - 1 >= -j2:
                out[index[(m1, m2 - 1)]] += c * _jminus(j2, m2)
        return out

    states = {}
    J = j1 + j2
    while J >= abs(j1 - j2):
        # highest-weight state of J: orthogonal to all larger-J states with M = J
        sub = [i for i, (a, b) in enumerate(prod) if a + b == J]
        v = np.zeros(len(prod))
        # Condon-Shortley: <j1 j1, j2 (J - j1)|J J> > 0
        first = index[(j1, J - j1)]
        v[first] = 1.0
        for (Jp, Mp), w in states.items():
            if Mp == J:
                v -= (w @ v) * w
        v = np.where(np.isin(np.arange(len(prod)), sub), v, 0.0)
        v /= np.linalg.norm(v)
        if v[first] < 0:
            v = -v
        states[(J, J)] = v
        M = J
        while M > -J:
            v = lower(v) / _jminus(J, M)
            M -= 1
            states[(J, M)] = v
        J -= 1
    return states, index


def threej_from_cg(j1, j2, j3, m1, m2, m3):
    if m1 + m2 + m3 != 0 or not abs(j1 - j2) <= j3 <= j1 + j2:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(m3) > j3:
        return 0.0
    states, index = clebsch_gordan_table(j1, j2)
    cg = states[(j3, -m3)][index[(m1, m2)]]
    return (-1) ** int(j1 - j2 - m3) * cg / math.sqrt(float(2 * j3 + 1))


def sixj_from_threej(j1, j2, j3, j4, j5, j6):
    total = 0.0
    for m1, m2, m4, m5 in itertools.product(_mrange(j1), _mrange(j2), _mrange(j4), _mrange(j5)):
        m3 = -m1 - m2
        m6 = m5 - m1
        if abs(m3) > j3 or abs(m6) > j6:
            continue
        phase = (-1) ** int(j1 - m1 + j2 - m2 + j3 - m3 + j4 - m4 + j5 - m5 + j6 - m6)
        total += (phase
                  * wigner3j(j1, j2, j3, -m1, -m2, -m3)
                  * wigner3j(j1, j5, j6, m1, -m5, m6)
                  * wigner3j(j4, j2, j6, m4, m2, -m6)
                  * wigner3j(j4, j5, j3, -m4, m5, m3))
    return total


def test_closed_form_values():
    assert wigner3j(1, 1, 0, 0, 0, 0) == pytest.approx(-1 / math.sqrt(3), rel=1e-15)
    assert wigner6j(1, 1, 0, 1, 1, 1) == pytest.approx(-1 / 3, rel=1e-15)
    assert wigner6j(0.5, 0.5, 1, 0.5, 0.5, 1) == pytest.approx(1 / 6, rel=1e-15)


def test_selection_rules_give_zero():
    assert wigner3j(1, 1, 1, 1, 0, 0) == 0.0
    assert wigner3j(1, 1, 3, 0, 0, 0) == 0.0
    assert wigner3j(1, 1, 1, 0, 0, 0) == 0.0  # odd J with all m = 0
    assert wigner6j(1, 1, 3, 1, 1, 1) == 0.0
    assert wigner6j(0.5, 0.5, 1, 0.5, 0.5, 2) == 0.0


def test_rejects_invalid_arguments():
    with pytest.raises(ValueError):
        wigner3j(1, 1, 1, 0.5, -0.5, 0)  # j + m not integral
    with pytest.raises(ValueError):
        wigner3j(0.3, 1, 1, 0, 0, 0)
    with pytest.raises(ValueError):
        wigner3j(11, 11, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        wigner6j(0.25, 1, 1, 1, 1, 1)


@pytest.mark.parametrize("j1,j2", [(Fraction(3, 2), 1), (1, 1), (Fraction(1, 2), Fraction(1, 2)),
                                   (2, Fraction(3, 2)), (3, 1), (Fraction(5, 2), 2)])
def test_threej_matches_cg_recursion(j1, j2):
    j3s = [abs(j1 - j2) + k for k in range(int(j1 + j2 - abs(j1 - j2)) + 1)]
    for j3 in j3s:
        for m1 in _mrange(j1):
            for m2 in _mrange(j2):
                m3 = -m1 - m2
                if abs(m3) > j3:
                    continue
                assert wigner3j(j1, j2, j3, m1, m2, m3) == pytest.approx(
                    threej_from_cg(j1, j2, j3, m1, m2, m3), abs=1e-13)


def test_half_integer_threej_against_cg():
    h = Fraction(1, 2)
    assert wigner3j(3 * h, 1, h, h, 0, -h) == pytest.approx(threej_from_cg(3 * h, 1, h, h, 0, -h), abs=1e-14)


@pytest.mark.parametrize("js", [
    (1, 1, 0, 1, 1, 1),
    (0.5, 0.5, 1, 0.5, 0.5, 1),
    (0.5, 1.5, 1, 2, 1, 1.5),
    (0.5, 1.5, 1, 3, 2, 1.5),
    (1, 2, 3, 2, 1, 2),
    (1.5, 1.5, 2, 0.5, 1, 1.5),
])
def test_sixj_matches_threej_contraction(js):
    js = tuple(Fraction(x).limit_denominator(2) for x in js)
    assert wigner6j(*js) == pytest.approx(sixj_from_threej(*js), abs=1e-13)


half = st.integers(0, 8).map(lambda k: Fraction(k, 2))


@st.composite
def valid_3j(draw):
    j1, j2 = draw(half), draw(half)
    j3 = abs(j1 - j2) + draw(st.integers(0, int(j1 + j2 - abs(j1 - j2))))
    m1 = -j1 + draw(st.integers(0, int(2 * j1)))
    m2 = -j2 + draw(st.integers(0, int(2 * j2)))
    return j1, j2, j3, m1, m2, -m1 - m2


@settings(max_examples=200, deadline=None)
@given(valid_3j())
def test_threej_column_symmetries(args):
    j1, j2, j3, m1, m2, m3 = args
    v = wigner3j(*args)
    odd = (-1) ** int(j1 + j2 + j3)
    assert wigner3j(j2, j3, j1, m2, m3, m1) == pytest.approx(v, abs=1e-14)  # cyclic
    assert wigner3j(j2, j1, j3, m2, m1, m3) == pytest.approx(odd * v, abs=1e-14)  # swap
    assert wigner3j(j1, j2, j3, -m1, -m2, -m3) == pytest.approx(odd * v, abs=1e-14)  # m -> -m


@settings(max_examples=200, deadline=None)
@given(st.lists(half, min_size=6, max_size=6))
def test_sixj_symmetries(js):
    j1, j2, j3, j4, j5, j6 = js
    v = wigner6j(*js)
    assert wigner6j(j2, j1, j3, j5, j4, j6) == pytest.approx(v, abs=1e-14)
    assert wigner6j(j4, j5, j3, j1, j2, j6) == pytest.approx(v, abs=1e-14)
    assert wigner6j(j1, j3, j2, j4, j6, j5) == pytest.approx(v, abs=1e-14)


def test_threej_orthogonality():
    j1, j2 = Fraction(3, 2), 1
    for j3 in (Fraction(1, 2), Fraction(3, 2), Fraction(5, 2)):
        s = sum(wigner3j(j1, j2, j3, m1, m2, -m1 - m2) ** 2
                for m1 in _mrange(j1) for m2 in _mrange(j2) if abs(m1 + m2) <= j3)
        # sum over m1, m2 at fixed j3, m3 gives 1/(2j3+1); summed over m3 gives 1
        assert s == pytest.approx(1.0, abs=1e-14)
