from fractions import Fraction

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from treepark.numerics import (
    FixedDec,
    ScaleMismatch,
    decimal_digits,
    exact_value,
    fd_add,
    fd_from_decimal,
    fd_mul,
    fd_pow_inv,
    format_rational,
    parse_rational,
    sqrt_upper,
    to_rational,
)


def fd(s, scale):
    return fd_from_decimal(s, scale)


def test_add_examples():
    assert fd_add(fd("0.5", 2), fd("0.25", 2)) == fd("0.75", 2)
    x = fd("0.123", 3)
    assert fd_add(FixedDec.zero(3), x) == x
    assert fd_add(fd("0.956", 3), fd("0.044", 3)) == FixedDec.one(3)


def test_mul_examples():
    assert fd_mul(fd("0.1", 1), fd("0.1", 1)) == FixedDec.zero(1)
    x = fd("0.3141", 4)
    assert fd_mul(FixedDec.one(4), x) == x
    sq = fd_mul(fd("0.95651", 200), fd("0.95651", 200))
    assert to_rational(sq) == Fraction(95651) ** 2 / 10**10
    assert str(sq).startswith("0.9149113801000")


def test_from_decimal():
    assert fd("0.08698", 200).mantissa == 8698 * 10**195
    assert fd("0", 7) == FixedDec.zero(7)
    assert to_rational(fd("0.112", 200)) == Fraction(112, 1000)
    for bad in ("-0.1", "abc", "0.1.2", "0.123"):
        with pytest.raises(ValueError):
            fd(bad, 2)


def test_pow_inv():
    assert to_rational(fd_pow_inv(2, 3, 200)) == Fraction(1, 8)
    assert fd_pow_inv(5, 0, 10) == FixedDec.one(10)
    third = fd_pow_inv(3, 2, 200)
    assert third.mantissa == 10**200 // 9
    assert to_rational(third) <= Fraction(1, 9)


def test_to_rational():
    assert to_rational(fd("0.125", 3)) == Fraction(1, 8)
    assert to_rational(FixedDec.zero(5)) == 0
    assert parse_rational("0.08698") == Fraction(4349, 50000)


def test_scale_mismatch_and_validation():
    with pytest.raises(ScaleMismatch):
        fd_add(FixedDec.zero(2), FixedDec.zero(3))
    with pytest.raises(ValueError):
        FixedDec(-1, 3)
    with pytest.raises(ValueError):
        FixedDec(0, 0)


def test_floats_refused():
    with pytest.raises(TypeError):
        parse_rational(0.1)


def test_format_rational():
    assert format_rational(Fraction(1, 8)) == "0.125"
    assert format_rational(Fraction(1, 3), 5) == "0.33333"
    assert format_rational(Fraction(-1, 3), 5) == "-0.33333"
    assert format_rational(Fraction(7)) == "7"
    # far past the int->str digit limit
    huge = Fraction(1, 2**20000)
    assert len(format_rational(huge)) > 20000


def test_decimal_digits():
    assert decimal_digits(Fraction(1, 8)) == 3
    assert decimal_digits(Fraction(1, 3)) is None
    assert decimal_digits(Fraction(5)) == 0


def test_sqrt_upper_against_mpmath():
    mpmath.mp.dps = 60
    for x in (Fraction(15, 16), Fraction(2), Fraction(1, 7)):
        up = sqrt_upper(x, 40)
        true = mpmath.sqrt(mpmath.mpf(x.numerator) / x.denominator)
        assert mpmath.mpf(up.numerator) / up.denominator >= true
        assert mpmath.mpf(up.numerator) / up.denominator - true < mpmath.mpf(10) ** -40


scales = st.integers(1, 30)
digits = st.integers(0, 10**30)


@given(scales, digits, digits)
def test_add_is_exact_and_commutative(s, a, b):
    x, y = FixedDec(a % 10**s, s), FixedDec(b % 10**s, s)
    assert fd_add(x, y) == fd_add(y, x)
    assert to_rational(fd_add(x, y)) == to_rational(x) + to_rational(y)


@given(scales, digits, digits)
def test_mul_truncates_down_by_less_than_one_ulp(s, a, b):
    x, y = FixedDec(a % 10**s, s), FixedDec(b % 10**s, s)
    exact = to_rational(x) * to_rational(y)
    got = to_rational(fd_mul(x, y))
    assert got <= exact < got + Fraction(1, 10**s)
    assert fd_mul(x, y) == fd_mul(y, x)


@given(scales, st.fractions(min_value=0, max_value=10))
def test_floor_of_is_lower_bound(s, v):
    got = FixedDec.floor_of(v, s)
    assert to_rational(got) <= v < to_rational(got) + Fraction(1, 10**s)


@given(st.fractions(min_value=-5, max_value=5, max_denominator=10**6))
def test_exact_value_round_trip(v):
    assert Fraction(exact_value(v)) == v
