"""Exact rationals and nonnegative fixed-point decimals with truncation.

Every ``FixedDec`` produced here is a lower bound of the exact value it
approximates, provided its inputs were. Small user-facing rationals are
:class:`fractions.Fraction`; the engine's exact values are ``gmpy2.mpq``
because CPython's gcd is quadratic and exact laws reach millions of bits.
Both types compare and mix freely.
"""

from __future__ import annotations

import numbers
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering

import gmpy2

Rational = Fraction
mpq = gmpy2.mpq

DEFAULT_SCALE = 200

_DECIMAL_RE = re.compile(r"^(\d*)(?:\.(\d*))?$")


class ScaleMismatch(ValueError):
    pass


@total_ordering
@dataclass(frozen=True)
class FixedDec:
    """Nonnegative decimal ``mantissa * 10**-scale``."""

    mantissa: int
    scale: int

    def __post_init__(self):
        if self.mantissa < 0:
            raise ValueError("FixedDec is nonnegative")
        if self.scale < 1:
            raise ValueError("scale must be a positive integer")

    @classmethod
    def zero(cls, scale: int) -> FixedDec:
        return cls(0, scale)

    @classmethod
    def one(cls, scale: int) -> FixedDec:
        return cls(10**scale, scale)

    @classmethod
    def floor_of(cls, value, scale: int) -> FixedDec:
        """Largest FixedDec <= value (negative values clamp to zero)."""
        if value <= 0:
            return cls(0, scale)
        return cls(int(value.numerator * 10**scale // value.denominator), scale)

    def __add__(self, other):
        if isinstance(other, FixedDec):
            return fd_add(self, other)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, FixedDec):
            return fd_mul(self, other)
        if isinstance(other, int) and other >= 0:
            return FixedDec(self.mantissa * other, self.scale)
        return NotImplemented

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, FixedDec):
            return to_rational(self) == to_rational(other)
        if isinstance(other, numbers.Rational):
            return to_rational(self) == other
        return NotImplemented

    def __lt__(self, other):
        if isinstance(other, FixedDec):
            return to_rational(self) < to_rational(other)
        if isinstance(other, numbers.Rational):
            return to_rational(self) < other
        return NotImplemented

    def __hash__(self):
        return hash(to_rational(self))

    def __float__(self):
        return float(to_rational(self))

    def __str__(self):
        whole, frac = divmod(gmpy2.mpz(self.mantissa), gmpy2.mpz(10) ** self.scale)
        return f"{whole.digits()}.{frac.digits().zfill(self.scale)}"

    def __repr__(self):
        return f"FixedDec('{self}')"


def _check_scale(a: FixedDec, b: FixedDec) -> None:
    if a.scale != b.scale:
        raise ScaleMismatch(f"scale {a.scale} != {b.scale}")


def fd_add(a: FixedDec, b: FixedDec) -> FixedDec:
    _check_scale(a, b)
    return FixedDec(a.mantissa + b.mantissa, a.scale)


def fd_mul(a: FixedDec, b: FixedDec) -> FixedDec:
    """Product truncated toward zero; never exceeds the exact product."""
    _check_scale(a, b)
    return FixedDec(a.mantissa * b.mantissa // 10**a.scale, a.scale)


def fd_from_decimal(s: str, scale: int = DEFAULT_SCALE) -> FixedDec:
    """Parse a nonnegative decimal string exactly at the given scale."""
    s = s.strip()
    if s.startswith("-"):
        raise ValueError(f"negative value: {s!r}")
    m = _DECIMAL_RE.match(s)
    if not m or (not m.group(1) and not m.group(2)):
        raise ValueError(f"malformed decimal: {s!r}")
    whole, frac = m.group(1) or "0", m.group(2) or ""
    if len(frac) > scale:
        raise ValueError(f"{s!r} has more than {scale} fractional digits")
    return FixedDec(int(whole) * 10**scale + int(frac.ljust(scale, "0") or "0"), scale)


def fd_pow_inv(lam: int, i: int, scale: int = DEFAULT_SCALE) -> FixedDec:
    """Lower bound on lam**-i; exact whenever the expansion fits in `scale` digits."""
    if lam < 1 or i < 0:
        raise ValueError("need lam >= 1 and i >= 0")
    return FixedDec(10**scale // lam**i, scale)


def to_rational(a: FixedDec) -> Fraction:
    return Fraction(a.mantissa, 10**a.scale)


def exact_value(x):
    """Any exact scalar (FixedDec, Fraction, mpq, int) as an mpq."""
    if isinstance(x, FixedDec):
        return mpq(x.mantissa, 10**x.scale)
    return mpq(x)


def parse_rational(s: str) -> Fraction:
    """Exact rational from a decimal string or ``p/q``; floats are refused."""
    if isinstance(s, Fraction):
        return s
    if isinstance(s, numbers.Rational):
        return Fraction(int(s.numerator), int(s.denominator))
    if isinstance(s, float):
        raise TypeError("binary floats are not accepted; pass a decimal string")
    text = str(s).strip()
    if len(text) < 1000:
        return Fraction(text)
    # Fraction's parser trips the int/str digit limit on long expansions
    if not re.fullmatch(r"-?\d*\.?\d*(/\d+)?", text):
        raise ValueError(f"invalid rational literal {text[:40]}...")
    q = mpq(text)
    return Fraction(int(q.numerator), int(q.denominator))


def decimal_digits(value) -> int | None:
    """Fractional digits of a terminating decimal, or None if it does not terminate."""
    den, twos = gmpy2.remove(gmpy2.mpz(value.denominator), 2)
    den, fives = gmpy2.remove(den, 5)
    if den != 1:
        return None
    return int(max(twos, fives))


def format_rational(value, digits: int = 30, expand: bool = True) -> str:
    """Decimal string, truncated toward zero to `digits`.

    With ``expand`` (the default) a terminating value is written out in full
    whatever its length.
    """
    value = mpq(value)
    exact = decimal_digits(value)
    sign = "-" if value < 0 else ""
    value = abs(value)
    nd = exact if expand and exact is not None else digits
    if exact is not None:
        nd = min(nd, exact)
    # gmpy2 string conversion has no digit limit, unlike int.__str__
    scaled = value.numerator * gmpy2.mpz(10) ** nd // value.denominator
    whole, frac = divmod(scaled, gmpy2.mpz(10) ** nd)
    if nd == 0:
        return f"{sign}{whole.digits()}"
    return f"{sign}{whole.digits()}.{frac.digits().zfill(nd)}"


def format_signed(value, digits: int = 80) -> str:
    """Truncate toward zero at `digits` or more, so that a nonzero value never prints as zero."""
    value = mpq(value)
    mag = abs(value)
    lead = 0 if mag == 0 or mag >= 1 else len(gmpy2.mpz(1 / mag).digits()) + 1
    return format_rational(value, max(digits, lead + 20), expand=False)


def isqrt_ceil(n: int) -> int:
    from math import isqrt

    r = isqrt(n)
    return r if r * r == n else r + 1


def sqrt_upper(x: Fraction, digits: int = 40) -> Fraction:
    """Rational upper bound on sqrt(x) with error below 10**-digits."""
    if x < 0:
        raise ValueError("sqrt of a negative number")
    scale = 10**digits
    # ceil(sqrt(x) * scale) = ceil(sqrt(ceil(x * scale**2)))
    n = -(-x.numerator * scale * scale // x.denominator)
    return Fraction(isqrt_ceil(n), scale)
