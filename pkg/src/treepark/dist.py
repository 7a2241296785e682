"""Probability mass functions on the nonnegative integers.

An :class:`IntDist` holds integer numerators over a single denominator. In
exact mode (``scale is None``) the denominator is arbitrary and nothing is
ever rounded; in fixed mode the denominator is ``10**scale`` and every
product is truncated toward zero, so each weight is a lower bound of the
exact weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Iterable, Mapping, Sequence

import gmpy2

from .numerics import FixedDec, decimal_digits, format_rational, mpq, parse_rational

DEFAULT_MAX_SUPPORT = 10**6

# schoolbook loop only for few, short products; big operands go through GMP
_NAIVE_CUTOFF = 4096
_NAIVE_MAX_BITS = 20000


class SupportGuardError(RuntimeError):
    """Raised instead of silently dropping support."""


def _trim(offset: int, nums: list[int]) -> tuple[int, tuple[int, ...]]:
    lo, hi = 0, len(nums)
    while lo < hi and nums[lo] == 0:
        lo += 1
    while hi > lo and nums[hi - 1] == 0:
        hi -= 1
    if lo == hi:
        return 0, ()
    return offset + lo, tuple(nums[lo:hi])


def _naive_convolve(a: Sequence[int], b: Sequence[int]) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _kronecker_convolve(a: Sequence[int], b: Sequence[int]) -> list[int]:
    """Exact Cauchy product of nonnegative integer sequences via one big multiplication."""
    # slots must hold every packed input as well as every output coefficient
    bound = max(max(a) * max(b) * min(len(a), len(b)), max(a), max(b))
    width = (bound.bit_length() + 8) // 8  # bytes per slot
    pa = gmpy2.mpz(int.from_bytes(b"".join(x.to_bytes(width, "little") for x in a), "little"))
    if a is b:
        prod = pa * pa
    else:
        pb = gmpy2.mpz(int.from_bytes(b"".join(x.to_bytes(width, "little") for x in b), "little"))
        prod = pa * pb
    n = len(a) + len(b) - 1
    raw = int(prod).to_bytes(n * width, "little")
    return [int.from_bytes(raw[k * width:(k + 1) * width], "little") for k in range(n)]


def int_convolve(a: Sequence[int], b: Sequence[int]) -> list[int]:
    if not a or not b:
        return []
    short, other = (a, b) if len(a) <= len(b) else (b, a)
    if len(short) <= 3 and max(short).bit_length() <= 64:
        # e.g. an arrival law against a long child-sum law
        return _naive_convolve(short, other)
    bits = max(max(a).bit_length(), max(b).bit_length())
    if len(a) * len(b) <= _NAIVE_CUTOFF and bits <= _NAIVE_MAX_BITS:
        return _naive_convolve(a, b)
    return _kronecker_convolve(a, b)


@dataclass(frozen=True)
class IntDist:
    """Sub-probability mass function ``P(k) = nums[k - offset] / denom``.

    The mass missing from ``sum(nums) / denom`` is the deficit: mass lost to
    truncation (fixed mode) or deliberately cut off above a window.
    """

    offset: int
    nums: tuple[int, ...]
    denom: int
    scale: int | None = None

    def __post_init__(self):
        if self.offset < 0:
            raise ValueError("offset must be nonnegative")
        if self.denom <= 0:
            raise ValueError("denominator must be positive")
        if any(x < 0 for x in self.nums):
            raise ValueError("weights must be nonnegative")
        if self.scale is not None and self.denom != 10**self.scale:
            raise ValueError("fixed mode requires denom == 10**scale")
        if self.nums and (self.nums[0] == 0 or self.nums[-1] == 0):
            raise ValueError("weights must be trimmed; use IntDist.make")
        if sum(self.nums) > self.denom:
            raise ValueError("total mass exceeds one")

    @classmethod
    def make(cls, offset: int, nums: Iterable[int], denom: int, scale: int | None = None) -> IntDist:
        off, trimmed = _trim(offset, list(nums))
        return cls(off, trimmed, denom, scale)

    @classmethod
    def point(cls, k: int = 0, scale: int | None = None) -> IntDist:
        denom = 1 if scale is None else 10**scale
        return cls(k, (denom,), denom, scale)

    @classmethod
    def from_probs(cls, probs: Mapping[int, Fraction | str | int], scale: int | None = None) -> IntDist:
        """Build from ``{k: probability}``; fixed mode truncates each probability downward."""
        exact = {int(k): parse_rational(v) for k, v in probs.items()}
        if any(k < 0 for k in exact) or any(v < 0 for v in exact.values()):
            raise ValueError("support and weights must be nonnegative")
        if sum(exact.values()) > 1:
            raise ValueError("probabilities sum to more than one")
        if not exact:
            return cls.make(0, [], 1 if scale is None else 10**scale, scale)
        lo, hi = min(exact), max(exact)
        if scale is None:
            denom = lcm(*(v.denominator for v in exact.values()))
            nums = [exact.get(k, Fraction(0)) * denom for k in range(lo, hi + 1)]
            return cls.make(lo, [int(x) for x in nums], denom)
        denom = 10**scale
        nums = [exact.get(k, Fraction(0)) for k in range(lo, hi + 1)]
        return cls.make(lo, [v.numerator * denom // v.denominator for v in nums], denom, scale)

    # -- views ---------------------------------------------------------

    @property
    def exact(self) -> bool:
        return self.scale is None

    @property
    def max_support(self) -> int:
        return self.offset + len(self.nums) - 1 if self.nums else 0

    def _value(self, num: int):
        if self.scale is None:
            return mpq(num, self.denom)
        return FixedDec(num, self.scale)

    def weight(self, k: int):
        i = k - self.offset
        num = self.nums[i] if 0 <= i < len(self.nums) else 0
        return self._value(num)

    def cdf(self, k: int):
        """P(Y <= k) as a backend number (lower bound in fixed mode)."""
        upto = k - self.offset + 1
        return self._value(sum(self.nums[: max(upto, 0)]))

    @property
    def weights(self) -> list:
        return [self._value(x) for x in self.nums]

    @property
    def deficit(self):
        return self._value(self.denom - sum(self.nums))

    def to_rationals(self) -> dict:
        """``{k: P(k)}`` as exact mpq values (fixed-mode weights are exact decimals)."""
        return {self.offset + i: mpq(x, self.denom) for i, x in enumerate(self.nums) if x}

    def as_backend(self, scale: int | None) -> IntDist:
        """Re-express in another backend; converting to fixed truncates downward."""
        if scale == self.scale:
            return self
        if scale is None:
            return IntDist(self.offset, self.nums, self.denom, None)
        denom = 10**scale
        return IntDist.make(self.offset, [x * denom // self.denom for x in self.nums], denom, scale)

    def truncate_above(self, kmax: int) -> IntDist:
        """Drop support above kmax; the removed mass joins the deficit."""
        keep = kmax - self.offset + 1
        if keep >= len(self.nums):
            return self
        return IntDist.make(self.offset, self.nums[: max(keep, 0)], self.denom, self.scale)

    def __len__(self):
        return len(self.nums)


def _same_backend(a: IntDist, b: IntDist) -> None:
    if a.scale != b.scale:
        raise ValueError(f"backend mismatch: scale {a.scale} vs {b.scale}")


def pushdown_minus_one(d: IntDist) -> IntDist:
    """Law of (Y - 1)^+ for Y ~ d."""
    if not d.nums:
        return d
    if d.offset > 0:
        return IntDist(d.offset - 1, d.nums, d.denom, d.scale)
    if len(d.nums) == 1:
        return d
    return IntDist.make(0, [d.nums[0] + d.nums[1], *d.nums[2:]], d.denom, d.scale)


def convolve(a: IntDist, b: IntDist, max_support: int = DEFAULT_MAX_SUPPORT) -> IntDist:
    """Law of the independent sum."""
    _same_backend(a, b)
    if not a.nums or not b.nums:
        return IntDist.make(0, [], a.denom * b.denom if a.exact else a.denom, a.scale)
    n = len(a.nums) + len(b.nums) - 1
    if n > max_support:
        raise SupportGuardError(f"convolution support {n} exceeds cap {max_support}")
    raw = int_convolve(a.nums, a.nums if a is b else b.nums)
    if a.exact:
        return IntDist.make(a.offset + b.offset, raw, a.denom * b.denom)
    shift = a.denom
    return IntDist.make(a.offset + b.offset, [x // shift for x in raw], shift, a.scale)


def convolve_power(d: IntDist, k: int, max_support: int = DEFAULT_MAX_SUPPORT,
                   kmax: int | None = None) -> IntDist:
    """k-fold self-convolution by binary exponentiation.

    With ``kmax`` every intermediate is cut above kmax; since all weights are
    nonnegative, the result is still exact on ``0..kmax``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")

    def cut(x: IntDist) -> IntDist:
        return x if kmax is None else x.truncate_above(kmax)

    result = None
    base = cut(d)
    while True:
        if k & 1:
            result = base if result is None else cut(convolve(result, base, max_support))
        k >>= 1
        if not k:
            return result
        base = cut(convolve(base, base, max_support))


def mean(d: IntDist):
    """Sum of k * P(k); in fixed mode a lower bound (deficit contributes nothing)."""
    total = sum((d.offset + i) * x for i, x in enumerate(d.nums))
    return d._value(total)


def second_moment(d: IntDist):
    return d._value(sum((d.offset + i) ** 2 * x for i, x in enumerate(d.nums)))


def tail_expectation(d: IntDist, t: int):
    """E (Y - t)^+."""
    total = sum(max(d.offset + i - t, 0) * x for i, x in enumerate(d.nums))
    return d._value(total)


def tail_numerators(d: IntDist, top: int) -> list[int]:
    """Numerators of E (Y - t)^+ over ``d.denom`` for t = 0..top, in one pass."""
    weight = {d.offset + i: x for i, x in enumerate(d.nums)}
    s = sum(k * x for k, x in weight.items())  # t = 0
    above = sum(weight.values())  # mass on k > t, currently on k >= 0
    out = []
    for t in range(top + 1):
        above -= weight.get(t, 0)  # now mass on k > t
        out.append(s)
        s -= above
    return out


def to_csv_rows(d: IntDist, digits: int = 60) -> list[tuple[int, str]]:
    """Rows ``(k, weight)`` with weights in full decimal expansion."""
    rows = []
    for i, x in enumerate(d.nums):
        if d.scale is not None:
            w = str(FixedDec(x, d.scale))
        else:
            w = format_rational(mpq(x, d.denom), digits)
        rows.append((d.offset + i, w))
    return rows


# -- arrival laws ---------------------------------------------------------


@dataclass(frozen=True)
class ArrivalLaw:
    """Finite-support arrival distribution with exact mean ``alpha``.

    ``dist`` is always exact; call :meth:`in_backend` for a fixed-point copy.
    ``spec`` is the textual form (``two:0.05``) used to replay runs.
    """

    dist: IntDist
    alpha: Fraction
    spec: str

    def __post_init__(self):
        if not self.dist.exact:
            raise ValueError("arrival laws are stored exactly")
        if mean(self.dist) != self.alpha:
            raise ValueError("alpha does not equal the mean of the law")

    @property
    def family(self) -> str:
        return self.spec.split(":", 1)[0]

    def in_backend(self, scale: int | None) -> IntDist:
        return self.dist.as_backend(scale)

    def prob(self, k: int) -> Fraction:
        return Fraction(self.dist.weight(k))


def spec_number(v) -> str:
    """Decimal when it terminates, else p/q, so specs always parse back exactly."""
    return format_rational(v) if decimal_digits(v) is not None else f"{v.numerator}/{v.denominator}"


def atom_law(k: int, alpha, family: str | None = None) -> ArrivalLaw:
    """k cars with probability alpha/k, none otherwise."""
    alpha = parse_rational(alpha)
    if k < 1:
        raise ValueError("atom must be at least 1")
    if not 0 <= alpha <= k:
        raise ValueError(f"alpha must lie in [0, {k}]")
    p = alpha / k
    probs = {0: 1 - p}
    if p:
        probs[k] = p
    tag = family or f"atom{k}"
    return ArrivalLaw(IntDist.from_probs(probs), alpha, f"{tag}:{spec_number(alpha)}")


def family_law(family: str, alpha) -> ArrivalLaw:
    """One-parameter family by name: ``two``, ``three`` or ``atom<k>``."""
    if family == "two":
        return bernoulli2(alpha)
    if family == "three":
        return threes(alpha)
    if family.startswith("atom") and family[4:].isdigit():
        return atom_law(int(family[4:]), alpha)
    raise ValueError(f"family {family!r} has no alpha parameter")


def bernoulli2(alpha) -> ArrivalLaw:
    return atom_law(2, alpha, "two")


def threes(alpha) -> ArrivalLaw:
    return atom_law(3, alpha, "three")


def pmf_law(probs: Mapping[int, Fraction | str]) -> ArrivalLaw:
    exact = {int(k): parse_rational(v) for k, v in probs.items()}
    if sum(exact.values()) != 1:
        raise ValueError("arrival pmf must sum to one")
    d = IntDist.from_probs(exact)
    body = ",".join(f"{k}:{spec_number(v)}" for k, v in sorted(exact.items()) if v)
    return ArrivalLaw(d, mean(d), f"pmf:{body}")


def no_cars() -> ArrivalLaw:
    return ArrivalLaw(IntDist.point(0), Fraction(0), "pmf:0:1")


def parse_arrival(spec: str) -> ArrivalLaw:
    """Parse ``two:<a>``, ``three:<a>``, ``atom<k>:<a>`` or ``pmf:<k:w,...>``."""
    if ":" not in spec:
        raise ValueError(f"arrival spec needs a family prefix: {spec!r}")
    family, body = spec.split(":", 1)
    if family == "pmf":
        probs = {}
        for item in body.split(","):
            k, w = item.split(":")
            probs[int(k)] = parse_rational(w)
        return pmf_law(probs)
    return family_law(family, body)
