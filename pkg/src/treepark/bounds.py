"""Certified bounds on the critical arrival density.

Upper bounds come from the G - F criterion: if a certified lower bound on
G_n(alpha) exceeds F(alpha) then alpha > alpha_c. Lower bounds come from the
subgraph-counting union bound; a second family of upper bounds comes from
site percolation on the vertices k levels down.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from fractions import Fraction
from math import factorial

from .dist import ArrivalLaw, family_law, parse_arrival, spec_number
from .numerics import (
    DEFAULT_SCALE,
    decimal_digits,
    exact_value,
    format_rational,
    format_signed,
    parse_rational,
    sqrt_upper,
)
from .recursion import ModelConfig, big_f, run

MARGIN_DIGITS = 80


@dataclass(frozen=True)
class BoundCertificate:
    kind: str  # "upper" | "lower"
    method: str  # "gf-criterion" | "catalan-count" | "percolation"
    d: int
    arrival: str
    alpha: str
    n: int | None
    scale: int | None
    margin: str
    growth: str | None = None

    def __post_init__(self):
        if self.kind not in ("upper", "lower"):
            raise ValueError(f"bad kind {self.kind!r}")
        if self.method == "gf-criterion" and not parse_rational(self.margin) > 0:
            raise ValueError("an upper certificate needs a positive margin")

    @property
    def alpha_value(self) -> Fraction:
        return parse_rational(self.alpha)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> BoundCertificate:
        return cls(**json.loads(text))


@dataclass(frozen=True)
class Refusal:
    """The criterion did not fire. This proves nothing about alpha."""

    d: int
    arrival: str
    n: int
    scale: int | None
    margin: str


def _gf_margin(d: int, arrival: ArrivalLaw, n: int, scale: int | None):
    if d < 2:
        raise ValueError("the criterion needs d >= 2")
    alpha = arrival.alpha
    if scale is not None:
        digits = decimal_digits(alpha)
        if digits is None or digits > scale:
            raise ValueError(f"alpha={alpha} is not exactly representable at scale {scale}")
    cfg = ModelConfig(d, arrival, n, scale=scale)
    state = run(cfg)
    return exact_value(state.gn) - big_f(alpha, d)


def certify_upper(d: int, arrival: ArrivalLaw, n: int, scale: int | None = DEFAULT_SCALE):
    """Certificate that alpha > alpha_c, or a :class:`Refusal`.

    With a fixed scale the G-sum is a truncated lower bound and F is exact,
    so a positive margin is rigorous. ``scale=None`` runs in exact rationals.
    """
    margin = _gf_margin(d, arrival, n, scale)
    text = format_signed(margin, MARGIN_DIGITS)
    if margin > 0:
        return BoundCertificate("upper", "gf-criterion", d, arrival.spec,
                                spec_number(arrival.alpha), n, scale, text)
    return Refusal(d, arrival.spec, n, scale, text)


def replay(cert: BoundCertificate):
    """Recompute a certificate from its own fields."""
    if cert.method == "gf-criterion":
        return certify_upper(cert.d, parse_arrival(cert.arrival), cert.n, cert.scale)
    if cert.method == "catalan-count":
        return lower_certificate(cert.d, cert.growth)
    if cert.method == "percolation":
        return percolation_certificate(cert.d, _ATOM_FAMILIES.index(cert.arrival) + 2
                                       if cert.arrival in _ATOM_FAMILIES else int(cert.arrival[4:]))
    raise ValueError(f"unknown method {cert.method!r}")


def search_upper(d: int, family: str, n: int, start: str, stop: str, step: str,
                 scale: int | None = DEFAULT_SCALE, exhaustive: bool = False):
    """Smallest grid alpha that certifies, or None.

    Bisection assumes certification is monotone in alpha on the grid;
    ``exhaustive=True`` scans every point in increasing order instead.
    Whatever is returned is a genuine certificate either way.
    """
    lo, hi, h = (parse_rational(x) for x in (start, stop, step))
    if h <= 0 or hi < lo:
        raise ValueError("empty grid")
    count = int((hi - lo) / h)
    grid = [lo + i * h for i in range(count + 1)]

    def attempt(alpha):
        cert = certify_upper(d, family_law(family, alpha), n, scale)
        return cert if isinstance(cert, BoundCertificate) else None

    if exhaustive:
        for alpha in grid:
            cert = attempt(alpha)
            if cert:
                return cert
        return None
    best = attempt(grid[-1])
    if best is None:
        return None
    lo_i, hi_i = -1, len(grid) - 1  # grid[hi_i] certifies; lo_i is a non-certifying sentinel
    while hi_i - lo_i > 1:
        mid = (lo_i + hi_i) // 2
        cert = attempt(grid[mid])
        if cert:
            hi_i, best = mid, cert
        else:
            lo_i = mid
    return best


# -- lower bounds from counting rooted subgraphs ---------------------------


def e_upper(terms: int = 40) -> Fraction:
    """Rational upper bound on e: partial series plus the tail bound 1/(N! N)."""
    return sum((Fraction(1, factorial(k)) for k in range(terms + 1)), Fraction(0)) + Fraction(
        1, factorial(terms) * terms)


def growth_constant(d: int, kind: str | None = None) -> Fraction:
    """Upper bound on the growth rate of rooted n-vertex subtrees of the d-ary tree.

    ``"catalan"`` (default for d = 2) gives d^d / (d-1)^(d-1), which is 4 at
    d = 2; ``"ed"`` (default otherwise) gives an upper bound on e * d.
    """
    if kind is None:
        kind = "catalan" if d == 2 else "ed"
    if kind == "catalan":
        return Fraction(d**d, (d - 1) ** (d - 1))
    if kind == "ed":
        return e_upper() * d
    return parse_rational(kind)


def lower_bound_count(d: int, growth=None, digits: int = 40, drop_one_minus_p: bool = False) -> Fraction:
    """Certified lower bound alpha* = 2 p* on alpha_c.

    p* is the smaller root of 4 g^2 p (1 - p) = 1, so alpha* = 1 - sqrt(1 - 1/g^2);
    the square root is rounded up, which rounds alpha* down. With
    ``drop_one_minus_p`` the (1 - p) factor is bounded by one, giving 1/(2 g^2).
    """
    g = growth_constant(d, growth) if growth is None or isinstance(growth, str) else parse_rational(growth)
    if g <= 0:
        raise ValueError("growth must be positive")
    if g < 1:
        raise ValueError("growth below one makes the union bound vacuous")
    if drop_one_minus_p:
        return Fraction(1) / (2 * g * g)
    return 1 - sqrt_upper(1 - 1 / (g * g), digits)


def lower_certificate(d: int, growth: str | None = None) -> BoundCertificate:
    """Certificate for lower_bound_count; the margin is 1 - 4 g^2 p (1 - p) > 0 at p = alpha/2."""
    if growth is None:
        growth = "catalan" if d == 2 else "ed"
    alpha = lower_bound_count(d, growth)
    g = growth_constant(d, growth)
    p = alpha / 2
    slack = 1 - 4 * g * g * p * (1 - p)
    return BoundCertificate("lower", "catalan-count", d, "two", format_rational(alpha, 40), None, None,
                            format_signed(slack, MARGIN_DIGITS), growth)


# -- upper bounds from percolation ------------------------------------------


def upper_bound_percolation(d: int, k: int) -> Fraction:
    """k d^-k: above it, level-k vertices holding k cars percolate and X is infinite."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if d < 2:
        raise ValueError("d must be at least 2")
    return Fraction(k, d**k)


_ATOM_FAMILIES = ("two", "three")


def percolation_certificate(d: int, k: int) -> BoundCertificate:
    """Record of the percolation bound; it is non-strict, so the margin is zero."""
    alpha = upper_bound_percolation(d, k)
    family = _ATOM_FAMILIES[k - 2] if k - 2 < len(_ATOM_FAMILIES) else f"atom{k}"
    return BoundCertificate("upper", "percolation", d, family, spec_number(alpha), None, None, "0")
