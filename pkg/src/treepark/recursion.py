"""Iteration of X_{n+1} = eta + sum_{i=1}^{d} (X_n^{(i)} - 1)^+ on the d-ary tree.

The engine keeps the law of X_n. To obtain q_0..q_N only the window
``0..N-n`` of X_n is ever needed (P(X_{n+1} <= j) depends on X_n only
through P(X_n <= j + 1)), so by default each law is cut above that window.
``full_law=True`` keeps everything, which moments and order comparisons need.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Union

from .dist import (
    DEFAULT_MAX_SUPPORT,
    ArrivalLaw,
    SupportGuardError,
    IntDist,
    convolve,
    convolve_power,
    mean,
    pushdown_minus_one,
)
from .numerics import DEFAULT_SCALE, FixedDec, exact_value, fd_mul, fd_pow_inv, mpq

Number = Union[Fraction, FixedDec]  # exact-mode values are gmpy2.mpq

# exact denominators roughly double in length per level on the binary tree
EXACT_DEPTH_CAP = 14


class DepthCapError(SupportGuardError, ValueError):
    """Exact full laws beyond the depth cap would not fit in memory."""


@dataclass(frozen=True)
class ModelConfig:
    d: int
    arrival: ArrivalLaw
    depth: int
    scale: int | None = DEFAULT_SCALE  # None selects exact rationals
    full_law: bool = False
    max_support: int = DEFAULT_MAX_SUPPORT
    exact_depth_cap: int | None = EXACT_DEPTH_CAP

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        if (self.scale is None and self.full_law and self.exact_depth_cap is not None
                and self.depth > self.exact_depth_cap):
            raise DepthCapError(
                f"exact full-law depth {self.depth} exceeds cap {self.exact_depth_cap}; "
                "raise exact_depth_cap or use a fixed scale")

    @property
    def lam(self) -> int:
        return self.d

    @property
    def exact(self) -> bool:
        return self.scale is None

    def window(self, n: int) -> int | None:
        return None if self.full_law else self.depth - n


@dataclass
class RecursionState:
    n: int
    law: IntDist
    qseq: list
    gn: Number
    exn: Number

    @property
    def q(self) -> Number:
        return self.qseq[-1]


def _pow_inv(cfg: ModelConfig, i: int) -> Number:
    if cfg.exact:
        return mpq(1, cfg.lam**i)
    return fd_pow_inv(cfg.lam, i, cfg.scale)


def _times(cfg: ModelConfig, a: Number, b: Number) -> Number:
    return a * b if cfg.exact else fd_mul(a, b)


def _next_mean(cfg: ModelConfig, exn: Number, qn: Number) -> Number:
    """alpha + lam * (E X_n - P(X_n > 0)); clamped at zero in fixed mode."""
    alpha = cfg.arrival.alpha
    if cfg.exact:
        return alpha + cfg.lam * (exn - 1 + qn)
    pushed = max(exact_value(exn) - 1 + exact_value(qn), mpq(0))
    return FixedDec.floor_of(alpha + cfg.lam * pushed, cfg.scale)


def initial_state(cfg: ModelConfig) -> RecursionState:
    law = cfg.arrival.in_backend(cfg.scale)
    w = cfg.window(0)
    if w is not None:
        law = law.truncate_above(w)
    q0 = law.weight(0)
    exn = mpq(cfg.arrival.alpha) if cfg.exact else FixedDec.floor_of(cfg.arrival.alpha, cfg.scale)
    return RecursionState(0, law, [q0], q0, exn)


def step(state: RecursionState, cfg: ModelConfig) -> RecursionState:
    n1 = state.n + 1
    w = cfg.window(n1)
    if w is not None and w < 0:
        raise ValueError(f"cannot step past configured depth {cfg.depth}")
    pushed = pushdown_minus_one(state.law)
    children = convolve_power(pushed, cfg.d, cfg.max_support, kmax=w)
    arrival = cfg.arrival.in_backend(cfg.scale)
    if w is not None:
        arrival = arrival.truncate_above(w)
    law = convolve(arrival, children, cfg.max_support)
    if w is not None:
        law = law.truncate_above(w)
    q = law.weight(0)
    gn = state.gn + _times(cfg, _pow_inv(cfg, n1), q)
    exn = _next_mean(cfg, state.exn, state.q)
    return RecursionState(n1, law, [*state.qseq, q], gn, exn)


def run(cfg: ModelConfig, depth: int | None = None) -> RecursionState:
    """Iterate from X_0 = eta up to ``depth`` (default cfg.depth)."""
    target = cfg.depth if depth is None else depth
    state = initial_state(cfg)
    while state.n < target:
        state = step(state, cfg)
    return state


def iterate(cfg: ModelConfig):
    """Yield the state at every depth 0..cfg.depth."""
    state = initial_state(cfg)
    yield state
    while state.n < cfg.depth:
        state = step(state, cfg)
        yield state


def q_sequence(cfg: ModelConfig) -> list:
    return run(cfg).qseq


def big_f(alpha, lam: int) -> Fraction:
    """lam (1 - alpha) / (lam - 1)."""
    if lam < 2:
        raise ValueError("lam must be at least 2")
    return Fraction(lam) * (1 - Fraction(alpha)) / (lam - 1)


def big_c(alpha, lam: int) -> Fraction:
    """(1 - alpha) / (lam - 1): the constant as originally printed."""
    if lam < 2:
        raise ValueError("lam must be at least 2")
    return (1 - Fraction(alpha)) / (lam - 1)


def big_c_star(alpha, lam: int) -> Fraction:
    """(lam - alpha) / (lam - 1): the constant that iterating the mean recursion produces."""
    if lam < 2:
        raise ValueError("lam must be at least 2")
    return (lam - Fraction(alpha)) / (lam - 1)


def partial_g(qseq, lam: int, upto: int | None = None):
    """Exact sum_{i<=upto} lam^-i q_i."""
    upto = len(qseq) - 1 if upto is None else upto
    return sum((exact_value(q) / lam**i for i, q in enumerate(qseq[: upto + 1])), mpq(0))


def closed_form_mean(qseq, alpha, lam: int, n: int, constant=big_c_star) -> Fraction:
    """(G_{n-1} - F) lam^n + constant, the closed form for E X_n (n >= 1)."""
    if n < 1:
        raise ValueError("closed form applies for n >= 1")
    return (partial_g(qseq, lam, n - 1) - big_f(alpha, lam)) * lam**n + constant(alpha, lam)


@dataclass(frozen=True)
class ConstantResolution:
    name: str
    value: Fraction
    candidates: dict = field(default_factory=dict)


def resolve_constant(arrival: ArrivalLaw, d: int) -> ConstantResolution:
    """Pick the constant whose closed form reproduces the exact E X_1."""
    cfg = ModelConfig(d, arrival, 1, scale=None, full_law=True)
    state = run(cfg)
    ex1 = mean(state.law)
    candidates = {"printed": big_c(arrival.alpha, d), "rederived": big_c_star(arrival.alpha, d)}
    matches = {
        name: value for name, value in candidates.items()
        if (partial_g(state.qseq, d, 0) - big_f(arrival.alpha, d)) * d + value == ex1
    }
    if len(matches) != 1:
        raise ArithmeticError(f"expected exactly one matching constant, got {sorted(matches)}")
    (name, value), = matches.items()
    return ConstantResolution(name, value, candidates)


@dataclass(frozen=True)
class ExpectationCheck:
    n: int
    recursion: Number
    law_mean: Number | None
    closed_form: Fraction | None


def expected_xn(state: RecursionState, cfg: ModelConfig) -> ExpectationCheck:
    """E X_n by the running recursion, the law's mean and the closed form."""
    law_mean = mean(state.law) if cfg.full_law else None
    closed = None
    if cfg.exact and state.n >= 1:
        closed = closed_form_mean(state.qseq, cfg.arrival.alpha, cfg.lam, state.n)
    return ExpectationCheck(state.n, state.exn, law_mean, closed)


def tau_transform(qseq, lam: int) -> tuple[Fraction, Fraction]:
    """Truncated E lam^-tau from q_m = P(tau > m), and a bound on what is left out.

    P(tau = 0) = 1 - q_0 and P(tau = m) = q_{m-1} - q_m; the omitted part
    sum_{m>n} lam^-m P(tau = m) is at most lam^-(n+1) q_n.
    """
    if not qseq:
        raise ValueError("empty q sequence")
    qs = [exact_value(q) for q in qseq]
    total = 1 - qs[0]
    for m in range(1, len(qs)):
        total += (qs[m - 1] - qs[m]) / lam**m
    n = len(qs) - 1
    return total, qs[-1] / lam ** (n + 1)


def g_from_tau(qseq, lam: int) -> Fraction:
    """sum_{i<=n} lam^-i P(tau > i), with P(tau > i) rebuilt from the tau law."""
    qs = [exact_value(q) for q in qseq]
    tau_mass = [1 - qs[0]] + [qs[m - 1] - qs[m] for m in range(1, len(qs))]
    total = mpq(0)
    seen = mpq(0)
    for i, pm in enumerate(tau_mass):
        seen += pm
        total += (1 - seen) / lam**i
    return total


def limit_residual(exn, qn, alpha, lam: int) -> Fraction:
    """|E X_n - (lam - alpha - lam q_n) / (lam - 1)|."""
    alpha = mpq(alpha)
    target = (lam - alpha - lam * exact_value(qn)) / (lam - 1)
    return abs(exact_value(exn) - target)


def limit_check(cfg: ModelConfig) -> Fraction:
    state = run(cfg)
    return limit_residual(state.exn, state.q, cfg.arrival.alpha, cfg.lam)


def with_depth(cfg: ModelConfig, depth: int) -> ModelConfig:
    return replace(cfg, depth=depth)
