"""Increasing convex order on integer laws, tested through E (Y - t)^+."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .dist import IntDist, tail_numerators
from .numerics import mpq
from .recursion import ModelConfig, iterate


@dataclass(frozen=True)
class IcxReport:
    """margins[t] = E(B - t)^+ - E(A - t)^+ for t = 0..len(margins) - 1."""

    margins: list

    @property
    def violated_at(self) -> int | None:
        for t, m in enumerate(self.margins):
            if m < 0:
                return t
        return None

    @property
    def dominated(self) -> bool:
        return self.violated_at is None

    @property
    def verdict(self) -> str:
        t = self.violated_at
        return "dominated" if t is None else f"violated-at({t})"


def icx_compare_laws(a: IntDist, b: IntDist) -> IcxReport:
    """Is a below b in the increasing convex order?

    For laws on the integers every increasing convex test function is, on the
    support, a nonnegative mix of a constant and the hinges (x - t)^+ at
    integer t, so checking t = 0..max support is exact. Both laws must carry
    their full mass.
    """
    for d in (a, b):
        if d.deficit != 0:
            raise ValueError("icx comparison needs complete laws (zero deficit)")
    top = max(a.max_support, b.max_support)
    na, nb = tail_numerators(a, top), tail_numerators(b, top)
    margins = [mpq(y, b.denom) - mpq(x, a.denom) for x, y in zip(na, nb)]
    return IcxReport(margins)


def icx_compare_parking(cfg_a: ModelConfig, cfg_b: ModelConfig, n: int) -> list[IcxReport]:
    """Compare the exact laws of X_m under two arrival laws, for every m <= n."""
    if cfg_a.d != cfg_b.d:
        raise ValueError("both configurations need the same d")
    if not (cfg_a.exact and cfg_b.exact):
        raise ValueError("order comparison runs in exact mode")
    runs = [iterate(replace(c, depth=n, full_law=True)) for c in (cfg_a, cfg_b)]
    return [icx_compare_laws(sa.law, sb.law) for sa, sb in zip(*runs)]
