"""Tables and figures written by the CLI."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .dist import family_law, spec_number  # noqa: E402
from .numerics import FixedDec, exact_value, format_rational, parse_rational  # noqa: E402
from .recursion import ModelConfig, iterate  # noqa: E402

# PNG metadata carries the matplotlib version by default; drop it for byte-stable output
_PNG_META = {"Software": None}

STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "savefig.bbox": "tight",
}


def fmt_number(x, digits: int = 60) -> str:
    if isinstance(x, FixedDec):
        return str(x)
    return format_rational(exact_value(x), digits)


def _num(text) -> float:
    return float(parse_rational(text))


def sci(x: float) -> str:
    return f"{x:.16e}"


def write_csv(path: Path, header: list[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def alpha_grid(start, stop, step) -> list:
    lo, hi, h = (parse_rational(x) for x in (start, stop, step))
    if h <= 0 or hi < lo:
        raise ValueError("empty alpha grid")
    return [lo + i * h for i in range(int((hi - lo) / h) + 1)]


def qn_rows(d: int, family: str, alphas, depth: int, scale, depths=None):
    """Rows (alpha, n, q_n) over an alpha grid; one engine run per alpha."""
    rows = []
    for alpha in alphas:
        arrival = family_law(family, alpha)
        cfg = ModelConfig(d, arrival, depth, scale=scale)
        for state in iterate(cfg):
            if depths is None or state.n in depths:
                rows.append((spec_number(alpha), state.n, fmt_number(state.q)))
    return rows


def ex_rows(d: int, family: str, alphas, depth: int, scale):
    """Rows (alpha, n, E X_n, E X_n / d^n) from the running mean recursion."""
    rows = []
    for alpha in alphas:
        arrival = family_law(family, alpha)
        cfg = ModelConfig(d, arrival, depth, scale=scale)
        for state in iterate(cfg):
            ex = exact_value(state.exn)
            rows.append((spec_number(alpha), state.n, fmt_number(state.exn), format_rational(ex / d**state.n, 60)))
    return rows


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(STYLE):
        fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)
    return path


def styled(func):
    """Build the figure under STYLE so axes pick it up at creation."""

    def wrapper(*args, **kwargs):
        with plt.rc_context(STYLE):
            return func(*args, **kwargs)

    wrapper.__name__, wrapper.__doc__ = func.__name__, func.__doc__
    return wrapper


@styled
def plot_qn(rows, path: Path, title: str = "") -> Path:
    """P(X_n = 0) against alpha, one curve per n."""
    curves: dict[int, list] = {}
    for alpha, n, q in rows:
        curves.setdefault(int(n), []).append((_num(alpha), _num(q)))
    fig, ax = plt.subplots(figsize=(6, 4))
    for n in sorted(curves):
        xs, ys = zip(*curves[n])
        ax.plot(xs, ys, lw=1.2, label=f"n={n}")
    ax.set_xlabel(r"$\alpha$")
    ax.set_ylabel(r"$P(X_n = 0)$")
    ax.set_ylim(0, 1.02)
    if title:
        ax.set_title(title)
    if len(curves) <= 12:
        ax.legend(fontsize=8, frameon=False)
    return _save(fig, path)


@styled
def plot_ex(rows, path: Path, d: int) -> Path:
    """E X_n / d^n against n, one curve per alpha."""
    curves: dict[str, list] = {}
    for alpha, n, _, ratio in rows:
        curves.setdefault(alpha, []).append((int(n), _num(ratio)))
    fig, ax = plt.subplots(figsize=(6, 4))
    for alpha in curves:
        xs, ys = zip(*curves[alpha])
        ax.plot(xs, ys, marker=".", lw=1, label=rf"$\alpha$={alpha}")
    ax.set_xlabel("n")
    ax.set_ylabel(rf"$E X_n / {d}^n$")
    if len(curves) <= 12:
        ax.legend(fontsize=8, frameon=False)
    return _save(fig, path)


@styled
def plot_simulation(report, path: Path, exact_q=None) -> Path:
    ns = list(range(report.depth + 1))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.errorbar(ns, [report.q_hat(n) for n in ns], yerr=[2 * report.q_se(n) for n in ns],
                 fmt="o", ms=3, capsize=2, label="estimate")
    if exact_q is not None:
        ax1.plot(ns[: len(exact_q)], [float(exact_value(q)) for q in exact_q], "k-", lw=1, label="exact")
        ax1.legend(fontsize=8, frameon=False)
    ax1.set_xlabel("n")
    ax1.set_ylabel(r"$\hat q_n$")
    ax2.bar(range(len(report.tau_hist)), report.tau_hist, color="0.5")
    ax2.set_xlabel(r"$\tau$ (last bar: censored)")
    ax2.set_ylabel("trials")
    fig.tight_layout()
    return _save(fig, path)


@styled
def plot_icx(reports, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for depth, rep in enumerate(reports):
        ax.plot(range(len(rep.margins)), [float(m) for m in rep.margins], lw=1, label=f"depth {depth}")
    ax.axhline(0, color="k", lw=0.6)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$E(X'-t)^+ - E(X-t)^+$")
    ax.set_xscale("symlog", linthresh=10)
    if len(reports) <= 12:
        ax.legend(fontsize=7, frameon=False)
    return _save(fig, path)
