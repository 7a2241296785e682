"""Monte Carlo for parking on Galton-Watson trees.

Trees are stored level by level: the children of every vertex are a
contiguous block of the next level. ``eval_parking`` runs the count
recursion bottom-up; ``simulate_stepwise`` moves individual cars and breaks
ties at random, and exists to check that the two agree.

Each trial draws from its own generator, seeded from (seed, trial index),
so results do not depend on how trials are split across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .dist import ArrivalLaw

DEFAULT_MAX_NODES = 10**8
CHUNK = 1000
BATCH_CELLS = 1 << 22  # vertices x trials held in memory at once


class ResourceGuardError(RuntimeError):
    pass


# -- laws ---------------------------------------------------------------------


@dataclass(frozen=True)
class OffspringLaw:
    """``deterministic`` (param d), ``poisson`` (param mean) or ``pmf`` (param {k: p})."""

    kind: str
    param: object

    @classmethod
    def deterministic(cls, d: int) -> OffspringLaw:
        return cls("deterministic", int(d))

    @classmethod
    def poisson(cls, mean) -> OffspringLaw:
        return cls("poisson", float(Fraction(str(mean))))

    @classmethod
    def pmf(cls, probs: dict) -> OffspringLaw:
        return cls("pmf", tuple(sorted((int(k), float(Fraction(str(v)))) for k, v in probs.items())))

    @property
    def mean(self) -> float:
        if self.kind == "deterministic":
            return float(self.param)
        if self.kind == "poisson":
            return self.param
        return sum(k * p for k, p in self.param)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "deterministic":
            return np.full(size, self.param, dtype=np.int64)
        if self.kind == "poisson":
            return rng.poisson(self.param, size).astype(np.int64)
        ks = np.array([k for k, _ in self.param], dtype=np.int64)
        cum = np.cumsum([p for _, p in self.param])
        return ks[np.minimum(np.searchsorted(cum, rng.random(size), side="right"), len(ks) - 1)]


def parse_offspring(spec: str) -> OffspringLaw:
    """``<d>``, ``det:<d>``, ``poisson:<mean>`` or ``pmf:<k:w,...>``."""
    if spec.isdigit():
        return OffspringLaw.deterministic(int(spec))
    kind, _, body = spec.partition(":")
    if kind == "det":
        return OffspringLaw.deterministic(int(body))
    if kind == "poisson":
        return OffspringLaw.poisson(body)
    if kind == "pmf":
        return OffspringLaw.pmf(dict(item.split(":") for item in body.split(",")))
    raise ValueError(f"unknown offspring spec {spec!r}")


@dataclass(frozen=True)
class PoissonArrival:
    """Poisson(alpha) car counts; Monte Carlo only (infinite support)."""

    alpha: Fraction

    @property
    def spec(self) -> str:
        return f"poisson:{self.alpha}"


@lru_cache(maxsize=64)
def _inverse_cdf(arrival: ArrivalLaw) -> tuple[np.ndarray, np.ndarray]:
    probs = arrival.dist.to_rationals()
    ks = sorted(probs)
    return np.array(ks, dtype=np.int64), np.cumsum([float(probs[k]) for k in ks])


def _invert(arrival: ArrivalLaw, u: np.ndarray) -> np.ndarray:
    ks, cum = _inverse_cdf(arrival)
    return ks[np.minimum(np.searchsorted(cum, u, side="right"), len(ks) - 1)]


def sample_arrivals(arrival, rng: np.random.Generator, size: int) -> np.ndarray:
    if isinstance(arrival, PoissonArrival):
        return rng.poisson(float(arrival.alpha), size).astype(np.int64)
    return _invert(arrival, rng.random(size))


def _arrival_matrix(arrival, seed: int, trials: range, nodes: int) -> np.ndarray:
    """Row t equals sample_arrivals(arrival, trial_rng(seed, t), nodes)."""
    if isinstance(arrival, PoissonArrival):
        return np.stack([sample_arrivals(arrival, trial_rng(seed, t), nodes) for t in trials])
    u = np.stack([trial_rng(seed, t).random(nodes) for t in trials])
    return _invert(arrival, u)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


# -- trees --------------------------------------------------------------------


@dataclass
class SampledTree:
    """Level-order tree; vertices of level l are ``level_start[l]:level_start[l+1]``."""

    parent: np.ndarray
    child_start: np.ndarray
    child_count: np.ndarray
    eta: np.ndarray
    level_start: np.ndarray

    @property
    def depth(self) -> int:
        return len(self.level_start) - 2

    @property
    def size(self) -> int:
        return len(self.parent)

    def node_depth(self) -> np.ndarray:
        out = np.empty(self.size, dtype=np.int64)
        for lvl in range(self.depth + 1):
            out[self.level_start[lvl]:self.level_start[lvl + 1]] = lvl
        return out

    @classmethod
    def from_children(cls, children: list[list[int]], eta) -> SampledTree:
        """Build from an explicit child list (vertex 0 is the root), relabelling to level order."""
        order, levels = [0], [0]
        frontier = [0]
        while frontier:
            nxt = [c for v in frontier for c in children[v]]
            order.extend(nxt)
            if nxt:
                levels.append(len(order) - len(nxt))
            frontier = nxt
        levels.append(len(order))
        new = {old: i for i, old in enumerate(order)}
        n = len(order)
        parent = np.full(n, -1, dtype=np.int64)
        start = np.zeros(n, dtype=np.int64)
        count = np.zeros(n, dtype=np.int64)
        for old in order:
            kids = children[old]
            count[new[old]] = len(kids)
            start[new[old]] = new[kids[0]] if kids else 0
            for c in kids:
                parent[new[c]] = new[old]
        eta_arr = np.array([eta[old] for old in order], dtype=np.int64)
        return cls(parent, start, count, eta_arr, np.array(levels, dtype=np.int64))


def sample_tree(offspring: OffspringLaw, depth: int, seed=None, arrival=None,
                max_nodes: int = DEFAULT_MAX_NODES) -> SampledTree:
    """GW tree cut at ``depth``; with ``arrival`` each vertex also gets a car count."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    counts_by_level, level_sizes = [], [1]
    for _ in range(depth):
        counts = offspring.sample(rng, level_sizes[-1])
        counts_by_level.append(counts)
        level_sizes.append(int(counts.sum()))
        if sum(level_sizes) > max_nodes:
            raise ResourceGuardError(f"tree exceeds {max_nodes} nodes")
    counts_by_level.append(np.zeros(level_sizes[-1], dtype=np.int64))
    child_count = np.concatenate(counts_by_level)
    level_start = np.concatenate([[0], np.cumsum(level_sizes)]).astype(np.int64)
    n = int(level_start[-1])
    # children of level l start right after level l, in parent order
    child_start = np.zeros(n, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    for lvl in range(depth):
        a, b = level_start[lvl], level_start[lvl + 1]
        cc = child_count[a:b]
        child_start[a:b] = b + np.concatenate([[0], np.cumsum(cc)[:-1]])
        parent[b:level_start[lvl + 2]] = np.repeat(np.arange(a, b), cc)
    eta = np.zeros(n, dtype=np.int64) if arrival is None else sample_arrivals(arrival, rng, n)
    return SampledTree(parent, child_start, child_count, eta, level_start)


def eval_parking(tree: SampledTree, n: int) -> int:
    """Cars reaching the root by time n: A(v) = eta_v + sum over children of (A(u) - 1)^+."""
    if n > tree.depth:
        raise ValueError(f"n={n} exceeds tree depth {tree.depth}")
    ls = tree.level_start
    acc = tree.eta[ls[n]:ls[n + 1]].copy()
    for lvl in range(n - 1, -1, -1):
        a, b = ls[lvl], ls[lvl + 1]
        up = np.maximum(acc - 1, 0)
        sums = np.bincount(tree.parent[b:ls[lvl + 2]] - a, weights=up, minlength=b - a)
        acc = tree.eta[a:b] + sums.astype(np.int64)
    return int(acc[0])


def root_arrival_times(tree: SampledTree, rng=None) -> list[int]:
    """Literal car dynamics; times at which cars reach the root.

    Every car stands at a vertex. When several cars reach a free spot in the
    same step one of them, chosen uniformly, parks; the rest step to the
    parent. Cars reaching the root stop there whether or not they park.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    occupied = np.zeros(tree.size, dtype=bool)
    at = {}  # vertex -> list of car ids arriving this step
    car = 0
    for v in np.flatnonzero(tree.eta):
        at[int(v)] = list(range(car, car + int(tree.eta[v])))
        car += int(tree.eta[v])
    times = []
    t = 0
    while at:
        moving = {}
        for v in sorted(at):
            cars = at[v]
            if v == 0:
                times.extend([t] * len(cars))
                if not occupied[0]:
                    occupied[0] = True
                continue
            if not occupied[v]:
                occupied[v] = True
                cars = cars[:]
                cars.pop(int(rng.integers(len(cars))))
            if cars:
                moving.setdefault(int(tree.parent[v]), []).extend(cars)
        at = moving
        t += 1
    return times


def simulate_stepwise(tree: SampledTree, n: int, seed=None) -> int:
    """Number of cars that reach the root within n steps, by literal simulation."""
    return sum(1 for t in root_arrival_times(tree, seed) if t <= n)


# -- estimation ---------------------------------------------------------------


def _xs_all_depths(tree: SampledTree) -> np.ndarray:
    return np.array([eval_parking(tree, m) for m in range(tree.depth + 1)], dtype=np.int64)


def _xs_regular_batch(d: int, depth: int, eta: np.ndarray) -> np.ndarray:
    """X_m for m = 0..depth, for a batch of complete d-ary trees; eta has shape (B, nodes)."""
    sizes = [d**lvl for lvl in range(depth + 1)]
    starts = np.concatenate([[0], np.cumsum(sizes)])
    out = np.empty((eta.shape[0], depth + 1), dtype=np.int64)
    for m in range(depth + 1):
        acc = eta[:, starts[m]:starts[m + 1]]
        for lvl in range(m - 1, -1, -1):
            pushed = np.maximum(acc - 1, 0)
            up = pushed[:, 0::d].copy()
            for j in range(1, d):
                up += pushed[:, j::d]
            acc = eta[:, starts[lvl]:starts[lvl + 1]] + up
        out[:, m] = acc[:, 0]
    return out


def _run_chunk(args) -> tuple:
    offspring, arrival, depth, seed, first, count, max_nodes = args
    if offspring.kind == "deterministic":
        d = offspring.param
        nodes = sum(d**lvl for lvl in range(depth + 1))
        if nodes > max_nodes:
            raise ResourceGuardError(f"tree exceeds {max_nodes} nodes")
        batch = max(1, BATCH_CELLS // nodes)
        blocks = []
        for lo in range(first, first + count, batch):
            hi = min(lo + batch, first + count)
            eta = _arrival_matrix(arrival, seed, range(lo, hi), nodes)
            blocks.append(_xs_regular_batch(d, depth, eta))
        xs = np.concatenate(blocks)
    else:
        xs = np.stack([
            _xs_all_depths(sample_tree(offspring, depth, trial_rng(seed, t), arrival, max_nodes))
            for t in range(first, first + count)
        ])
    zero = (xs == 0).sum(axis=0)
    total = [int(v) for v in xs.astype(object).sum(axis=0)]
    total_sq = [int(v) for v in (xs.astype(object) ** 2).sum(axis=0)]
    positive = xs > 0
    tau = np.where(positive.any(axis=1), positive.argmax(axis=1), depth + 1)
    hist = np.bincount(tau, minlength=depth + 2)
    return [int(z) for z in zero], total, total_sq, [int(h) for h in hist]


@dataclass
class EstimateReport:
    trials: int
    depth: int
    lam: float
    zero_counts: list
    sums: list
    sums_sq: list
    tau_hist: list  # index depth + 1 counts censored trials
    config: dict = field(default_factory=dict)

    def q_hat(self, n: int) -> float:
        return self.zero_counts[n] / self.trials

    def q_se(self, n: int) -> float:
        q = self.q_hat(n)
        return math.sqrt(q * (1 - q) / self.trials)

    def ex_hat(self, n: int) -> float:
        return self.sums[n] / self.trials

    def ex_se(self, n: int) -> float:
        if self.trials < 2:
            return float("nan")
        t = self.trials
        var = (Fraction(self.sums_sq[n]) - Fraction(self.sums[n]) ** 2 / t) / (t - 1)
        return math.sqrt(float(var) / t)

    def tau_survival(self, n: int) -> float:
        """Empirical P(tau > n), from the tau histogram alone."""
        return (self.trials - sum(self.tau_hist[: n + 1])) / self.trials

    def lambda_tau(self) -> tuple[float, float]:
        """Truncated mean of lam^-tau and the most the censored trials can add."""
        value = sum(self.lam ** -m * c for m, c in enumerate(self.tau_hist[:-1])) / self.trials
        return value, self.lam ** -(self.depth + 1) * self.tau_hist[-1] / self.trials

    def rows(self) -> list[tuple]:
        return [(n, self.trials, self.q_hat(n), self.q_se(n), self.ex_hat(n), self.ex_se(n))
                for n in range(self.depth + 1)]


def estimate(offspring: OffspringLaw, arrival, depth: int, trials: int, seed: int = 0,
             workers: int = 1, max_nodes: int = DEFAULT_MAX_NODES) -> EstimateReport:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    tasks = [(offspring, arrival, depth, seed, first, min(CHUNK, trials - first), max_nodes)
             for first in range(0, trials, CHUNK)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, tasks))
    else:
        parts = [_run_chunk(t) for t in tasks]
    zero = [sum(p[0][m] for p in parts) for m in range(depth + 1)]
    sums = [sum(p[1][m] for p in parts) for m in range(depth + 1)]
    sums_sq = [sum(p[2][m] for p in parts) for m in range(depth + 1)]
    hist = [sum(p[3][m] for p in parts) for m in range(depth + 2)]
    return EstimateReport(trials, depth, offspring.mean, zero, sums, sums_sq, hist)


def parse_mc_arrival(spec: str):
    """Arrival spec for simulation: anything parse_arrival accepts, plus ``poisson:<alpha>``."""
    from .dist import parse_arrival
    from .numerics import parse_rational

    kind, _, body = spec.partition(":")
    if kind == "poisson":
        alpha = parse_rational(body)
        if alpha < 0:
            raise ValueError("poisson mean must be nonnegative")
        return PoissonArrival(alpha)
    return parse_arrival(spec)


def random_instance(rng: np.random.Generator, max_depth: int = 5, max_children: int = 3,
                    max_cars: int = 3) -> SampledTree:
    """Small random tree and car configuration for oracle comparisons.

    Offspring and car-count laws are themselves drawn at random so that
    sparse, bushy and heavily loaded instances all turn up.
    """
    depth = int(rng.integers(0, max_depth + 1))
    off = rng.dirichlet(np.ones(max_children + 1))
    cars = rng.dirichlet(np.ones(max_cars + 1))
    children: list[list[int]] = [[]]
    frontier = [0]
    for _ in range(depth):
        nxt = []
        for v in frontier:
            k = int(rng.choice(max_children + 1, p=off))
            kids = list(range(len(children), len(children) + k))
            children.extend([] for _ in kids)
            children[v] = kids
            nxt.extend(kids)
        frontier = nxt
    eta = rng.choice(max_cars + 1, size=len(children), p=cars)
    return SampledTree.from_children(children, eta)


@dataclass(frozen=True)
class OracleRow:
    instance: int
    tie_seed: int
    n: int
    counted: int
    simulated: int


def oracle_check(instances: int, max_depth: int = 5, tie_seeds: int = 3, seed: int = 0) -> list[OracleRow]:
    """eval_parking against simulate_stepwise on random instances, every n and tie-break seed."""
    rows = []
    for i in range(instances):
        tree = random_instance(trial_rng(seed, i), max_depth)
        counted = [eval_parking(tree, n) for n in range(tree.depth + 1)]
        for s in range(tie_seeds):
            times = root_arrival_times(tree, np.random.default_rng([seed, i, s]))
            for n in range(tree.depth + 1):
                rows.append(OracleRow(i, s, n, counted[n], sum(1 for t in times if t <= n)))
    return rows
