import numpy as np
import pytest

from treepark.dist import bernoulli2, no_cars
from treepark.montecarlo import (
    OffspringLaw,
    PoissonArrival,
    ResourceGuardError,
    SampledTree,
    _xs_regular_batch,
    estimate,
    eval_parking,
    oracle_check,
    parse_mc_arrival,
    parse_offspring,
    random_instance,
    root_arrival_times,
    sample_tree,
    simulate_stepwise,
)


def path(etas):
    """root - v1 - v2 - ... with the given car counts."""
    children = [[i + 1] for i in range(len(etas) - 1)] + [[]]
    return SampledTree.from_children(children, etas)


def test_sampling_shapes():
    t = sample_tree(OffspringLaw.deterministic(2), 3, seed=1)
    assert t.size == 15
    assert list(t.level_start) == [0, 1, 3, 7, 15]
    assert sample_tree(OffspringLaw.poisson(0), 5, seed=1).size == 1
    a = sample_tree(OffspringLaw.poisson("1.5"), 8, seed=7)
    b = sample_tree(OffspringLaw.poisson("1.5"), 8, seed=7)
    assert a.size == b.size
    assert np.array_equal(a.parent, b.parent)


def test_level_order_invariants():
    t = sample_tree(OffspringLaw.poisson(2), 6, seed=3, arrival=bernoulli2("0.3"))
    depth = t.node_depth()
    assert (depth[1:] == depth[t.parent[1:]] + 1).all()
    for v in range(t.size):
        kids = np.arange(t.child_start[v], t.child_start[v] + t.child_count[v])
        assert (t.parent[kids] == v).all() if len(kids) else True


def test_eval_examples():
    t = sample_tree(OffspringLaw.deterministic(2), 4, seed=0)
    assert all(eval_parking(t, n) == 0 for n in range(5))
    t = SampledTree.from_children([[1, 2], [], []], [2, 0, 0])
    assert eval_parking(t, 0) == eval_parking(t, 1) == 2
    star = SampledTree.from_children([[1, 2], [], []], [0, 2, 2])
    assert eval_parking(star, 1) == 2
    with pytest.raises(ValueError):
        eval_parking(star, 2)


def test_stepwise_examples():
    assert simulate_stepwise(path([1]), 0) == 1
    # two cars at the far end of a two-edge path park at the leaf and the middle vertex
    assert root_arrival_times(path([0, 0, 2])) == []
    # with three, one reaches the root, taking two steps
    t = path([0, 0, 3])
    assert root_arrival_times(t) == [2]
    assert [eval_parking(t, n) for n in range(3)] == [0, 0, 1]


def test_oracle_equivalence_small_batch():
    rows = oracle_check(60, max_depth=5, tie_seeds=3, seed=11)
    assert rows
    assert all(r.counted == r.simulated for r in rows)


def test_random_instances_respect_limits():
    rng = np.random.default_rng(5)
    for _ in range(50):
        t = random_instance(rng, 4)
        assert t.depth <= 4
        assert t.child_count.max(initial=0) <= 3
        assert t.eta.max() <= 3


def test_regular_batch_matches_generic_evaluation():
    rng = np.random.default_rng(2)
    d, depth = 3, 4
    nodes = sum(d**k for k in range(depth + 1))
    eta = rng.integers(0, 3, size=(5, nodes))
    children, nxt = [], 1
    for v in range(nodes):
        if v < (nodes - d**depth):
            children.append(list(range(nxt, nxt + d)))
            nxt += d
        else:
            children.append([])
    fast = _xs_regular_batch(d, depth, eta)
    for row, e in zip(fast, eta):
        t = SampledTree.from_children(children, e)
        assert list(row) == [eval_parking(t, n) for n in range(depth + 1)]


def test_no_cars_estimate():
    rep = estimate(OffspringLaw.deterministic(2), no_cars(), 5, 300, seed=1)
    assert all(rep.q_hat(n) == 1.0 for n in range(6))
    assert all(rep.ex_hat(n) == 0.0 for n in range(6))


def test_pathwise_monotone_estimates():
    rep = estimate(OffspringLaw.poisson(2), bernoulli2("0.05"), 10, 2000, seed=4)
    qs = [rep.q_hat(n) for n in range(11)]
    assert all(a >= b for a, b in zip(qs, qs[1:]))
    assert all(rep.tau_survival(n) == pytest.approx(rep.q_hat(n)) for n in range(11))


def test_worker_count_does_not_change_results():
    args = (OffspringLaw.deterministic(2), bernoulli2("0.05"), 6, 2500)
    one = estimate(*args, seed=9, workers=1)
    two = estimate(*args, seed=9, workers=2)
    assert one.rows() == two.rows()
    assert one.tau_hist == two.tau_hist


def test_poisson_arrivals_and_parsing():
    arr = parse_mc_arrival("poisson:0.5")
    assert isinstance(arr, PoissonArrival)
    rep = estimate(OffspringLaw.deterministic(2), arr, 3, 500, seed=2)
    assert 0 < rep.q_hat(0) < 1
    assert parse_offspring("3") == OffspringLaw.deterministic(3)
    assert parse_offspring("pmf:0:0.5,2:0.5").mean == 1.0
    with pytest.raises(ValueError):
        parse_offspring("geom:2")


def test_resource_guard():
    with pytest.raises(ResourceGuardError):
        sample_tree(OffspringLaw.deterministic(4), 20, seed=0, max_nodes=10**5)
    with pytest.raises(ResourceGuardError):
        estimate(OffspringLaw.deterministic(4), bernoulli2("0.1"), 20, 10, max_nodes=10**5)
