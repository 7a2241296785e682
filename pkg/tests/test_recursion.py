from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from treepark.dist import bernoulli2, family_law, mean, no_cars, pmf_law, threes
from treepark.numerics import exact_value
from treepark.recursion import (
    ModelConfig,
    big_c,
    big_c_star,
    big_f,
    closed_form_mean,
    expected_xn,
    g_from_tau,
    iterate,
    partial_g,
    q_sequence,
    resolve_constant,
    run,
    tau_transform,
    limit_check,
    limit_residual,
)

F = Fraction


def exact_cfg(arrival, depth, d=2, full=False):
    return ModelConfig(d, arrival, depth, scale=None, full_law=full)


def fr(x):
    return Fraction(exact_value(x))


def test_first_two_levels_in_closed_form():
    alpha = F("0.1")
    p = alpha / 2
    qs = [fr(q) for q in q_sequence(exact_cfg(bernoulli2(alpha), 2))]
    assert qs[0] == 1 - p
    assert qs[1] == (1 - p) ** 3
    assert qs[2] == (1 - p) ** 3 * ((1 - p) ** 2 + 2 * p * (1 - p)) ** 2
    assert qs[2] == F(95, 100) ** 3 * (F(95, 100) ** 2 + 2 * F(5, 100) * F(95, 100)) ** 2


def test_children_sum_recursion():
    # r_{n,j} = P(X_n - eta = j) obeys r_{n+1,0} = (1-p)^2 (r_{n,0} + r_{n,1})^2
    alpha = F(3, 50)
    p = alpha / 2
    states = list(iterate(exact_cfg(bernoulli2(alpha), 6, full=True)))
    r = [(fr(s.law.weight(0)) / (1 - p), fr(s.law.weight(1)) / (1 - p)) for s in states]
    assert states[1].law.weight(0) == (1 - p) ** 3
    assert r[1][1] == 2 * p * (1 - p)
    for n in range(1, 6):
        assert r[n + 1][0] == (1 - p) ** 2 * (r[n][0] + r[n][1]) ** 2


@pytest.mark.parametrize("d,arrival", [(2, bernoulli2(F("0.09"))), (3, threes(F("0.02"))),
                                       (2, pmf_law({0: F(1, 2), 1: F(1, 4), 3: F(1, 4)}))])
def test_root_empty_iff_children_deliver_at_most_one(d, arrival):
    states = list(iterate(exact_cfg(arrival, 5, d, full=True)))
    p0 = arrival.prob(0)
    for a, b in zip(states, states[1:]):
        assert fr(b.q) == p0 * fr(a.law.cdf(1)) ** d


def test_no_cars():
    for scale in (None, 50):
        cfg = ModelConfig(2, no_cars(), 30, scale=scale)
        assert all(q == 1 for q in q_sequence(cfg))
    zero = family_law("two", 0)
    for state in iterate(ModelConfig(2, zero, 8, scale=None, full_law=True)):
        assert state.law.to_rationals() == {0: 1}
        assert state.exn == 0


def test_q0_at_the_certified_alpha():
    cfg = ModelConfig(2, bernoulli2("0.08698"), 0)
    assert fr(run(cfg).q) == F("0.95651")


@given(st.integers(1, 6), st.integers(2, 3),
       st.dictionaries(st.integers(0, 4), st.integers(1, 9), min_size=1, max_size=4))
def test_engine_matches_oracle(depth, d, weights):
    total = sum(weights.values())
    probs = {k: F(v, total) for k, v in weights.items()}
    law = pmf_law(probs)
    expected = oracles.q_sequence(d, probs, depth)
    got = [fr(q) for q in q_sequence(exact_cfg(law, depth, d))]
    assert got == expected


def test_full_laws_match_oracle():
    probs = oracles.bernoulli2(F(1, 10))
    ref = oracles.full_laws(2, probs, 3)
    for state, law in zip(iterate(exact_cfg(bernoulli2(F(1, 10)), 3, full=True)), ref):
        assert {k: F(v) for k, v in state.law.to_rationals().items()} == law


def test_window_and_full_law_agree():
    arrival = bernoulli2(F("0.0863"))
    windowed = q_sequence(exact_cfg(arrival, 9))
    full = [s.q for s in iterate(exact_cfg(arrival, 9, full=True))]
    assert windowed == full


@given(st.integers(0, 200).map(lambda k: F(k, 1000)), st.integers(20, 60))
def test_fixed_scale_is_a_lower_bound(alpha, scale):
    exact = q_sequence(exact_cfg(bernoulli2(alpha), 7))
    fixed = q_sequence(ModelConfig(2, bernoulli2(alpha), 7, scale=scale))
    for e, f in zip(exact, fixed):
        assert fr(f) <= fr(e)
        assert fr(e) - fr(f) < F(10, 10**scale) * 100


def test_q_is_monotone_in_alpha_and_n():
    prev = None
    for k in range(0, 21):
        qs = q_sequence(exact_cfg(bernoulli2(F(k, 100)), 8))
        assert all(a >= b for a, b in zip(qs, qs[1:]))
        if prev is not None:
            assert all(a >= b for a, b in zip(prev, qs))
        prev = qs


def test_constants():
    assert big_f(0, 2) == 2
    assert big_f(F("0.08698"), 2) == F("1.82604")
    assert big_c(F(1, 2), 2) == F(1, 2)
    assert big_c_star(F(1, 2), 2) == F(3, 2)
    with pytest.raises(ValueError):
        big_f(0, 1)


def test_expectation_examples():
    alpha = F(7, 100)
    states = list(iterate(exact_cfg(bernoulli2(alpha), 1, full=True)))
    assert states[0].exn == alpha
    assert states[1].exn == 2 * alpha
    assert mean(states[1].law) == 2 * alpha


@pytest.mark.parametrize("alpha", [F("0.02"), F("0.3")])
def test_mean_recursion_law_mean_and_closed_form_agree(alpha):
    cfg = exact_cfg(bernoulli2(alpha), 7, full=True)
    for state in iterate(cfg):
        chk = expected_xn(state, cfg)
        assert chk.recursion == chk.law_mean
        if state.n >= 1:
            assert chk.closed_form == chk.recursion


def test_constant_resolution_picks_the_rederived_constant():
    res = resolve_constant(bernoulli2(F("0.05")), 2)
    assert res.name == "rederived"
    qs = q_sequence(exact_cfg(bernoulli2(F("0.05")), 1))
    assert closed_form_mean(qs, F("0.05"), 2, 1, constant=big_c) != F("0.1")


def test_tau_transform_examples():
    assert tau_transform([1] * 6, 2)[0] == 0
    p = F(1, 10)
    total, rest = tau_transform([1 - p] * 5, 2)
    assert total == p
    assert rest == (1 - p) / 2**5


def test_growth_identity_exact():
    qs = q_sequence(exact_cfg(bernoulli2(F("0.12")), 10))
    assert g_from_tau(qs, 2) == partial_g(qs, 2)


def test_limit_identity_fixed_scale():
    assert limit_residual(0, 1, 0, 2) == 0
    cfg = ModelConfig(2, bernoulli2("0.05"), 60)
    assert limit_check(cfg) < F(1, 10**4)


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(2, bernoulli2("0.1"), 20, scale=None, full_law=True)
    with pytest.raises(ValueError):
        ModelConfig(2, bernoulli2("0.1"), -1)
    with pytest.raises(ValueError):
        ModelConfig(0, bernoulli2("0.1"), 3)
