import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import pairs
from qclab.boosters import (
    BoosterParams,
    GuaranteeViolated,
    NoGap,
    NotABooster,
    TesterParams as Errors,
    accept_probabilities,
    amplify,
    booster_to_tester,
    check_likelihood_booster,
    check_overall_booster,
    check_uniform_booster,
    corr_to_overall,
    early_halt_mass,
    soundness_mass,
    tester_to_booster_params as to_booster,
    uniform_to_single,
)
from qclab.dtree import DecisionTree, Leaf, Query, leaf_tree, olr, product_mass, random_tree, relabel
from qclab.rng import SplitMix64


def first_bit_tree(k=1, label=None):
    """Read bit 0 of every sample in turn."""
    node = Leaf(label)
    for j in reversed(range(k)):
        node = Query(j, 0, (node, node))
    return DecisionTree(k, 2, node)


def dictator_tester(k=1):
    return relabel(first_bit_tree(k), lambda info: "accept" if info.cells[0][0] == "1" else "reject")


def test_likelihood_booster_examples(dictator_pair, xor2_pair):
    assert check_likelihood_booster(first_bit_tree(), dictator_pair, BoosterParams(0, 2))
    assert not check_likelihood_booster(leaf_tree(1, 2), xor2_pair, BoosterParams(Fraction(9, 10), 2))
    res = check_likelihood_booster(first_bit_tree(), xor2_pair, BoosterParams(0, 2))
    assert res.good_mass == 0 and not res


def test_overall_booster_examples(dictator_pair, xor2_pair):
    assert check_overall_booster(first_bit_tree(2), dictator_pair, 2, BoosterParams(0, 2))
    assert not check_overall_booster(leaf_tree(2, 2), xor2_pair, 2, BoosterParams(Fraction(9, 10), 2))
    assert check_overall_booster(first_bit_tree(2), xor2_pair, 2, BoosterParams(0, 2)).good_mass == 0


def test_uniform_booster_examples(dictator_pair):
    for t in (first_bit_tree(), leaf_tree(1, 2)):
        p = BoosterParams(Fraction(1, 4), 2, Fraction(1, 2))
        assert bool(check_uniform_booster(t, dictator_pair, 1, p)) == bool(check_likelihood_booster(t, dictator_pair, p))
    only_first = DecisionTree(2, 2, Query(0, 0, (Leaf(), Leaf())))
    assert not check_uniform_booster(only_first, dictator_pair, 2, BoosterParams(Fraction(1, 2), 2, 0))
    assert check_uniform_booster(first_bit_tree(2), dictator_pair, 2, BoosterParams(0, 2, 0))


def test_booster_to_tester_examples(dictator_pair, xor2_pair):
    tester = booster_to_tester(first_bit_tree(), dictator_pair, BoosterParams(0, 2))
    assert accept_probabilities(tester, dictator_pair) == (0, 1)
    loose = booster_to_tester(leaf_tree(1, 2), xor2_pair, BoosterParams(0, Fraction(1, 2)))
    assert accept_probabilities(loose, xor2_pair) == (1, 1)
    assert soundness_mass(leaf_tree(1, 2), xor2_pair, Fraction(1, 2)) * Fraction(1, 2) <= 1


def test_booster_to_tester_requires_booster(xor2_pair):
    with pytest.raises(NotABooster):
        booster_to_tester(first_bit_tree(), xor2_pair, BoosterParams(0, 2))


def test_tester_to_booster_examples(dictator_pair):
    t = dictator_tester()
    assert to_booster(t, dictator_pair, Errors(0, 0), 7) == BoosterParams(0, 7)
    p = to_booster(t, dictator_pair, Errors(Fraction(1, 100), Fraction(1, 10)), 5)
    assert p.delta == Fraction(3, 20)
    p = corr_to_overall(dictator_tester(2), dictator_pair, 2, Errors(Fraction(1, 500), Fraction(1, 500)), 25)
    assert p.delta == Fraction(13, 250) and p.delta <= Fraction(1, 10)


def test_tester_to_booster_checks_errors(xor2_pair):
    t = DecisionTree(1, 2, Query(0, 0, (Leaf("reject"), Leaf("accept"))))
    with pytest.raises(GuaranteeViolated):
        to_booster(t, xor2_pair, Errors(Fraction(1, 10), Fraction(1, 10)), 2)


def test_round_trip_on_perfect_booster(dictator_pair):
    b = BoosterParams(0, 4)
    tester = booster_to_tester(first_bit_tree(), dictator_pair, b)
    a0, a1 = accept_probabilities(tester, dictator_pair)
    assert to_booster(tester, dictator_pair, Errors(a0, 1 - a1), 4) == b


def test_uniform_to_single_boundary(dictator_pair):
    single = uniform_to_single(first_bit_tree(), dictator_pair, 1, BoosterParams(0, 2, 0), 1)
    assert single.depth_bound == 1 and single.params.delta == 1 and single.certified


def test_uniform_to_single_dictator(dictator_pair):
    t = first_bit_tree(2)
    single = uniform_to_single(t, dictator_pair, 2, BoosterParams(0, 2, 0), 2)
    assert single.tree.k == 1
    assert single.tree.query_depth() <= math.floor(2 * t.query_depth() / 2)
    assert single.early_halt_mass * 2 <= 1
    assert check_likelihood_booster(single.tree, dictator_pair, single.params)
    assert single.candidates == 2 * 2  # slot choice x D1 support


def test_early_halt_markov(dictator_pair):
    t = first_bit_tree(3)
    # each sample is queried once, so halting past zero queries happens always
    assert early_halt_mass(t, dictator_pair, 0) == 1
    assert early_halt_mass(t, dictator_pair, 1) == 0


def test_amplify_examples():
    a = amplify(0, 1, Fraction(1, 2), Fraction(1, 3))
    assert (a.runs, a.error0, a.error1) == (1, 0, 0)
    with pytest.raises(NoGap):
        amplify(Fraction(1, 2), Fraction(1, 2), 0, Fraction(1, 3))
    a = amplify(Fraction(2, 5), Fraction(3, 5), Fraction(1, 10), Fraction(1, 3))
    assert a.runs == 5 and a.error0 == a.error1 == Fraction(992, 3125)


def binomial_errors(m, p0, p1):
    """Independent oracle: direct binomial sums with math.comb."""
    cut = Fraction(m) * (p0 + p1) / 2

    def tail(p, accept):
        return sum(Fraction(math.comb(m, i)) * p ** i * (1 - p) ** (m - i) for i in range(m + 1) if accept(i))

    if p1 > p0:
        return tail(p0, lambda i: i > cut), 1 - tail(p1, lambda i: i > cut)
    return tail(p0, lambda i: i <= cut), 1 - tail(p1, lambda i: i <= cut)


@settings(max_examples=25, deadline=None)
@given(st.fractions(0, 1, max_denominator=12), st.fractions(0, 1, max_denominator=12))
def test_amplify_minimal(p0, p1):
    if abs(p1 - p0) < Fraction(1, 6):
        return
    a = amplify(p0, p1, abs(p1 - p0) / 2, Fraction(1, 3))
    assert (a.error0, a.error1) == binomial_errors(a.runs, p0, p1)
    assert max(a.error0, a.error1) <= Fraction(1, 3)
    for m in range(1, a.runs):
        assert max(binomial_errors(m, p0, p1)) > Fraction(1, 3)


def test_amplify_monotone_shape():
    runs = [amplify(Fraction(1, 2) - g, Fraction(1, 2) + g, g, Fraction(1, 3)).runs
            for g in (Fraction(1, 40), Fraction(1, 20), Fraction(1, 10), Fraction(1, 5))]
    assert runs == sorted(runs, reverse=True)
    runs = [amplify(Fraction(2, 5), Fraction(3, 5), Fraction(1, 10), e).runs
            for e in (Fraction(1, 3), Fraction(1, 10), Fraction(1, 100))]
    assert runs == sorted(runs)


def test_amplify_large_case():
    a = amplify(Fraction(99, 200), Fraction(101, 200), Fraction(1, 200), Fraction(1, 3))
    assert a.runs == 1855


@settings(max_examples=80)
@given(pairs(n=2), st.integers(0, 2 ** 64 - 1), st.integers(1, 2),
       st.fractions(Fraction(1, 4), 8, max_denominator=4))
def test_soundness_bound(pair, seed, k, M):
    t = random_tree(SplitMix64(seed), k, 2, 4)
    u0 = soundness_mass(t, pair, M)
    u1 = sum((product_mass([pair.d1] * k, info.cells) for info in t.leaves()
              if product_mass([pair.d1] * k, info.cells) and olr(pair, info.cells).ge(M)), Fraction(0))
    assert u0 * M <= u1 <= 1
