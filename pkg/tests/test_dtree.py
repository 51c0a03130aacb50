import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dists, pairs
from qclab.core import Dist, DistPair, LikelihoodRatio, Untrimmed, product, xor_fn
from qclab.dtree import (
    PAPER_TRUNCATION,
    DecisionTree,
    Dummy,
    Leaf,
    Query,
    TreeError,
    TruncationParams,
    dumps,
    function_tree,
    leaf_reach_dist,
    leaf_tree,
    loads,
    olr,
    otllr,
    pad,
    product_mass,
    random_tree,
    run,
    settled,
    settled_lr,
    split_blocks,
    tllr,
    tllr_lr,
)
from qclab.rng import SplitMix64

TOY = TruncationParams(Fraction(1), 5.0)


def ratio(p, q=1):
    return LikelihoodRatio(Fraction(p), Fraction(q))


def test_run_leaf_only():
    leaf, path = run(leaf_tree(1, 2, "accept"), ["01"])
    assert leaf.label == "accept" and path == []


def test_run_depth_one():
    t = DecisionTree(1, 2, Query(0, 0, (Leaf("a0"), Leaf("a1"))))
    assert run(t, ["01"])[0].label == "a0"
    assert len(run(t, ["01"])[1]) == 1


def test_run_xor2():
    t = function_tree(xor_fn(2))
    for x in ("00", "01", "10", "11"):
        assert run(t, [x])[0].label == ("accept" if xor_fn(2)(x) else "reject")


def test_run_rejects_bad_dimensions():
    with pytest.raises(TreeError):
        run(leaf_tree(2, 2), ["00"])


def test_leaf_reach_examples():
    assert leaf_reach_dist(leaf_tree(1, 1), [Dist.uniform(["0", "1"])]) == {(): 1}
    t = DecisionTree(1, 1, Query(0, 0, (Leaf(), Leaf())))
    assert leaf_reach_dist(t, [Dist.uniform(["0", "1"])]) == {(0,): Fraction(1, 2), (1,): Fraction(1, 2)}
    reach = leaf_reach_dist(function_tree(xor_fn(2)), [Dist.from_weights({"00": 1, "01": 1, "10": 1})])
    assert reach[(1, 1)] == 0
    assert sum(reach.values()) == 1


def test_requery_rejected():
    with pytest.raises(TreeError):
        DecisionTree(1, 2, Query(0, 0, (Query(0, 0, (Leaf(), Leaf())), Leaf())))


def test_olr_examples(dictator_pair):
    assert olr(dictator_pair, ("**", "**")) == 1
    assert (ratio(2) * ratio(3)) == 6
    assert olr(dictator_pair, ("1*", "*0")).is_infinite


def test_tllr_examples():
    assert tllr_lr(ratio(1), PAPER_TRUNCATION) == 0
    assert tllr_lr(ratio(1, 0), PAPER_TRUNCATION) == 500
    # e^-150 sits below e^-100: any rational under that bound will do
    tiny = ratio(1, 10 ** 66)
    assert tllr_lr(tiny, PAPER_TRUNCATION) == 500


def test_otllr_sum(dictator_pair):
    assert otllr(dictator_pair, ("**", "**", "**"), PAPER_TRUNCATION) == 0
    # tllr values (0, 500, 0): the dictator pair only has ratios 0, 1 and infinity
    assert otllr(dictator_pair, ("**", "1*", "*0"), PAPER_TRUNCATION) == 500


def test_settled_examples():
    assert not settled_lr(ratio(1), PAPER_TRUNCATION)
    assert settled_lr(ratio(1, 0), PAPER_TRUNCATION)
    assert settled_lr(ratio(3), TOY)
    assert not settled_lr(ratio(2), TOY)


def test_truncation_params_validation():
    with pytest.raises(ValueError):
        TruncationParams(Fraction(5), 5.0)
    with pytest.raises(ValueError):
        TruncationParams(Fraction(0), 5.0)


def test_pad_adds_dummies():
    t = pad(DecisionTree(1, 2, Query(0, 0, (Leaf(), Query(0, 1, (Leaf(), Leaf()))))), 3)
    assert {info.length for info in t.leaves()} == {3}
    assert t.query_depth() == 2
    assert isinstance(t.root, Query) and isinstance(t.root.children[0], Dummy)


trees = st.builds(lambda seed, k, n, d: random_tree(SplitMix64(seed), k, n, d, labels=("accept", "reject")),
                  st.integers(0, 2 ** 64 - 1), st.integers(1, 2), st.integers(1, 3), st.integers(0, 4))


@settings(max_examples=60)
@given(trees, st.data())
def test_leaf_reach_sums_to_one_and_matches_enumeration(t, data):
    ds = [data.draw(dists(n=t.n)) for _ in range(t.k)]
    reach = leaf_reach_dist(t, ds)
    assert sum(reach.values()) == 1
    brute = {a: Fraction(0) for a in reach}
    for xs in itertools.product(*(d.support for d in ds)):
        p = Fraction(1)
        for d, x in zip(ds, xs):
            p *= d.mass[x]
        leaf_addr = _address(t, xs)
        brute[leaf_addr] += p
    assert brute == reach


def _address(t, xs):
    node, addr = t.root, ()
    while not isinstance(node, Leaf):
        if isinstance(node, Dummy):
            node, addr = node.child, addr + (0,)
        else:
            idx = t.alphabet.symbols.index(xs[node.j][node.i])
            node, addr = node.children[idx], addr + (idx,)
    return addr


@settings(max_examples=60)
@given(pairs(n=2), st.sampled_from(["".join(c) for c in itertools.product("01*", repeat=2)]))
def test_settled_iff_sentinel(pair, cell):
    try:
        s = settled(pair, cell, TOY)
    except Untrimmed:
        return
    assert s == (tllr(pair, cell, TOY) == TOY.settled_value)


@settings(max_examples=60)
@given(pairs(n=2), st.data())
def test_olr_matches_concatenated_lr(pair, data):
    k = 2
    cells = tuple(data.draw(st.sampled_from(["**", "0*", "1*", "*0", "*1", "01", "10", "11", "00"])) for _ in range(k))
    joined = "".join(cells)
    m0 = product_mass([pair.d0] * k, cells)
    m1 = product_mass([pair.d1] * k, cells)
    if not (m0 or m1):
        return
    big = DistPair(product([pair.d0] * k), product([pair.d1] * k))
    try:
        r = olr(pair, cells)
    except Untrimmed:
        return
    assert r == LikelihoodRatio(m1, m0)
    assert LikelihoodRatio(m1, m0) == LikelihoodRatio(
        sum(p for x, p in big.d1.mass.items() if _in(x, joined)),
        sum(p for x, p in big.d0.mass.items() if _in(x, joined)))


def _in(x, cell):
    return all(c == "*" or c == s for s, c in zip(x, cell))


@settings(max_examples=40)
@given(trees)
def test_dumps_loads_roundtrip(t):
    assert loads(dumps(t)) == t


@settings(max_examples=40)
@given(st.integers(0, 2 ** 64 - 1), st.integers(1, 5))
def test_split_blocks_agrees_with_concatenation(seed, depth):
    t = random_tree(SplitMix64(seed), 1, 4, depth, labels=("accept", "reject"))
    s = split_blocks(t, 2)
    for x in itertools.product("01", repeat=4):
        x = "".join(x)
        assert run(t, [x])[0] == run(s, [x[:2], x[2:]])[0]


def test_freeze_drops_dummy_over_trimmed_branch():
    from qclab.dtree import Dummy, Query, freeze
    t = DecisionTree(2, 1, Query(0, 0, (Dummy(Query(1, 0, (Leaf("a"), None))), Leaf("b"))))
    out = freeze(t, {1: "1"}, {0: 0}, 1)
    assert out.root == Query(0, 0, (None, Leaf("b")))
    assert [i.leaf.label for i in out.leaves()] == ["b"]
