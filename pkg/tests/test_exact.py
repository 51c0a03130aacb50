import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dists
from qclab import exact
from qclab.core import BINARY, Dist, DistPair, PartialFunction, and_fn, constant_fn, dictator_fn, xor_fn
from qclab.lp import Infeasible, Unbounded, lp_solve, lp_vertex_enum

THIRD = Fraction(1, 3)
UNIFORM2 = Dist.uniform(["00", "01", "10", "11"])


def test_dt_exact_examples():
    assert exact.dt_exact(constant_fn(3, 1)) == 0
    assert exact.dt_exact(dictator_fn(2)) == 1
    assert exact.dt_exact(xor_fn(4)) == 4


def test_min_error_examples():
    assert exact.min_error(xor_fn(2), UNIFORM2, 0) == Fraction(1, 2)
    assert exact.min_error(xor_fn(2), UNIFORM2, 1) == Fraction(1, 2)
    assert exact.min_error(xor_fn(2), UNIFORM2, 2) == 0


def test_dt_eps_examples():
    assert exact.dt_eps(xor_fn(3), Dist.uniform(list(BINARY.strings(3))), Fraction(1, 2)) == 0
    assert exact.dt_eps(xor_fn(2), UNIFORM2, THIRD) == 2
    f, d = exact.shaltiel_dist_intro(5)
    assert exact.dt_eps(f, d, THIRD) >= 3


def test_corr_eps_examples(dictator_pair, xor2_pair):
    assert exact.corr_eps(dictator_pair.f, dictator_pair, THIRD) == (1, 1)
    assert exact.corr_eps(xor2_pair.f, xor2_pair, THIRD) == (2, 1)


def test_rdt_tiny_examples():
    assert exact.rdt_tiny(dictator_fn(2), THIRD).depth == 1
    assert exact.rdt_tiny(xor_fn(2), Fraction(2, 5)).depth == 2
    assert exact.rdt_tiny(xor_fn(3), THIRD).depth == 3


def test_rdt_tiny_beats_deterministic_on_and3():
    r = exact.rdt_tiny(and_fn(3), THIRD)
    assert r.depth == 2 and r.value == Fraction(3, 4)


def test_bs_fbs_examples():
    assert exact.bs(constant_fn(3, 0)) == 0 and exact.fbs(constant_fn(3, 0)).value == 0
    assert exact.bs(xor_fn(3)) == 3 and exact.fbs(xor_fn(3)).value == 3
    cert = exact.fbs(and_fn(3))
    assert exact.bs(and_fn(3)) == 3 and cert.value == 3 and cert.x == "111"
    assert cert.check(and_fn(3))


def test_fbs_exceeds_bs():
    # the standard fractional example: sensitive blocks {0,1},{1,2},{0,2} at x=000
    f = PartialFunction.from_callable(3, lambda x: int(x.count("1") == 2))
    cert = exact.fbs(f)
    assert exact.bs(f) <= cert.value
    assert cert.value == exact.fbs_vertex(f).value


def test_lp_examples():
    assert lp_solve([1], [[1]], [1]).value == 1
    with pytest.raises(Unbounded):
        lp_solve([1], [], [])
    with pytest.raises(Infeasible):
        lp_solve([1], [[1], [-1]], [-1, -2])
    assert exact.fbs_at(xor_fn(2), "00").value == 2


def test_shaltiel_masses():
    _, d = exact.shaltiel_dist_intro(3)
    assert d.mass["000"] == Fraction(99, 400)
    assert d.mass["110"] == Fraction(1, 200)
    assert sum(d.mass.values()) == 1
    with pytest.raises(ValueError):
        exact.shaltiel_dist_intro(2)


def test_shaltiel_corr_cost_independent_of_n():
    assert exact.shaltiel_corr_cost(5)[0] == exact.shaltiel_corr_cost(7)[0] == 42


def test_cap(monkeypatch):
    monkeypatch.setenv("QCLAB_CAP", "3")
    with pytest.raises(exact.CapExceeded):
        exact.dt_exact(xor_fn(4))


random_fns = st.builds(lambda bits: PartialFunction(3, {x: (bits >> i) & 1 for i, x in enumerate(BINARY.strings(3))}),
                       st.integers(0, 255))


@settings(max_examples=40)
@given(random_fns, dists(n=3))
def test_min_error_monotone_and_reaches_zero(f, d):
    errs = [exact.min_error(f, d, q) for q in range(4)]
    assert all(a >= b for a, b in zip(errs, errs[1:]))
    assert errs[exact.dt_exact(f)] == 0


@settings(max_examples=40)
@given(random_fns, dists(n=3))
def test_best_tree_achieves_min_error(f, d):
    for q in range(3):
        t = exact.best_tree(f, d, q)
        assert t.query_depth() <= q
        wrong = sum(p for x, p in d.mass.items()
                    if _output(t, x) != {1: "accept", 0: "reject"}[f(x)])
        assert wrong == exact.min_error(f, d, q)


def _output(t, x):
    from qclab.dtree import run
    return run(t, [x])[0].label


@settings(max_examples=30)
@given(st.integers(0, 255), st.integers(1, 20), st.integers(1, 20))
def test_corr_at_one_sample_matches_dt(bits, w0, w1):
    f = PartialFunction(2, {x: (bits >> i) & 1 for i, x in enumerate(BINARY.strings(2))})
    if f.is_total() and len(set(f.table.values())) < 2:
        return
    d = Dist.from_weights({x: (w0 if f(x) else w1) for x in BINARY.strings(2)})
    pair = DistPair.from_dist(f, d)
    for q in range(3):
        balanced = Dist.from_weights({**{x: p / 2 for x, p in pair.d0.mass.items()},
                                      **{x: p / 2 for x, p in pair.d1.mass.items()}})
        assert exact.corr_error(pair, 1, q) == exact.min_error(f, balanced, q)


def test_lp_solvers_agree_on_random_packings():
    for rows in itertools.product([0, 1], repeat=6):
        A = [list(rows[:3]), list(rows[3:])]
        if not any(rows[:3]) or not any(rows[3:]):
            continue
        a = lp_solve([1, 1, 1], [r for r in A] + [[1, 0, 0], [0, 1, 0], [0, 0, 1]], [1, 1, 5, 5, 5])
        b = lp_vertex_enum([1, 1, 1], [r for r in A] + [[1, 0, 0], [0, 1, 0], [0, 0, 1]], [1, 1, 5, 5, 5])
        assert a.value == b.value
