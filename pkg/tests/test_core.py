import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dists, pairs
from qclab.core import (
    BINARY,
    Dist,
    DistPair,
    ExpThreshold,
    LikelihoodRatio,
    ParseError,
    Untrimmed,
    ZeroMass,
    cell_mass,
    cmp_exp,
    conditional,
    format_dist,
    format_function,
    format_pair,
    intersect,
    lr,
    parse_dist,
    parse_function,
    parse_pair,
    xor_fn,
)

UNIFORM2 = Dist.uniform(["00", "01", "10", "11"])


def cells(n):
    return ["".join(c) for c in itertools.product("01*", repeat=n)]


def test_cell_mass_examples():
    assert cell_mass(UNIFORM2, "**") == 1
    assert cell_mass(UNIFORM2, "0*") == Fraction(1, 2)
    assert cell_mass(Dist.from_weights({"00": 1, "01": 2}), "*1") == Fraction(2, 3)


def test_conditional_examples():
    assert conditional(UNIFORM2, "0*") == Dist.uniform(["00", "01"])
    d = Dist(2, {"00": Fraction(1, 4), "01": Fraction(3, 4)})
    assert conditional(d, "**") == d
    d = Dist.from_weights({"00": 1, "01": 1, "11": 1})
    assert conditional(d, "0*").mass == {"00": Fraction(1, 2), "01": Fraction(1, 2)}


def test_conditional_zero_mass():
    with pytest.raises(ZeroMass):
        conditional(Dist.uniform(["00"]), "1*")


def test_lr_examples(dictator_pair):
    assert lr(dictator_pair, "**") == 1
    assert lr(dictator_pair, "1*").is_infinite
    assert lr(dictator_pair, "*0") == 1
    assert lr(dictator_pair, "0*").is_zero


def test_lr_untrimmed():
    pair = DistPair(Dist.uniform(["00"]), Dist.uniform(["01"]))
    with pytest.raises(Untrimmed):
        lr(pair, "1*")


def test_zero_times_infinity_is_untrimmed():
    with pytest.raises(Untrimmed):
        LikelihoodRatio(Fraction(0), Fraction(1)) * LikelihoodRatio(Fraction(1), Fraction(0))


def test_pair_rejects_mass_on_wrong_side():
    with pytest.raises(ValueError):
        DistPair(Dist.uniform(["01"]), Dist.uniform(["11"]), xor_fn(2))


def test_cmp_exp_exact():
    assert cmp_exp(Fraction(3), 1) == 1
    assert cmp_exp(Fraction(2718281828, 10 ** 9), 1) == -1
    assert cmp_exp(Fraction(2718281829, 10 ** 9), 1) == 1
    assert cmp_exp(Fraction(1, 3), -1) == -1
    assert cmp_exp(Fraction(1), 0) == 0


def test_exp_threshold_comparisons():
    r = LikelihoodRatio(Fraction(3), Fraction(1))
    assert r.ge(ExpThreshold(1))
    assert not r.ge(ExpThreshold(Fraction(11, 10)))
    assert r.ge(3) and r.le(3) and not r.ge(math.inf)


def test_parse_function_errors():
    with pytest.raises(ParseError, match=r"f\.txt:3"):
        parse_function("00 1\n01 0\n0x 1\n", "f.txt")
    with pytest.raises(ParseError, match=r"f\.txt:2: duplicate"):
        parse_function("00 1\n00 0\n", "f.txt")


def test_parse_dist_errors():
    with pytest.raises(ParseError, match="sum"):
        parse_dist("00 1/2\n01 1/3\n", "d.txt")
    with pytest.raises(ParseError, match=r"d\.txt:2: duplicate"):
        parse_dist("00 1/2\n00 1/2\n", "d.txt")


def test_function_roundtrip():
    f = parse_function("00 0\n01 1\n10 *\n11 0\n")
    assert f("01") == 1 and f("10") is None
    assert parse_function(format_function(f)) == f


def test_pair_roundtrip(xor2_pair):
    assert parse_pair(format_pair(xor2_pair), f=xor2_pair.f) == xor2_pair


def test_pair_side_must_sum_to_one():
    with pytest.raises(ParseError):
        parse_pair("0 00 1/2\n1 11 1/1\n", "p.txt")


@given(dists())
def test_dist_roundtrip(d):
    assert parse_dist(format_dist(d)) == d


@given(dists(n=3), st.integers(0, 2))
def test_coordinate_partition_sums_to_one(d, i):
    parts = []
    for s in "01":
        c = ["*"] * 3
        c[i] = s
        parts.append(cell_mass(d, "".join(c)))
    assert sum(parts) == 1


@given(dists(n=3), st.sampled_from(cells(3)), st.sampled_from(cells(3)))
def test_conditional_composes(d, c1, c2):
    both = intersect(c1, c2)
    if both is None or cell_mass(d, both) == 0:
        return
    assert conditional(conditional(d, c1), c2) == conditional(d, both)


@settings(max_examples=60)
@given(pairs(n=3), st.sampled_from(cells(3)), st.integers(0, 2), st.sampled_from("01"))
def test_lr_multiplicative_under_extension(pair, cell, i, sym):
    """lr(child) = lr(parent) * p1(sym) / p0(sym), with p_b the conditional symbol probability."""
    if cell[i] != "*":
        return
    child = cell[:i] + sym + cell[i + 1:]
    m0, m1 = cell_mass(pair.d0, cell), cell_mass(pair.d1, cell)
    c0, c1 = cell_mass(pair.d0, child), cell_mass(pair.d1, child)
    if not (m0 and m1 and c0 and c1):
        return
    p0, p1 = c0 / m0, c1 / m1
    assert lr(pair, child).value == lr(pair, cell).value * p1 / p0


@given(st.fractions(min_value=Fraction(1, 1000), max_value=1000), st.fractions(-5, 5))
def test_cmp_exp_matches_log(r, tau):
    got = cmp_exp(r, tau)
    diff = math.log(r) - float(tau)
    if abs(diff) > 1e-9:
        assert got == (1 if diff > 0 else -1)


def test_alphabet_strings():
    assert list(BINARY.strings(2)) == ["00", "01", "10", "11"]
