"""Composition: from a tree for f o g to a bicorrelated tester for g.

Composed inputs are the concatenation x^0 x^1 ... x^{n-1} of n inner blocks
of length m; outer coordinate i owns positions i*m .. i*m + m - 1. Outer
blocks (sets of outer coordinates) come from a fractional block sensitivity
certificate of f.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .boosters import AmplifiedTester, GuaranteeViolated, amplify
from .core import Dist, DistPair, PartialFunction, full_cell, product
from .dtree import DecisionTree, freeze, product_mass, relabel, split_blocks, truncate_queries
from .exact import FbsCertificate, _SingleDP, fbs
from .reductions import BicorrInstance, MixtureTester


def composed_function(f: PartialFunction, g: PartialFunction) -> PartialFunction:
    """(f o g)(x^0..x^{n-1}) = f(g(x^0), ..., g(x^{n-1})); undefined if any piece is."""
    if f.alphabet.size != 2:
        raise ValueError("outer function must be over the binary alphabet")
    n, m = f.n, g.n
    table = {}
    for blocks in itertools.product(list(g.alphabet.strings(m)), repeat=n):
        inner = [g(b) for b in blocks]
        if None in inner:
            continue
        v = f("".join(map(str, inner)))
        if v is not None:
            table["".join(blocks)] = v
    return PartialFunction(n * m, table, g.alphabet)


def flip(z: str, block) -> str:
    return "".join(str(1 - int(c)) if i in block else c for i, c in enumerate(z))


def product_dist_for_z(pair: DistPair, z: str) -> Dist:
    """D_z: block i drawn independently from D_{z_i}; asserts g(x^i) = z_i on the support."""
    d = product([pair.dist(int(b)) for b in z])
    if pair.f is not None:
        m = pair.n
        for x in d.support:
            if any(pair.f(x[i * m:(i + 1) * m]) != int(b) for i, b in enumerate(z)):
                raise GuaranteeViolated(f"support point {x} has g^n(x) != {z}", "product")
    return d


def _in_block(m: int, block):
    return lambda j, pos: pos // m in block


def block_query_counts(info, m: int, block) -> int:
    return sum(1 for _, pos in info.queries if pos // m in block)


def expected_block_queries(t: DecisionTree, y: str, blocks: Sequence, pair: DistPair) -> list[Fraction]:
    """q_j = E_{x ~ D_y}[number of queries t makes inside outer block j]."""
    d = product_dist_for_z(pair, y)
    m = pair.n
    out = [Fraction(0)] * len(blocks)
    for info in t.leaves():
        p = product_mass([d], info.cells)
        if p:
            for idx, b in enumerate(blocks):
                out[idx] += p * block_query_counts(info, m, b)
    return out


def expected_queries(t: DecisionTree, d: Dist) -> Fraction:
    return sum((product_mass([d], info.cells) * len(info.queries) for info in t.leaves()), Fraction(0))


# --- the rarely queried block --------------------------------------------------

@dataclass(frozen=True)
class BlockReport:
    y: str
    f_y: int
    certificate: FbsCertificate
    q_blocks: tuple  # exact expected queries per certificate block under D_y
    q_expected: Fraction  # expected total queries under D_y
    q: int  # worst-case query depth of the tree
    weighted_sum: Fraction  # sum_j w_j q_j
    selected: int
    block: frozenset

    @property
    def bound(self) -> Fraction:
        return self.q / self.certificate.value


def find_rare_block(t: DecisionTree, f: PartialFunction, pair: DistPair,
                    cert: FbsCertificate | None = None) -> BlockReport:
    cert = fbs(f) if cert is None else cert
    if cert.value == 0:
        raise GuaranteeViolated("f has no sensitive block", "blocks")
    y = cert.x
    blocks = [frozenset(b) for b in cert.blocks]
    qs = expected_block_queries(t, y, blocks, pair)
    total = expected_queries(t, product_dist_for_z(pair, y))
    weighted = sum((w * q for w, q in zip(cert.weights, qs)), Fraction(0))
    q = t.query_depth()
    if not weighted <= total <= q:
        raise GuaranteeViolated(f"sum w_j q_j = {weighted}, E[queries] = {total}, depth {q}", "blocks")
    live = [j for j, w in enumerate(cert.weights) if w > 0]
    sel = min(live, key=lambda j: (qs[j], j))
    if qs[sel] * cert.value > q:
        raise GuaranteeViolated(f"q_{sel} = {qs[sel]} > q / fbs = {Fraction(q) / cert.value}", "blocks")
    return BlockReport(y, f(y), cert, tuple(qs), total, q, weighted, sel, blocks[sel])


# --- truncation -------------------------------------------------------------------

def truncate_tree(t: DecisionTree, block, m: int, limit: int, halt_label: str = "accept") -> DecisionTree:
    """Halt with ``halt_label`` at the (limit+1)-th query inside ``block``."""
    return truncate_queries(t, _in_block(m, block), limit, halt_label)


@dataclass(frozen=True)
class TruncationReport:
    q_block: Fraction
    factor: int
    limit: int
    err_y: Fraction  # Pr_{D_y}[t wrong]
    err_flip: Fraction  # Pr_{D_{y^B}}[t wrong]
    correct_flip: Fraction  # Pr_{D_{y^B}}[T^tr correct]
    correct_y: Fraction  # Pr_{D_y}[T^tr correct]
    markov_mass: Fraction  # Pr_{D_y}[more than factor * q_block queries inside B]
    ok: bool


def _correct(t: DecisionTree, d: Dist, value: int) -> Fraction:
    want = "accept" if value else "reject"
    return sum((product_mass([d], info.cells) for info in t.leaves() if info.leaf.label == want), Fraction(0))


def verify_truncation_bounds(t: DecisionTree, ttr: DecisionTree, y: str, block, pair: DistPair,
                             f_y: int, q_block: Fraction, factor: int = 5,
                             outer_error=Fraction(1, 10)) -> TruncationReport:
    m = pair.n
    yb = flip(y, block)
    dy, dyb = product_dist_for_z(pair, y), product_dist_for_z(pair, yb)
    err_y = 1 - _correct(t, dy, f_y)
    err_flip = 1 - _correct(t, dyb, 1 - f_y)
    if err_y > outer_error or err_flip > outer_error:
        raise GuaranteeViolated(f"outer tree errors ({err_y}, {err_flip}) exceed {outer_error}", "truncation")
    threshold = factor * q_block
    markov = sum((product_mass([dy], info.cells) for info in t.leaves()
                  if block_query_counts(info, m, block) > threshold), Fraction(0))
    c_flip = _correct(ttr, dyb, 1 - f_y)
    c_y = _correct(ttr, dy, f_y)
    ok = (markov * factor <= 1
          and c_flip >= 1 - err_flip
          and c_flip >= Fraction(4, 5)
          and c_y >= Fraction(3, 5))
    return TruncationReport(Fraction(q_block), factor, math.floor(threshold), err_y, err_flip,
                            c_flip, c_y, markov, ok)


# --- the bicorrelated tester T' ------------------------------------------------------

@dataclass(frozen=True)
class ComposedBicorr:
    mixture: MixtureTester
    k: int  # pairs = |B|
    error_01: Fraction  # Pr["10" | D01^k], i.e. wrong on the D_y side
    error_10: Fraction
    error: Fraction
    limit: int
    max_block_queries: int
    amplified: AmplifiedTester | None
    cost: int


def composed_to_bicorr(ttr: DecisionTree, y: str, block, pair: DistPair, f_y: int, limit: int,
                       eps_target=Fraction(1, 3)) -> ComposedBicorr:
    """Copy the bicorrelated input into the blocks of B, fill the others from D_{y_i}.

    Pair p (the p-th coordinate of B in increasing order) feeds coordinate i
    from slot 2p + y_i, so "01" yields x ~ D_y and "10" yields x ~ D_{y^B}.
    T' accepts ("10") exactly when T^tr outputs 1 - f(y).
    """
    n = len(y)
    coords = sorted(block)
    k = len(coords)
    slot = {i: 2 * p + int(y[i]) for p, i in enumerate(coords)}
    split = split_blocks(ttr, n)
    want = "accept" if f_y == 0 else "reject"
    others = [i for i in range(n) if i not in block]
    inst = BicorrInstance(pair, k)
    parts = []
    for gen in itertools.product(*(sorted(pair.dist(int(y[i])).support) for i in others)):
        w = Fraction(1)
        for i, x in zip(others, gen):
            w *= pair.dist(int(y[i]))(x)
        tree = freeze(split, dict(zip(others, gen)), {}, 2 * k,
                      position_map=lambda j, pos: (slot[j], pos))
        tree = relabel(tree, lambda info: "accept" if info.leaf.label == want else "reject")
        parts.append((w, tree))
    mix = MixtureTester(tuple(parts))
    e01 = mix.accept_mass(inst.dists(0, 1))
    e10 = 1 - mix.accept_mass(inst.dists(1, 0))
    err = (e01 + e10) / 2
    if e01 > Fraction(2, 5) or e10 > Fraction(1, 5):
        raise GuaranteeViolated(f"T' errors ({e01}, {e10}) exceed (2/5, 1/5)", "bicorr")
    most = max(max((len(info.queries) for info in t.leaves()), default=0) for _, t in parts)
    if most > limit:
        raise GuaranteeViolated(f"T' makes {most} queries > limit {limit}", "bicorr")
    amp = None
    cost = most
    if max(e01, e10) > eps_target:
        a0, a1 = e01, 1 - e10
        amp = amplify(a0, a1, (a1 - a0) / 2, eps_target)
        cost = amp.runs * most
    return ComposedBicorr(mix, k, e01, e10, err, limit, most, amp, cost)


# --- the whole chain -------------------------------------------------------------------

@dataclass(frozen=True)
class GapReport:
    fbs: Fraction
    vacuous: bool
    outer_depth: int | None = None  # q: depth of the composed tree
    outer_eps: Fraction | None = None
    blocks: BlockReport | None = None
    truncation: TruncationReport | None = None
    bicorr: ComposedBicorr | None = None
    ratio: Fraction | None = None  # bicorr cost * fbs / q


def outer_tree(f: PartialFunction, g: PartialFunction, pair: DistPair, zs: Sequence[str],
               outer_error=Fraction(1, 10)) -> tuple[DecisionTree, Fraction]:
    """Shallowest tree for f o g erring at most outer_error on every D_z, z in zs.

    Found by the distributional DP on the uniform mixture of the D_z at error
    outer_error / len(zs), which bounds every component's error by outer_error.
    """
    fg = composed_function(f, g)
    ds = [product_dist_for_z(pair, z) for z in zs]
    mix = {}
    for d in ds:
        for x, p in d.mass.items():
            mix[x] = mix.get(x, Fraction(0)) + p / len(ds)
    dp = _SingleDP(fg, Dist(fg.n, mix, fg.alphabet))
    eps = Fraction(outer_error) / len(zs)
    for q in range(fg.n + 1):
        if dp.err(full_cell(fg.n), q) <= eps:
            return dp.tree(q), eps
    raise AssertionError("full-depth tree errs on the domain")


def composition_gap_report(f: PartialFunction, g: PartialFunction, pair: DistPair,
                           factor: int = 5, outer_error=Fraction(1, 10),
                           eps_target=Fraction(1, 3)) -> GapReport:
    cert = fbs(f)
    if cert.value == 0:
        return GapReport(Fraction(0), True)
    y = cert.x
    zs = [y] + [flip(y, b) for b in cert.blocks]
    t, eps = outer_tree(f, g, pair, zs, outer_error)
    rep = find_rare_block(t, f, pair, cert)
    q1 = rep.q_blocks[rep.selected]
    limit = math.floor(factor * q1)
    halt = "accept" if rep.f_y == 0 else "reject"
    ttr = truncate_tree(t, rep.block, pair.n, limit, halt)
    tr = verify_truncation_bounds(t, ttr, y, rep.block, pair, rep.f_y, q1, factor, outer_error)
    if not tr.ok:
        raise GuaranteeViolated(f"truncation bounds fail: {tr}", "truncation")
    bic = composed_to_bicorr(ttr, y, rep.block, pair, rep.f_y, limit, eps_target)
    q = t.query_depth()
    ratio = Fraction(bic.cost) * cert.value / q if q else None
    return GapReport(cert.value, False, q, eps, rep, tr, bic, ratio)
