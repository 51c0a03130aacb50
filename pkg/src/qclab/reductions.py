"""Bicorrelated samples, selection, and the reductions between them and
correlated samples.

Bicorrelated layout: k pairs of samples, pair i occupying slots 2i and 2i+1.
Under hypothesis "01" slot 2i is drawn from D0 and slot 2i+1 from D1; under
"10" the roles are swapped. A bicorrelated tester labels a leaf ``accept``
when it guesses "10", so both kinds of tester accept on the hypothesis whose
even slots come from D1.

Randomized testers are kept as explicit weighted sets of deterministic trees.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .boosters import AmplifiedTester, GuaranteeViolated, amplify
from .core import (
    STAR,
    Dist,
    DistPair,
    PartialFunction,
    cell_mass,
    free_positions,
    full_cell,
    xor_fn,
)
from .dtree import DecisionTree, Leaf, Query, freeze, leaf_reach_dist, product_mass, relabel, step
from .exact import CapExceeded, size_cap

HALF = Fraction(1, 2)


def statistical_distance(p: Mapping, q: Mapping) -> Fraction:
    """Half the L1 distance between two finite distributions given as dicts."""
    keys = set(p) | set(q)
    return sum((abs(p.get(x, 0) - q.get(x, 0)) for x in keys), Fraction(0)) / 2


# --- instances -----------------------------------------------------------------

@dataclass(frozen=True)
class BicorrInstance:
    pair: DistPair
    k: int

    @property
    def slots(self) -> int:
        return 2 * self.k

    def dists(self, a: int, b: int) -> list[Dist]:
        """Per-slot distributions of D_ab^k (slot 2i from D_a, slot 2i+1 from D_b)."""
        da, db = self.pair.dist(a), self.pair.dist(b)
        return [da, db] * self.k

    def error(self, t: DecisionTree) -> Fraction:
        """Balanced error of an accept/reject tree: accept means "10"."""
        if t.k != self.slots:
            raise ValueError(f"tree reads {t.k} samples, expected {self.slots}")
        a01 = accept_mass(t, self.dists(0, 1))
        a10 = accept_mass(t, self.dists(1, 0))
        return (a01 + 1 - a10) / 2


@dataclass(frozen=True)
class SelectionInstance:
    pair: DistPair
    k: int

    @property
    def dist(self) -> Dist:
        return self.pair.balanced()

    def error(self, t: DecisionTree) -> Fraction:
        return selection_error(t, self.pair)


def accept_mass(t: DecisionTree, dists: Sequence[Dist]) -> Fraction:
    return sum((p for info, p in _leaf_masses(t, dists) if info.leaf.label == "accept"), Fraction(0))


def _leaf_masses(t: DecisionTree, dists: Sequence[Dist]):
    for info in t.leaves():
        yield info, product_mass(dists, info.cells)


def selection_error(t: DecisionTree, pair: DistPair) -> Fraction:
    """Pr over y ~ D^k (D the balanced mixture) that the leaf's claim (i, b) has f(y_i) != b.

    Unlabeled leaves count as errors.
    """
    d = pair.balanced()
    right = Fraction(0)
    for info in t.leaves():
        label = info.leaf.label
        if not isinstance(label, tuple):
            continue
        i, b = label
        part = pair.dist(b)
        p = HALF * cell_mass(part, info.cells[i])
        for j, c in enumerate(info.cells):
            if j != i and p:
                p *= cell_mass(d, c)
        right += p
    return 1 - right


# --- exact optimal testers for product hypotheses ------------------------------------

class ProductTestDP:
    """Least balanced error of depth-<=q trees deciding h0 vs h1, two products of per-slot dists.

    States are plain product cells; no symmetry reduction. Leaves are labeled
    accept iff the h1 weight is strictly larger; children are never trimmed.
    """

    def __init__(self, h0: Sequence[Dist], h1: Sequence[Dist]):
        if len(h0) != len(h1):
            raise ValueError("hypotheses have different sample counts")
        self.h0, self.h1 = list(h0), list(h1)
        self.k, self.n = len(h0), h0[0].n
        if self.k * self.n > 2 * size_cap():
            raise CapExceeded("slots*n", self.k * self.n, 2 * size_cap())
        self.alphabet = h0[0].alphabet
        self.memo: dict = {}

    def weights(self, cells):
        return HALF * product_mass(self.h0, cells), HALF * product_mass(self.h1, cells)

    def actions(self, cells):
        for j, c in enumerate(cells):
            for i in free_positions(c):
                yield j, i, [step(cells, j, i, s) for s in self.alphabet.symbols]

    def err(self, cells, q):
        key = (cells, q)
        if key in self.memo:
            return self.memo[key]
        w0, w1 = self.weights(cells)
        best = min(w0, w1)
        if best and q > 0:
            for _, _, kids in self.actions(cells):
                v = Fraction(0)
                for c in kids:
                    v += self.err(c, q - 1)
                    if v >= best:
                        break
                if v < best:
                    best = v
        self.memo[key] = best
        return best

    def start(self):
        return tuple(full_cell(self.n) for _ in range(self.k))

    def tree(self, q) -> DecisionTree:
        def build(cells, q):
            w0, w1 = self.weights(cells)
            target = self.err(cells, q)
            if min(w0, w1) == target:
                return Leaf("accept" if w1 > w0 else "reject")
            for j, i, kids in self.actions(cells):
                if sum((self.err(c, q - 1) for c in kids), Fraction(0)) == target:
                    return Query(j, i, tuple(build(c, q - 1) for c in kids))
            raise AssertionError("memo inconsistent")

        return DecisionTree(self.k, self.n, build(self.start(), q), self.alphabet)


def bicorr_error(pair: DistPair, k: int, q: int) -> Fraction:
    inst = BicorrInstance(pair, k)
    return _dp_err(inst.dists(0, 1), inst.dists(1, 0), q)


def _dp_err(h0, h1, q):
    dp = ProductTestDP(h0, h1)
    return dp.err(dp.start(), q)


def bicorr_tree(pair: DistPair, k: int, q: int) -> DecisionTree:
    inst = BicorrInstance(pair, k)
    return ProductTestDP(inst.dists(0, 1), inst.dists(1, 0)).tree(q)


def product_corr_error(pair: DistPair, k: int, q: int) -> Fraction:
    """corr error through the uncanonicalized product DP (an independent check of the corr DP)."""
    return _dp_err([pair.d0] * k, [pair.d1] * k, q)


# --- mixtures of deterministic trees ------------------------------------------------

@dataclass(frozen=True)
class MixtureTester:
    parts: tuple  # ((weight, tree), ...), weights summing to 1

    def accept_mass(self, dists: Sequence[Dist]) -> Fraction:
        return sum((w * accept_mass(t, dists) for w, t in self.parts), Fraction(0))

    def corr_error(self, pair: DistPair) -> Fraction:
        k = self.parts[0][1].k
        a0 = self.accept_mass([pair.d0] * k)
        a1 = self.accept_mass([pair.d1] * k)
        return (a0 + 1 - a1) / 2

    def depth(self) -> int:
        return max(t.query_depth() for _, t in self.parts)


def corr_tree_error(t: DecisionTree, pair: DistPair) -> Fraction:
    a0 = accept_mass(t, [pair.d0] * t.k)
    a1 = accept_mass(t, [pair.d1] * t.k)
    return (a0 + 1 - a1) / 2


# --- hybrid argument -------------------------------------------------------------------

@dataclass(frozen=True)
class HybridResult:
    branch: str  # "A": corr input in odd slots; "B": corr input in even slots
    eps: Fraction
    d_01_10: Fraction
    d_01_00: Fraction
    d_00_10: Fraction
    mixture: MixtureTester
    mixture_error: Fraction
    best_tree: DecisionTree
    best_error: Fraction
    amplified: AmplifiedTester | None
    cost: int | None  # queries of the amplified tester


def bicorr_to_corr(t: DecisionTree, pair: DistPair, k: int, eps_target=Fraction(1, 3),
                   budget: int = 20_000) -> HybridResult:
    """Turn a bicorrelated tester into a correlated-samples tester by the hybrid argument.

    D01^k and D10^k are joined through D00^k. The branch with the larger
    statistical distance is kept; its D0 slots are generated by the tester
    itself, enumerated exactly over the support of D0^k.
    """
    inst = BicorrInstance(pair, k)
    eps = inst.error(t)
    p01 = leaf_reach_dist(t, inst.dists(0, 1))
    p10 = leaf_reach_dist(t, inst.dists(1, 0))
    p00 = leaf_reach_dist(t, inst.dists(0, 0))
    d_01_10 = statistical_distance(p01, p10)
    d_01_00 = statistical_distance(p01, p00)
    d_00_10 = statistical_distance(p00, p10)
    if d_01_10 > d_01_00 + d_00_10:
        raise GuaranteeViolated("triangle inequality fails", "hybrid")
    if 1 - 2 * eps > d_01_10:
        raise GuaranteeViolated(f"distance {d_01_10} below 1 - 2 eps", "hybrid")

    if d_01_00 >= d_00_10:
        branch, far, dist = "A", p01, d_01_00
        gen_slots, live = [2 * i for i in range(k)], [2 * i + 1 for i in range(k)]
    else:
        branch, far, dist = "B", p10, d_00_10
        gen_slots, live = [2 * i + 1 for i in range(k)], [2 * i for i in range(k)]

    labeled = relabel(t, lambda info: "accept" if far[info.address] > p00[info.address] else "reject")
    support = sorted(pair.d0.support)
    if len(support) ** k > budget:
        raise CapExceeded("|supp D0|^k", len(support) ** k, budget)
    remap = {s: idx for idx, s in enumerate(live)}
    parts = []
    best = None
    for gen in itertools.product(support, repeat=k):
        w = Fraction(1)
        for g in gen:
            w *= pair.d0(g)
        tree = freeze(labeled, dict(zip(gen_slots, gen)), remap, k)
        parts.append((w, tree))
        e = corr_tree_error(tree, pair)
        if best is None or e < best[0]:
            best = (e, tree)
    mix = MixtureTester(tuple(parts))
    mix_err = mix.corr_error(pair)
    if mix_err != (1 - dist) / 2:
        raise GuaranteeViolated(f"mixture error {mix_err} != (1 - {dist}) / 2", "hybrid")
    if mix_err > Fraction(1, 4) + eps / 2:
        raise GuaranteeViolated(f"mixture error {mix_err} > 1/4 + eps/2", "hybrid")
    if eps <= Fraction(1, 3) and mix_err > Fraction(5, 12):
        raise GuaranteeViolated(f"mixture error {mix_err} > 5/12", "hybrid")

    amp = cost = None
    if best[0] > eps_target and mix_err < HALF:
        a0 = mix.accept_mass([pair.d0] * k)
        a1 = mix.accept_mass([pair.d1] * k)
        amp = amplify(a0, a1, (a1 - a0) / 2, eps_target)
        cost = amp.runs * mix.depth()
    return HybridResult(branch, eps, d_01_10, d_01_00, d_00_10, mix, mix_err, best[1], best[0], amp, cost)


# --- selection to bicorrelated ----------------------------------------------------------

@dataclass(frozen=True)
class SelectionReduction:
    sel_error: Fraction
    mixture: tuple  # ((weight, z, tree), ...)
    mixture_error: Fraction
    best_z: tuple
    best_tree: DecisionTree
    best_error: Fraction


def sel_to_bicorr(t_sel: DecisionTree, pair: DistPair, k: int | None = None) -> SelectionReduction:
    """Run the selector on y_i = x_{i, z_i} and read the hypothesis off its claim.

    Under "01" f(x_{i, z}) = z, so a claim (i, b) with b = z_i points to
    "01" (reject) and b != z_i points to "10" (accept).
    """
    k = t_sel.k if k is None else k
    if t_sel.k != k:
        raise ValueError(f"selector reads {t_sel.k} samples, expected {k}")
    inst = BicorrInstance(pair, k)
    sel_err = selection_error(t_sel, pair)
    parts = []
    best = None
    w = Fraction(1, 2 ** k)
    for z in itertools.product((0, 1), repeat=k):
        moved = freeze(t_sel, {}, {}, 2 * k, position_map=lambda j, i, z=z: (2 * j + z[j], i))

        def label(info, z=z):
            claim = info.leaf.label
            if not isinstance(claim, tuple):
                return None  # no claim: never correct
            i, b = claim
            return "accept" if b != z[i] else "reject"

        tree = relabel(moved, label)
        e = inst.error(tree)
        parts.append((w, z, tree))
        if best is None or e < best[0]:
            best = (e, z, tree)
    mix_err = sum((w * inst.error(tr) for w, _, tr in parts), Fraction(0))
    if mix_err != sel_err:
        raise GuaranteeViolated(f"bicorr error {mix_err} != selection error {sel_err}", "selection")
    return SelectionReduction(sel_err, tuple(parts), mix_err, best[1], best[2], best[0])


# --- the separating instance ---------------------------------------------------------

def shaltiel_selection_dist(n: int, eps_weight=Fraction(1, 100)) -> tuple[PartialFunction, Dist]:
    """z uniform on n-2 bits; w.p. eps_weight x = a a z with a = xor(z), otherwise x = b b z, b uniform."""
    if n < 3:
        raise ValueError("n must be at least 3")
    eps = Fraction(eps_weight)
    unit = Fraction(1, 2 ** (n - 2))
    mass: dict[str, Fraction] = {}
    for zt in itertools.product("01", repeat=n - 2):
        z = "".join(zt)
        a = str(z.count("1") % 2)
        for b in "01":
            p = (1 - eps) * HALF * unit + (eps * unit if b == a else 0)
            mass[b + b + z] = mass.get(b + b + z, Fraction(0)) + p
    return xor_fn(n), Dist(n, mass)


@dataclass(frozen=True)
class BiasCertificate:
    n: int
    q_max: int
    eps_weight: Fraction
    cells: int
    max_deviation: Fraction  # max |Pr[xor = 1 | cell] - 1/2|
    worst_cell: str
    ok: bool

    @property
    def leaf_error_floor(self) -> Fraction:
        """Every leaf of a depth-<=q_max selector errs with probability at least this."""
        return HALF - self.max_deviation


def selection_bias_certificate(n: int, q_max: int | None = None, eps_weight=Fraction(1, 100)) -> BiasCertificate:
    f, d = shaltiel_selection_dist(n, eps_weight)
    q_max = n - 3 if q_max is None else q_max
    eps = Fraction(eps_weight)
    ones = Dist.from_weights({x: p for x, p in d.mass.items() if f(x) == 1})
    p_one = sum((p for x, p in d.mass.items() if f(x) == 1), Fraction(0))
    worst, worst_cell, count = Fraction(-1), "", 0
    for fixed in range(q_max + 1):
        for pos in itertools.combinations(range(n), fixed):
            for vals in itertools.product("01", repeat=fixed):
                cell = [STAR] * n
                for i, v in zip(pos, vals):
                    cell[i] = v
                cell = "".join(cell)
                m = cell_mass(d, cell)
                if not m:
                    continue
                count += 1
                dev = abs(p_one * cell_mass(ones, cell) / m - HALF)
                if dev > worst:
                    worst, worst_cell = dev, cell
    return BiasCertificate(n, q_max, eps, count, worst, worst_cell, worst <= eps)


@dataclass(frozen=True)
class EasyCorr:
    base: DecisionTree
    p0: Fraction
    p1: Fraction
    base_error: Fraction
    amplified: AmplifiedTester
    cost: int


def corr_easy_on_shaltiel(n: int, eps_weight=Fraction(1, 100), eps_target=Fraction(1, 3)) -> EasyCorr:
    """Guess xor from the first bit of one sample, then amplify over fresh samples."""
    f, d = shaltiel_selection_dist(n, eps_weight)
    pair = DistPair.from_dist(f, d)
    base = DecisionTree(1, n, Query(0, 0, (Leaf("reject"), Leaf("accept"))))
    p0 = accept_mass(base, [pair.d0])
    p1 = accept_mass(base, [pair.d1])
    err = (p0 + 1 - p1) / 2
    amp = amplify(p0, p1, (p1 - p0) / 2, eps_target)
    return EasyCorr(base, p0, p1, err, amp, amp.runs * base.query_depth())
