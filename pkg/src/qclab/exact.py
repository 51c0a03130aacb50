"""Exact query-complexity measures of small partial functions.

Deterministic, distributional and correlated-samples complexity are computed
by memoized recursion over restriction cells; randomized complexity of tiny
functions by solving the tree-vs-input game as an exact LP; block sensitivity
by set packing and fractional block sensitivity by an exact LP.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .core import (
    STAR,
    Dist,
    DistPair,
    PartialFunction,
    QclabError,
    cell_mass,
    free_positions,
    full_cell,
    restrict,
    xor_fn,
)
from .dtree import DecisionTree, Leaf, Query
from .lp import lp_solve, lp_vertex_enum

HALF = Fraction(1, 2)


class CapExceeded(QclabError):
    def __init__(self, what: str, size: int, cap: int):
        super().__init__(f"{what} = {size} exceeds cap {cap} (set QCLAB_CAP to raise it)")
        self.size = size
        self.cap = cap


def size_cap() -> int:
    return int(os.environ.get("QCLAB_CAP", "10"))


def _check_cap(what: str, size: int, cap: int | None = None):
    cap = size_cap() if cap is None else cap
    if size > cap:
        raise CapExceeded(what, size, cap)


def _label(w0: Fraction, w1: Fraction) -> str:
    return "accept" if w1 > w0 else "reject"


# --- deterministic complexity ------------------------------------------------

def dt_exact(f: PartialFunction) -> int:
    _check_cap("n", f.n)
    defined = f.inputs()
    syms = f.alphabet.symbols

    @lru_cache(maxsize=None)
    def depth(cell: str) -> int:
        vals = {f(x) for x in defined if all(c == STAR or c == s for s, c in zip(x, cell))}
        if len(vals) <= 1:
            return 0
        return min(1 + max(depth(restrict(cell, i, s)) for s in syms) for i in free_positions(cell))

    return depth(full_cell(f.n))


# --- distributional complexity ------------------------------------------------

class _SingleDP:
    """err(cell, q): least error of a depth-<=q tree on the part of d inside ``cell``."""

    def __init__(self, f: PartialFunction, d: Dist):
        _check_cap("n", f.n)
        if d.n != f.n:
            raise ValueError("function and distribution arity differ")
        self.f, self.syms = f, f.alphabet.symbols
        self.parts = [{x: p for x, p in d.mass.items() if f(x) == b} for b in (0, 1)]
        self.wmemo: dict = {}
        self.memo: dict = {}

    def weights(self, cell):
        w = self.wmemo.get(cell)
        if w is None:
            w = tuple(sum((p for x, p in part.items() if all(c == STAR or c == s for s, c in zip(x, cell))),
                          Fraction(0)) for part in self.parts)
            self.wmemo[cell] = w
        return w

    def err(self, cell, q):
        key = (cell, q)
        if key in self.memo:
            return self.memo[key]
        w0, w1 = self.weights(cell)
        best = min(w0, w1)
        if best and q > 0:
            for i in free_positions(cell):
                v = sum((self.err(restrict(cell, i, s), q - 1) for s in self.syms), Fraction(0))
                if v < best:
                    best = v
        self.memo[key] = best
        return best

    def tree(self, q) -> DecisionTree:
        def build(cell, q):
            w0, w1 = self.weights(cell)
            target = self.err(cell, q)
            if min(w0, w1) == target:
                return Leaf(_label(w0, w1))
            for i in free_positions(cell):
                kids = [restrict(cell, i, s) for s in self.syms]
                if sum((self.err(c, q - 1) for c in kids), Fraction(0)) == target:
                    return Query(0, i, tuple(build(c, q - 1) if any(self.weights(c)) else None for c in kids))
            raise AssertionError("memo inconsistent")

        return DecisionTree(1, self.f.n, build(full_cell(self.f.n), q), self.f.alphabet)


def min_error(f: PartialFunction, d: Dist, q: int) -> Fraction:
    """Least Pr_{x~d}[T(x) != f(x)] over depth-<=q deterministic trees T."""
    return _SingleDP(f, d).err(full_cell(f.n), q)


def dt_eps(f: PartialFunction, d: Dist, eps) -> int:
    dp = _SingleDP(f, d)
    eps = Fraction(eps)
    for q in range(f.n + 1):
        if dp.err(full_cell(f.n), q) <= eps:
            return q
    raise AssertionError("full-depth tree has positive error on the domain")


def best_tree(f: PartialFunction, d: Dist, q: int) -> DecisionTree:
    """A depth-<=q tree attaining min_error, labeled accept (output 1) / reject (output 0)."""
    return _SingleDP(f, d).tree(q)


def dt_eps_tree(f: PartialFunction, d: Dist, eps) -> tuple[int, DecisionTree]:
    q = dt_eps(f, d, eps)
    return q, best_tree(f, d, q)


# --- correlated samples ---------------------------------------------------------

class _CorrDP:
    """Error DP for deciding D0^k vs D1^k under the balanced mixture.

    States are canonical: the multiset of cells of touched samples plus the
    number of untouched samples. Fresh samples are only opened in order.
    """

    def __init__(self, pair: DistPair, k: int):
        self.pair, self.k, self.n = pair, k, pair.n
        self.syms = pair.alphabet.symbols
        self.memo: dict = {}

    def weights(self, cells):
        w0, w1 = HALF, HALF
        for c in cells:
            w0 *= cell_mass(self.pair.d0, c)
            w1 *= cell_mass(self.pair.d1, c)
        return w0, w1

    def _children(self, cells, fresh):
        """Yield (action, list of child (cells, fresh)) with action = (touched index or -1, position)."""
        for idx, c in enumerate(cells):
            for i in free_positions(c):
                kids = []
                for s in self.syms:
                    nc = cells[:idx] + (restrict(c, i, s),) + cells[idx + 1:]
                    kids.append((nc, fresh))
                yield (idx, i), kids
        if fresh:
            for i in range(self.n):
                kids = [(cells + (restrict(full_cell(self.n), i, s),), fresh - 1) for s in self.syms]
                yield (-1, i), kids

    def err(self, cells, fresh, q):
        key = (tuple(sorted(cells)), fresh, q)
        if key in self.memo:
            return self.memo[key]
        w0, w1 = self.weights(cells)
        best = min(w0, w1)
        if best and q > 0:
            for _, kids in self._children(cells, fresh):
                v = Fraction(0)
                for nc, nf in kids:
                    v += self.err(nc, nf, q - 1)
                    if v >= best:
                        break
                if v < best:
                    best = v
        self.memo[key] = best
        return best

    def tree(self, q) -> DecisionTree:
        def build(cells, order, fresh, q):
            # order[t] is the actual sample index of touched cell t
            w0, w1 = self.weights(cells)
            target = self.err(cells, fresh, q)
            if min(w0, w1) == target:
                return Leaf(_label(w0, w1))
            for (idx, i), kids in self._children(cells, fresh):
                if sum((self.err(nc, nf, q - 1) for nc, nf in kids), Fraction(0)) != target:
                    continue
                j = order[idx] if idx >= 0 else len(order)
                norder = order if idx >= 0 else order + (j,)
                return Query(j, i, tuple(build(nc, norder, nf, q - 1) if any(self.weights(nc)) else None
                                         for nc, nf in kids))
            raise AssertionError("memo inconsistent")

        return DecisionTree(self.k, self.n, build((), (), self.k, q), self.pair.alphabet)


def corr_error(pair: DistPair, k: int, q: int) -> Fraction:
    """Least error of a depth-<=q tree deciding D0^k vs D1^k under the balanced mixture."""
    _check_cap("k*n", k * pair.n, 2 * size_cap())
    return _CorrDP(pair, k).err((), k, q)


def corr_tree(pair: DistPair, k: int, q: int) -> DecisionTree:
    return _CorrDP(pair, k).tree(q)


def corr_eps(f: PartialFunction | None, pair: DistPair, eps, k_max: int | None = None,
             q_max: int | None = None) -> tuple[int, int]:
    """min over k <= k_max of dt_eps(f^k, D0^k/2 + D1^k/2); returns (cost, smallest k attaining it)."""
    eps = Fraction(eps)
    n = pair.n
    k_max = n if k_max is None else k_max
    best = None
    for k in range(1, k_max + 1):
        _check_cap("k*n", k * n, 2 * size_cap())
        dp = _CorrDP(pair, k)
        limit = k * n if q_max is None else min(q_max, k * n)
        if best is not None:
            limit = min(limit, best[0] - 1)
        for q in range(limit + 1):
            if dp.err((), k, q) <= eps:
                best = (q, k)
                break
    if best is None:
        raise CapExceeded("q_max", q_max or 0, q_max or 0)
    return best


# --- randomized complexity of tiny functions --------------------------------------

def _behaviours(f: PartialFunction, q: int) -> list[tuple]:
    """Distinct output vectors (over the sorted domain) of depth-<=q deterministic trees."""
    domain = sorted(f.inputs())
    syms = f.alphabet.symbols

    @lru_cache(maxsize=None)
    def beh(cell, q):
        inside = tuple(x for x in domain if all(c == STAR or c == s for s, c in zip(x, cell)))
        out = {tuple(b for _ in inside) for b in (0, 1)}
        if q > 0 and inside:
            for i in free_positions(cell):
                kids = [restrict(cell, i, s) for s in syms]
                parts = [beh(c, q - 1) for c in kids]
                for combo in itertools.product(*parts):
                    lookup = {}
                    for c, vec in zip(kids, combo):
                        members = [x for x in inside if x[i] == c[i]]
                        lookup.update(zip(members, vec))
                    out.add(tuple(lookup[x] for x in inside))
        return frozenset(out)

    return sorted(beh(full_cell(f.n), q))


@dataclass(frozen=True)
class GameResult:
    depth: int
    value: Fraction
    n_trees: int


def game_value(f: PartialFunction, q: int) -> tuple[Fraction, int]:
    """Value of the game (mixture of depth-<=q trees) vs (input in domain), payoff = correctness."""
    domain = sorted(f.inputs())
    trees = _behaviours(f, q)
    m = len(trees)
    # variables: p_1..p_m, v ; maximize v
    A, b = [], []
    for xi, x in enumerate(domain):
        A.append([-Fraction(int(vec[xi] == f(x))) for vec in trees] + [Fraction(1)])
        b.append(Fraction(0))
    A.append([Fraction(1)] * m + [Fraction(0)])
    b.append(Fraction(1))
    res = lp_solve([Fraction(0)] * m + [Fraction(1)], A, b)
    return res.value, m


def rdt_tiny(f: PartialFunction, eps) -> GameResult:
    _check_cap("n", f.n, 3)
    if f.alphabet.size != 2:
        raise CapExceeded("alphabet size", f.alphabet.size, 2)
    eps = Fraction(eps)
    if not f.inputs():
        return GameResult(0, Fraction(1), 2)
    for q in range(f.n + 1):
        val, m = game_value(f, q)
        if val >= 1 - eps:
            return GameResult(q, val, m)
    raise AssertionError("full-depth trees compute f exactly")


# --- block sensitivity ---------------------------------------------------------

@dataclass(frozen=True)
class FbsCertificate:
    x: str | None
    blocks: tuple  # tuples of positions
    weights: tuple
    value: Fraction

    def check(self, f: PartialFunction) -> bool:
        """Assert the certificate's invariants against f; returns True when they hold."""
        for B in self.blocks:
            y = flip(self.x, B)
            assert f(self.x) is not None and f(y) is not None and f(y) != f(self.x), B
        for i in range(f.n):
            assert sum((w for B, w in zip(self.blocks, self.weights) if i in B), Fraction(0)) <= 1
        assert all(0 <= w <= 1 for w in self.weights)
        assert sum(self.weights, Fraction(0)) == self.value
        return True


def flip(x: str, block) -> str:
    chars = list(x)
    for i in block:
        chars[i] = "1" if chars[i] == "0" else "0"
    return "".join(chars)


def sensitive_blocks(f: PartialFunction, x: str) -> list[tuple]:
    if f.alphabet.size != 2:
        raise ValueError("block sensitivity is defined here for binary alphabets only")
    fx = f(x)
    if fx is None:
        return []
    out = []
    for r in range(1, f.n + 1):
        for B in itertools.combinations(range(f.n), r):
            fy = f(flip(x, B))
            if fy is not None and fy != fx:
                out.append(B)
    return out


def _packing(blocks: list[tuple]) -> int:
    masks = sorted({sum(1 << i for i in B) for B in blocks})
    minimal = [m for m in masks if not any(o != m and o & m == o for o in masks)]

    @lru_cache(maxsize=None)
    def best(idx, used):
        if idx == len(minimal):
            return 0
        skip = best(idx + 1, used)
        m = minimal[idx]
        return max(skip, 1 + best(idx + 1, used | m)) if not m & used else skip

    return best(0, 0)


def bs(f: PartialFunction) -> int:
    _check_cap("n", f.n)
    return max((_packing(sensitive_blocks(f, x)) for x in f.inputs()), default=0)


def _fbs_lp(n: int, blocks: tuple, solver) -> tuple[Fraction, tuple]:
    if not blocks:
        return Fraction(0), ()
    A = [[Fraction(int(i in B)) for B in blocks] for i in range(n)]
    res = solver([Fraction(1)] * len(blocks), A, [Fraction(1)] * n)
    return res.value, res.x


def fbs_at(f: PartialFunction, x: str, solver=lp_solve) -> FbsCertificate:
    blocks = tuple(sensitive_blocks(f, x))
    val, w = _fbs_lp(f.n, blocks, solver)
    return FbsCertificate(x, blocks, tuple(w), val)


def fbs(f: PartialFunction, solver=lp_solve) -> FbsCertificate:
    """Fractional block sensitivity with a witness input; ties go to the lexicographically least x."""
    _check_cap("n", f.n)
    cache: dict = {}
    best = FbsCertificate(None, (), (), Fraction(0))
    for x in sorted(f.inputs()):
        blocks = tuple(sensitive_blocks(f, x))
        if blocks not in cache:
            cache[blocks] = _fbs_lp(f.n, blocks, solver)
        val, w = cache[blocks]
        if val > best.value:
            best = FbsCertificate(x, blocks, tuple(w), val)
    return best


def fbs_vertex(f: PartialFunction) -> FbsCertificate:
    return fbs(f, solver=lp_vertex_enum)


# --- the intro example -----------------------------------------------------------

def shaltiel_dist_intro(n: int) -> tuple[PartialFunction, Dist]:
    """xor_n with D = 0U^{n-1} w.p. 99/100 and 1U0^{n-2} w.p. 1/100."""
    if n < 3:
        raise ValueError("n must be at least 3")
    mass: dict[str, Fraction] = {}
    hard = Fraction(99, 100) / 2 ** (n - 1)
    for tail in itertools.product("01", repeat=n - 1):
        mass["0" + "".join(tail)] = hard
    for u in "01":
        mass["1" + u + "0" * (n - 2)] = Fraction(1, 200)
    return xor_fn(n), Dist(n, mass)


def shaltiel_search_tester(n: int, samples: int) -> DecisionTree:
    """Scan first bits of ``samples`` samples; on the first 1, read that sample's second bit."""
    node = Leaf("reject")
    for j in reversed(range(samples)):
        easy = Query(j, 1, (Leaf("accept"), Leaf("reject")))
        node = Query(j, 0, (node, easy))
    return DecisionTree(samples, n, node)


def tester_error(t: DecisionTree, pair: DistPair) -> tuple[Fraction, Fraction]:
    """Exact (Pr[accept | D0^k], Pr[reject | D1^k]) for a k-sample accept/reject tree."""
    from .dtree import product_mass

    d0s, d1s = [pair.d0] * t.k, [pair.d1] * t.k
    a0 = r1 = Fraction(0)
    for info in t.leaves():
        if info.leaf.label == "accept":
            a0 += product_mass(d0s, info.cells)
        else:
            r1 += product_mass(d1s, info.cells)
    return a0, r1


def shaltiel_corr_cost(n: int, eps=Fraction(1, 3), max_samples: int = 500) -> tuple[int, int, Fraction]:
    """Fewest samples for the search tester to reach balanced error <= eps.

    Returns (query cost, samples, exact error)."""
    f, d = shaltiel_dist_intro(n)
    pair = DistPair.from_dist(f, d)
    eps = Fraction(eps)
    for s in range(1, max_samples + 1):
        a0, r1 = tester_error(shaltiel_search_tester(n, s), pair)
        err = (a0 + r1) / 2
        if err <= eps:
            return s + 1, s, err
    raise CapExceeded("samples", max_samples, max_samples)
