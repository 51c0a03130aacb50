"""Multi-sample decision trees and likelihood functionals on their vertices.

A tree reads ``k`` samples, each a string in Sigma^n. Sample and position
indices are 0-based. A vertex's input set is a product cell: one restriction
string per sample. Unreachable children are stored as ``None`` (trimmed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Sequence, Union

from .core import (
    BINARY,
    STAR,
    Alphabet,
    Dist,
    DistPair,
    ExpThreshold,
    LikelihoodRatio,
    cell_mass,
    cmp_exp,
    full_cell,
    lr,
    restrict,
)

Label = Union[None, str, tuple]


@dataclass(frozen=True)
class Leaf:
    label: Label = None


@dataclass(frozen=True)
class Dummy:
    child: "Node"


@dataclass(frozen=True)
class Query:
    j: int
    i: int
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


Node = Union[Leaf, Dummy, Query]


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class LeafInfo:
    address: tuple
    leaf: Leaf
    cells: tuple
    queries: tuple  # (j, i) pairs along the path, in order
    length: int  # path length, dummies included


@dataclass(frozen=True)
class DecisionTree:
    k: int
    n: int
    root: Node
    alphabet: Alphabet = BINARY

    def __post_init__(self):
        self._check(self.root, self.start())

    def start(self) -> tuple:
        return tuple(full_cell(self.n) for _ in range(self.k))

    def _check(self, node, cells):
        while isinstance(node, Dummy):
            node = node.child
        if node is None or isinstance(node, Leaf):
            return
        if not isinstance(node, Query):
            raise TreeError(f"unknown node {node!r}")
        if not (0 <= node.j < self.k and 0 <= node.i < self.n):
            raise TreeError(f"query ({node.j}, {node.i}) out of range")
        if cells[node.j][node.i] != STAR:
            raise TreeError(f"sample {node.j} position {node.i} queried twice on one path")
        if len(node.children) != self.alphabet.size:
            raise TreeError("query node needs one child per symbol")
        if all(c is None for c in node.children):
            raise TreeError("query node with no reachable child")
        for sym, child in zip(self.alphabet.symbols, node.children):
            self._check(child, step(cells, node.j, node.i, sym))

    def leaves(self) -> Iterator[LeafInfo]:
        stack = [(self.root, (), self.start(), (), 0)]
        out = []
        while stack:
            node, addr, cells, qs, length = stack.pop()
            if isinstance(node, Leaf):
                out.append(LeafInfo(addr, node, cells, qs, length))
            elif isinstance(node, Dummy):
                stack.append((node.child, addr + (0,), cells, qs, length + 1))
            else:
                for idx in reversed(range(len(node.children))):
                    child = node.children[idx]
                    if child is None:
                        continue
                    sym = self.alphabet.symbols[idx]
                    stack.append((child, addr + (idx,), step(cells, node.j, node.i, sym),
                                  qs + ((node.j, node.i),), length + 1))
        yield from out

    def depth(self) -> int:
        """Longest root-to-leaf path, dummy vertices included."""
        return max(info.length for info in self.leaves())

    def query_depth(self) -> int:
        """Largest number of queries on any path."""
        return max(len(info.queries) for info in self.leaves())

    def size(self) -> int:
        return sum(1 for _ in self.leaves())


def step(cells: tuple, j: int, i: int, sym: str) -> tuple:
    return cells[:j] + (restrict(cells[j], i, sym),) + cells[j + 1:]


@dataclass(frozen=True)
class TruncationParams:
    tau: Fraction = Fraction(100)
    settled_value: float = 500.0

    def __post_init__(self):
        object.__setattr__(self, "tau", Fraction(self.tau))
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.settled_value <= self.tau:
            raise ValueError("settled value must exceed tau")


PAPER_TRUNCATION = TruncationParams(Fraction(100), 500.0)


# --- execution -------------------------------------------------------------

def run(t: DecisionTree, x: Sequence[str]) -> tuple[Leaf, list]:
    """Follow the tree on input x; return the leaf and the list of visited vertices."""
    if len(x) != t.k or any(len(s) != t.n for s in x):
        raise TreeError("input dimensions do not match the tree")
    node = t.root
    path = []
    while not isinstance(node, Leaf):
        path.append(node)
        if isinstance(node, Dummy):
            node = node.child
        else:
            node = node.children[t.alphabet.symbols.index(x[node.j][node.i])]
            if node is None:
                raise TreeError("input reaches a trimmed branch")
    return node, path


def leaf_reach_dist(t: DecisionTree, dists: Sequence[Dist]) -> dict[tuple, Fraction]:
    """Exact probability that an input drawn from the product of ``dists`` ends at each leaf."""
    if len(dists) != t.k:
        raise TreeError(f"need {t.k} sample distributions, got {len(dists)}")
    return {info.address: product_mass(dists, info.cells) for info in t.leaves()}


def product_mass(dists: Sequence[Dist], cells: Sequence[str]) -> Fraction:
    p = Fraction(1)
    for d, c in zip(dists, cells):
        p *= cell_mass(d, c)
        if not p:
            break
    return p


# --- likelihood functionals -------------------------------------------------

def olr(pair: DistPair, cells: Sequence[str]) -> LikelihoodRatio:
    out = LikelihoodRatio(Fraction(1), Fraction(1))
    for c in cells:
        out = out * lr(pair, c)
    return out


def settled_lr(r: LikelihoodRatio, trunc: TruncationParams) -> bool:
    if r.is_infinite or r.is_zero:
        return True
    v = r.value
    return cmp_exp(v, trunc.tau) > 0 or cmp_exp(v, -trunc.tau) < 0


def settled(pair: DistPair, c: str, trunc: TruncationParams) -> bool:
    return settled_lr(lr(pair, c), trunc)


def tllr_lr(r: LikelihoodRatio, trunc: TruncationParams) -> float:
    if settled_lr(r, trunc):
        return float(trunc.settled_value)
    return r.log()


def tllr(pair: DistPair, c: str, trunc: TruncationParams) -> float:
    return tllr_lr(lr(pair, c), trunc)


def otllr(pair: DistPair, cells: Sequence[str], trunc: TruncationParams) -> float:
    return math.fsum(tllr(pair, c, trunc) for c in cells)


def meets(r: LikelihoodRatio, threshold) -> bool:
    return r.ge(threshold)


# --- constructions and transformations --------------------------------------

def leaf_tree(k: int, n: int, label: Label = None, alphabet: Alphabet = BINARY) -> DecisionTree:
    return DecisionTree(k, n, Leaf(label), alphabet)


def complete_tree(n: int, order: Sequence[int] | None = None, label_fn: Callable[[str], Label] | None = None,
                  alphabet: Alphabet = BINARY, j: int = 0, k: int = 1) -> DecisionTree:
    """Query every position of sample j in ``order``; label each leaf by ``label_fn(full string)``."""
    order = list(range(n)) if order is None else list(order)

    def build(cell, rest):
        if not rest:
            return Leaf(label_fn(cell) if label_fn else None)
        i = rest[0]
        return Query(j, i, tuple(build(restrict(cell, i, s), rest[1:]) for s in alphabet.symbols))

    return DecisionTree(k, n, build(full_cell(n), order), alphabet)


def function_tree(f, order=None) -> DecisionTree:
    """Complete single-sample tree labeled accept/reject by f (undefined -> unlabeled)."""
    return complete_tree(f.n, order, lambda x: {1: "accept", 0: "reject", None: None}[f(x)], f.alphabet)


def map_tree(t: DecisionTree, leaf_fn: Callable[[LeafInfo], Node]) -> DecisionTree:
    """Rebuild t replacing each leaf by ``leaf_fn(info)``."""
    infos = {info.address: info for info in t.leaves()}

    def rebuild(node, addr):
        if isinstance(node, Leaf):
            return leaf_fn(infos[addr])
        if isinstance(node, Dummy):
            return Dummy(rebuild(node.child, addr + (0,)))
        return Query(node.j, node.i, tuple(None if c is None else rebuild(c, addr + (idx,))
                                           for idx, c in enumerate(node.children)))

    return DecisionTree(t.k, t.n, rebuild(t.root, ()), t.alphabet)


def relabel(t: DecisionTree, label_fn: Callable[[LeafInfo], Label]) -> DecisionTree:
    return map_tree(t, lambda info: Leaf(label_fn(info)))


def truncate_queries(t: DecisionTree, counts: Callable[[int, int], bool], limit: int,
                     halt_label: Label = None) -> DecisionTree:
    """Replace the (limit+1)-th query satisfying ``counts(j, i)`` on each path by a leaf."""

    def rebuild(node, used):
        if node is None or isinstance(node, Leaf):
            return node
        if isinstance(node, Dummy):
            return Dummy(rebuild(node.child, used))
        hit = counts(node.j, node.i)
        if hit and used >= limit:
            return Leaf(halt_label)
        return Query(node.j, node.i, tuple(rebuild(c, used + hit) for c in node.children))

    return DecisionTree(t.k, t.n, rebuild(t.root, 0), t.alphabet)


def freeze(t: DecisionTree, fixed: dict[int, str], remap: dict[int, int], new_k: int,
           position_map: Callable[[int, int], tuple[int, int]] | None = None,
           new_n: int | None = None) -> DecisionTree:
    """Resolve queries to the samples in ``fixed`` using those strings; rename the rest.

    Queries to a free sample j at position i become queries to
    ``position_map(j, i)`` (default ``(remap[j], i)``).
    """
    if position_map is None:
        position_map = lambda j, i: (remap[j], i)  # noqa: E731
    syms = t.alphabet.symbols

    def rebuild(node):
        while isinstance(node, Query) and node.j in fixed:
            node = node.children[syms.index(fixed[node.j][node.i])]
        if node is None or isinstance(node, Leaf):
            return node
        if isinstance(node, Dummy):
            child = rebuild(node.child)
            return None if child is None else Dummy(child)
        kids = tuple(rebuild(c) for c in node.children)
        if all(c is None for c in kids):
            return None
        j2, i2 = position_map(node.j, node.i)
        return Query(j2, i2, kids)

    root = rebuild(t.root)
    if root is None:
        raise TreeError("frozen samples lead only to trimmed branches")
    return DecisionTree(new_k, t.n if new_n is None else new_n, root, t.alphabet)


def trim(t: DecisionTree, dist_lists: Sequence[Sequence[Dist]]) -> DecisionTree:
    """Drop branches that have zero mass under every product distribution given."""

    def alive(cells):
        return any(product_mass(ds, cells) > 0 for ds in dist_lists)

    def rebuild(node, cells):
        if isinstance(node, Leaf):
            return node
        if isinstance(node, Dummy):
            return Dummy(rebuild(node.child, cells))
        kids = []
        for sym, c in zip(t.alphabet.symbols, node.children):
            nxt = step(cells, node.j, node.i, sym)
            kids.append(rebuild(c, nxt) if c is not None and alive(nxt) else None)
        return Query(node.j, node.i, tuple(kids))

    return DecisionTree(t.k, t.n, rebuild(t.root, t.start()), t.alphabet)


def pad(t: DecisionTree, length: int) -> DecisionTree:
    """Insert dummy vertices above each leaf so every path has exactly ``length`` steps."""

    def wrap(info: LeafInfo) -> Node:
        if info.length > length:
            raise TreeError(f"path of length {info.length} exceeds {length}")
        node: Node = info.leaf
        for _ in range(length - info.length):
            node = Dummy(node)
        return node

    return map_tree(t, wrap)


def random_tree(rng, k: int, n: int, depth: int, alphabet: Alphabet = BINARY,
                stop_weight: int = 1, labels: Sequence[Label] = (None,)) -> DecisionTree:
    """Untrimmed random tree; ``rng`` needs ``below(n)`` (e.g. SplitMix64).

    At each vertex the tree stops with odds stop_weight : (free queries).
    """

    def build(cells, d):
        free = [(j, i) for j, c in enumerate(cells) for i, ch in enumerate(c) if ch == STAR]
        if d == 0 or not free or rng.below(len(free) + stop_weight) < stop_weight:
            return Leaf(labels[rng.below(len(labels))])
        j, i = free[rng.below(len(free))]
        return Query(j, i, tuple(build(step(cells, j, i, s), d - 1) for s in alphabet.symbols))

    return DecisionTree(k, n, build(tuple(full_cell(n) for _ in range(k)), depth), alphabet)


def split_blocks(t: DecisionTree, blocks: int) -> DecisionTree:
    """View a single-sample tree on blocks*m positions as a tree on ``blocks`` samples of length m."""
    if t.k != 1 or t.n % blocks:
        raise TreeError("need a single-sample tree whose length is a multiple of the block count")
    m = t.n // blocks

    def rebuild(node):
        if node is None or isinstance(node, Leaf):
            return node
        if isinstance(node, Dummy):
            return Dummy(rebuild(node.child))
        return Query(node.i // m, node.i % m, tuple(rebuild(c) for c in node.children))

    return DecisionTree(blocks, m, rebuild(t.root), t.alphabet)


# --- text format -------------------------------------------------------------

def _label_text(label: Label) -> str:
    if label is None:
        return "-"
    if isinstance(label, tuple):
        return f"{label[0]}:{label[1]}"
    return label


def _label_parse(tok: str) -> Label:
    if tok == "-":
        return None
    if ":" in tok:
        i, b = tok.split(":")
        return (int(i), int(b))
    return tok


def dumps(t: DecisionTree) -> str:
    """Serialize as ``T k n q`` followed by ``Q j i ( ... )`` / ``D ( c )`` / ``L label`` / ``U``."""
    out = [f"T {t.k} {t.n} {t.alphabet.size}"]

    def emit(node):
        if node is None:
            out.append("U")
        elif isinstance(node, Leaf):
            out.append(f"L {_label_text(node.label)}")
        elif isinstance(node, Dummy):
            out.append("D (")
            emit(node.child)
            out.append(")")
        else:
            out.append(f"Q {node.j} {node.i} (")
            for c in node.children:
                emit(c)
            out.append(")")

    emit(t.root)
    return " ".join(out)


def loads(text: str) -> DecisionTree:
    toks = text.split()
    if len(toks) < 4 or toks[0] != "T":
        raise TreeError("missing 'T k n q' header")
    k, n, q = int(toks[1]), int(toks[2]), int(toks[3])
    pos = 4

    def take():
        nonlocal pos
        if pos >= len(toks):
            raise TreeError("unexpected end of tree text")
        pos += 1
        return toks[pos - 1]

    def expect(tok):
        got = take()
        if got != tok:
            raise TreeError(f"expected {tok!r}, got {got!r} at token {pos - 1}")

    def parse():
        tag = take()
        if tag == "U":
            return None
        if tag == "L":
            return Leaf(_label_parse(take()))
        if tag == "D":
            expect("(")
            child = parse()
            expect(")")
            return Dummy(child)
        if tag == "Q":
            j, i = int(take()), int(take())
            expect("(")
            kids = tuple(parse() for _ in range(q))
            expect(")")
            return Query(j, i, kids)
        raise TreeError(f"unknown tag {tag!r} at token {pos - 1}")

    root = parse()
    if pos != len(toks):
        raise TreeError("trailing tokens after tree")
    return DecisionTree(k, n, root, Alphabet(q))


__all__ = [
    "DecisionTree", "Dummy", "ExpThreshold", "Leaf", "LeafInfo", "Query", "TreeError",
    "TruncationParams", "PAPER_TRUNCATION", "complete_tree", "dumps", "freeze",
    "function_tree", "leaf_reach_dist", "leaf_tree", "loads", "map_tree", "meets", "olr",
    "otllr", "pad", "product_mass", "random_tree", "relabel", "run", "settled", "settled_lr",
    "split_blocks", "step", "tllr", "tllr_lr", "trim", "truncate_queries",
]
