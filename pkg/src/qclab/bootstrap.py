"""The bootstrapping tree that turns overall boosters into a uniform booster,
and exact checks of the inequalities behind its analysis.

The tree reads K samples and runs in phases of exactly L steps. At each phase
start it halts if fewer than ``unsettled_floor`` samples are unsettled;
otherwise it picks k unsettled samples that share a restriction pattern v and
runs a depth-L overall booster for the pair conditioned on v on them, stopping
the phase early as soon as one of them settles. Short phases are padded with
dummy vertices.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

from .boosters import BoosterParams, check_overall_booster, check_uniform_booster
from .core import (
    DistPair,
    ExpThreshold,
    QclabError,
    cell_mass,
    cmp_exp,
    free_positions,
    full_cell,
    lr,
    restrict,
)
from .dtree import (
    DecisionTree,
    Dummy,
    Leaf,
    Query,
    TruncationParams,
    olr,
    otllr,
    product_mass,
    settled,
    step,
    tllr,
)
from .rng import SplitMix64

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

LOG_TOL = 1e-9


class OracleDepthExceeded(QclabError):
    pass


class OracleMissing(QclabError):
    pass


class OracleNotBooster(QclabError):
    pass


class QueriesSettledSample(QclabError):
    pass


class DegenerateParams(QclabError):
    pass


# --- constants ---------------------------------------------------------------

def derive_safe_constant(trunc: TruncationParams) -> Fraction:
    """Largest c this argument gives for E[delta] >= c * E[delta^2] on one query.

    Settling outcomes move tllr by at least s - tau and at most s + tau, giving
    (s - tau - 1) / (s + tau)^2; non-settling outcomes give 1 / (4 tau) via the
    t ln t inequality. The first term peaks at 1 / (8 tau + 4) (at s = 3 tau + 2),
    so in practice it always binds.
    """
    tau = Fraction(trunc.tau)
    s = Fraction(trunc.settled_value)
    if s <= tau + 1:
        raise DegenerateParams(f"settled value {s} must exceed tau + 1 = {tau + 1}")
    return min((s - tau - 1) / (s + tau) ** 2, 1 / (4 * tau))


def phase_progress_constant(c: float, booster_delta, M) -> float:
    """Expected per-phase progress guaranteed by a (delta, M) overall booster.

    Solves gamma = c (1 - delta - 2 gamma) (ln M - 1)^2, the fixed point at which
    the settled-count case and the variance argument meet.
    """
    a = math.log(float(M)) - 1.0
    if a <= 0:
        raise DegenerateParams("booster threshold M must exceed e")
    c = float(c)
    return c * (1 - float(booster_delta)) * a * a / (1 + 2 * c * a * a)


def markov_failure_bound(cfg: "BootstrapConfig") -> float:
    """Bound on Pr[extended progress <= max pre-halt progress]."""
    top = (cfg.trunc.settled_value + 1) * cfg.K
    return top / (cfg.dummy_credit * cfg.C * cfg.K)


# --- configuration ---------------------------------------------------------------

@dataclass(frozen=True)
class BootstrapConfig:
    K: int
    k: int
    L: int
    C: int = 4
    trunc: TruncationParams = TruncationParams(Fraction(100), 500.0)
    oracle_params: BoosterParams = BoosterParams(Fraction(1, 10), Fraction(25))
    unsettled_floor: int | None = None
    dummy_credit: float = 0.001
    oracle: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.L < 1 or self.C < 1 or self.k < 1 or self.K < 1:
            raise ValueError("K, k, L and C must be positive")

    def floor(self, alphabet_size: int, n: int) -> int:
        if self.unsettled_floor is not None:
            return self.unsettled_floor
        return self.k * (alphabet_size + 1) ** n

    def hypothesis_holds(self, alphabet_size: int, n: int) -> bool:
        return self.K >= 1000 * self.k * (alphabet_size + 1) ** n

    @property
    def phases(self) -> int:
        return self.C * self.K

    def to_json(self) -> str:
        return json.dumps({
            "K": self.K, "k": self.k, "L": self.L, "C": self.C,
            "tau": str(self.trunc.tau), "settled_value": self.trunc.settled_value,
            "oracle_delta": str(self.oracle_params.delta), "oracle_M": str(self.oracle_params.M),
            "unsettled_floor": self.unsettled_floor, "dummy_credit": self.dummy_credit,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "BootstrapConfig":
        raw = json.loads(text)
        return cls(
            K=int(raw["K"]), k=int(raw["k"]), L=int(raw["L"]), C=int(raw.get("C", 4)),
            trunc=TruncationParams(Fraction(str(raw.get("tau", 100))), float(raw.get("settled_value", 500))),
            oracle_params=BoosterParams(Fraction(str(raw.get("oracle_delta", "1/10"))),
                                        Fraction(str(raw.get("oracle_M", 25)))),
            unsettled_floor=raw.get("unsettled_floor"),
            dummy_credit=float(raw.get("dummy_credit", 0.001)),
        )


# --- default booster oracle ---------------------------------------------------------

def dp_overall_booster(pair: DistPair, k: int, L: int, M, start: str | None = None) -> DecisionTree:
    """Depth-<=L k-sample tree maximizing Pr_{D1^k}[olr(leaf) >= M], searched exactly.

    ``start`` is the common restriction of all k samples; only its free
    positions are queried. Stopping is preferred on ties, then the lowest
    (sample, position).
    """
    n = pair.n
    start = full_cell(n) if start is None else start
    syms = pair.alphabet.symbols
    d0s, d1s = [pair.d0] * k, [pair.d1] * k
    memo: dict = {}

    def stop_value(cells):
        m1 = product_mass(d1s, cells)
        if m1 and olr(pair, cells).ge(M):
            return m1
        return Fraction(0)

    def actions(cells):
        for j, c in enumerate(cells):
            for i in free_positions(c):
                yield j, i, [step(cells, j, i, s) for s in syms]

    def value(cells, d):
        key = (tuple(sorted(cells)), d)
        if key in memo:
            return memo[key]
        best = stop_value(cells)
        m1 = product_mass(d1s, cells)
        if d > 0 and best < m1:
            for _, _, kids in actions(cells):
                v = sum((value(c, d - 1) for c in kids if product_mass(d1s, c)), Fraction(0))
                if v > best:
                    best = v
        memo[key] = best
        return best

    def build(cells, d):
        target = value(cells, d)
        if stop_value(cells) == target:
            return Leaf()
        for j, i, kids in actions(cells):
            if sum((value(c, d - 1) for c in kids if product_mass(d1s, c)), Fraction(0)) == target:
                return Query(j, i, tuple(
                    build(c, d - 1) if product_mass(d1s, c) or product_mass(d0s, c) else None for c in kids))
        raise AssertionError("memo inconsistent")

    return DecisionTree(k, n, build(tuple(start for _ in range(k)), L), pair.alphabet)


# --- the algorithm ---------------------------------------------------------------

STOP = "stop"


@dataclass(frozen=True)
class State:
    cells: tuple
    phase: int
    bucket: tuple | None = None
    node: object = None
    steps: int = 0


@dataclass(frozen=True)
class TraceRecord:
    step: int
    phase: int
    settled: int
    otllr: float
    progress: float
    dummy: bool


@dataclass(frozen=True)
class BootstrapRun:
    path: tuple  # states along the path
    trace: tuple
    final_cells: tuple
    reason: str


class Bootstrapper:
    def __init__(self, cfg: BootstrapConfig, pair: DistPair):
        self.cfg, self.pair = cfg, pair
        self.n, self.syms = pair.n, pair.alphabet.symbols
        self.floor = cfg.floor(pair.alphabet.size, pair.n)
        self.oracles: dict[str, DecisionTree] = {}
        self._settled: dict[str, bool] = {}

    # predicates
    def is_settled(self, c: str) -> bool:
        hit = self._settled.get(c)
        if hit is None:
            hit = self._settled[c] = settled(self.pair, c, self.cfg.trunc)
        return hit

    def oracle_for(self, pattern: str) -> DecisionTree:
        if pattern not in self.oracles:
            cfg = self.cfg
            if cfg.oracle is not None:
                tree = cfg.oracle(pattern)
                if tree is None:
                    raise OracleMissing(f"no booster supplied for pattern {pattern!r}")
            else:
                tree = dp_overall_booster(self.pair.conditioned(pattern), cfg.k, cfg.L,
                                          cfg.oracle_params.M, start=pattern)
            if tree.query_depth() > cfg.L or tree.depth() > cfg.L:
                raise OracleDepthExceeded(f"booster for {pattern!r} has depth {tree.depth()} > L = {cfg.L}")
            self.oracles[pattern] = tree
        return self.oracles[pattern]

    def choose_bucket(self, cells) -> tuple | None:
        groups: dict[str, list[int]] = {}
        for j, c in enumerate(cells):
            if not self.is_settled(c):
                groups.setdefault(c, []).append(j)
        for pattern in sorted(groups):
            if len(groups[pattern]) >= self.cfg.k:
                return tuple(groups[pattern][: self.cfg.k])
        return None

    def unsettled(self, cells) -> int:
        return sum(not self.is_settled(c) for c in cells)

    def resolve(self, st: State):
        """Return ('leaf', reason, st) | ('dummy', next_state, st) | ('query', j, i, st)."""
        cfg = self.cfg
        while True:
            if st.bucket is None:
                if st.phase >= cfg.phases:
                    return ("leaf", "phase-limit", st)
                if self.unsettled(st.cells) < self.floor:
                    return ("leaf", "halt", st)
                bucket = self.choose_bucket(st.cells)
                if bucket is None:
                    return ("leaf", "no-bucket", st)
                tree = self.oracle_for(st.cells[bucket[0]])
                st = State(st.cells, st.phase, bucket, tree.root, 0)
            if st.steps == cfg.L:
                st = State(st.cells, st.phase + 1)
                continue
            node = st.node
            if node is STOP or isinstance(node, Leaf):
                return ("dummy", replace(st, node=STOP, steps=st.steps + 1), st)
            if isinstance(node, Dummy):
                return ("dummy", replace(st, node=node.child, steps=st.steps + 1), st)
            j = st.bucket[node.j]
            if self.is_settled(st.cells[j]):
                raise QueriesSettledSample(f"sample {j} queried while settled")
            return ("query", j, node.i, st)

    def child(self, st: State, j: int, i: int, sym_index: int) -> State | None:
        node = st.node.children[sym_index]
        cells = step(st.cells, j, i, self.syms[sym_index])
        if node is None:
            return None
        if self.is_settled(cells[j]):
            node = STOP
        return State(cells, st.phase, st.bucket, node, st.steps + 1)

    def alive(self, cells) -> bool:
        K = self.cfg.K
        return bool(product_mass([self.pair.d1] * K, cells) or product_mass([self.pair.d0] * K, cells))

    def build_tree(self) -> DecisionTree:
        def build(st: State):
            kind, *rest = self.resolve(st)
            if kind == "leaf":
                return Leaf(rest[0])
            if kind == "dummy":
                return Dummy(build(rest[0]))
            j, i, st = rest
            kids = []
            for idx in range(len(self.syms)):
                ch = self.child(st, j, i, idx)
                kids.append(build(ch) if ch is not None and self.alive(ch.cells) else None)
            return Query(j, i, tuple(kids))

        start = State(tuple(full_cell(self.n) for _ in range(self.cfg.K)), 0)
        return DecisionTree(self.cfg.K, self.n, build(start), self.pair.alphabet)

    def record(self, t: int, cells, dummy: bool) -> TraceRecord:
        s = sum(self.is_settled(c) for c in cells)
        o = otllr(self.pair, cells, self.cfg.trunc)
        return TraceRecord(t, t // self.cfg.L, s, o, s + o, dummy)

    def run(self, x: Sequence[str]) -> BootstrapRun:
        if len(x) != self.cfg.K or any(len(s) != self.n for s in x):
            raise ValueError("input must be K strings of length n")
        st = State(tuple(full_cell(self.n) for _ in range(self.cfg.K)), 0)
        path, trace = [], []
        t = 0
        while True:
            kind, *rest = self.resolve(st)
            path.append(rest[-1])
            trace.append(self.record(t, rest[-1].cells, kind == "dummy"))
            if kind == "leaf":
                return BootstrapRun(tuple(path), tuple(trace), rest[-1].cells, rest[0])
            if kind == "dummy":
                st = rest[0]
            else:
                j, i, cur = rest
                nxt = self.child(cur, j, i, self.syms.index(x[j][i]))
                if nxt is None:
                    raise QclabError("input leaves the booster's support")
                st = nxt
            t += 1


def run_bootstrap(cfg: BootstrapConfig, pair: DistPair, x: Sequence[str]) -> BootstrapRun:
    return Bootstrapper(cfg, pair).run(x)


def build_bootstrap_tree(cfg: BootstrapConfig, pair: DistPair) -> tuple[DecisionTree, Bootstrapper]:
    b = Bootstrapper(cfg, pair)
    return b.build_tree(), b


def format_trace(trace: Sequence[TraceRecord]) -> str:
    """``step phase settled otllr progress dummy`` per line; floats with 12 significant digits."""
    return "".join(f"{r.step} {r.phase} {r.settled} {r.otllr:.12g} {r.progress:.12g} {int(r.dummy)}\n"
                   for r in trace)


# --- sub-martingale check -------------------------------------------------------------

@dataclass(frozen=True)
class OneStep:
    mean: float
    second_moment: float
    slack: float  # mean - c * second_moment

    def ok(self, tol: float = LOG_TOL) -> bool:
        return self.slack >= -tol


def one_step(pair: DistPair, c: str, i: int, trunc: TruncationParams, const) -> OneStep:
    """Exact-probability moments of the tllr change when position i of an unsettled cell is queried."""
    if settled(pair, c, trunc):
        raise QueriesSettledSample(f"cell {c!r} is settled")
    base = tllr(pair, c, trunc)
    m1 = cell_mass(pair.d1, c)
    if not m1:
        raise ValueError(f"cell {c!r} is unreachable under D1")
    mean = second = 0.0
    for s in pair.alphabet.symbols:
        child = restrict(c, i, s)
        p = cell_mass(pair.d1, child) / m1
        if not p:
            continue
        w = tllr(pair, child, trunc) - base
        mean += float(p) * w
        second += float(p) * w * w
    return OneStep(mean, second, mean - float(const) * second)


@dataclass
class MartingaleReport:
    constant: Fraction
    vertices: int = 0
    violations: int = 0
    min_slack: float = math.inf

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def add(self, res: OneStep):
        self.vertices += 1
        self.min_slack = min(self.min_slack, res.slack)
        if not res.ok():
            self.violations += 1


def verify_submartingale(t: DecisionTree, pair: DistPair, K: int, trunc: TruncationParams) -> MartingaleReport:
    if t.k != K:
        raise ValueError("tree does not read K samples")
    const = derive_safe_constant(trunc)
    report = MartingaleReport(const)
    d1s = [pair.d1] * K

    def visit(node, cells):
        if node is None or isinstance(node, Leaf) or not product_mass(d1s, cells):
            return
        if isinstance(node, Dummy):
            report.add(OneStep(0.0, 0.0, 0.0))
            visit(node.child, cells)
            return
        report.add(one_step(pair, cells[node.j], node.i, trunc, const))
        for s, ch in zip(pair.alphabet.symbols, node.children):
            visit(ch, step(cells, node.j, node.i, s))

    visit(t.root, t.start())
    return report


def random_pair(rng: SplitMix64, n: int, max_weight: int = 12) -> DistPair:
    """Random total function on {0,1}^n with both values, and random rational D0, D1 on its classes."""
    from .core import Dist, PartialFunction, BINARY

    xs = list(BINARY.strings(n))
    while True:
        table = {x: rng.below(2) for x in xs}
        if 0 < sum(table.values()) < len(xs):
            break
    f = PartialFunction(n, table)
    dists = []
    for b in (0, 1):
        w = {x: 1 + rng.below(max_weight) for x in xs if table[x] == b}
        dists.append(Dist.from_weights(w))
    return DistPair(dists[0], dists[1], f)


def random_one_step_suite(count: int, seed: int, trunc: TruncationParams, n: int = 3) -> MartingaleReport:
    """One-step checks at random unsettled, D1-reachable cells of random pairs."""
    rng = SplitMix64(seed)
    const = derive_safe_constant(trunc)
    report = MartingaleReport(const)
    pair = None
    while report.vertices < count:
        if pair is None or rng.below(8) == 0:
            pair = random_pair(rng, n)
        c = "".join(rng.choice("01**") for _ in range(n))
        free = free_positions(c)
        if not free or not cell_mass(pair.d1, c) or settled(pair, c, trunc):
            continue
        report.add(one_step(pair, c, rng.choice(free), trunc, const))
    return report


# --- phase progress -----------------------------------------------------------------

@dataclass
class PhaseReport:
    target: float
    increments: list = field(default_factory=list)  # (depth, probability of vertex, increment, kind)

    @property
    def violations(self) -> int:
        return sum(1 for _, _, inc, _ in self.increments if inc < self.target - LOG_TOL)

    @property
    def ok(self) -> bool:
        return self.violations == 0

    @property
    def min_increment(self) -> float:
        return min((inc for _, _, inc, _ in self.increments), default=math.inf)


def verify_oracles(b: Bootstrapper) -> None:
    p = b.cfg.oracle_params
    for pattern, tree in b.oracles.items():
        check = check_overall_booster(tree, b.pair.conditioned(pattern), b.cfg.k, p)
        if not check:
            raise OracleNotBooster(f"booster for {pattern!r} reaches good mass {check.good_mass} < {1 - p.delta}")


def verify_phase_progress(t: DecisionTree, b: Bootstrapper, target: float | None = None,
                          extended: bool = True) -> PhaseReport:
    """Exact conditional expected progress over each reachable phase under D1^K.

    With ``extended``, phase starts at which the tree halts early count as dummy
    phases and earn exactly ``dummy_credit``.
    """
    cfg, pair = b.cfg, b.pair
    verify_oracles(b)
    if target is None:
        c = derive_safe_constant(cfg.trunc)
        target = min(cfg.dummy_credit, phase_progress_constant(c, cfg.oracle_params.delta, cfg.oracle_params.M))
    report = PhaseReport(target)
    L = cfg.L

    def progress(cells):
        return sum(b.is_settled(c) for c in cells) + otllr(pair, cells, cfg.trunc)

    def ends(node, cells, steps):
        """Yield (conditional probability, node, cells) L steps below."""
        if steps == L or node is None or isinstance(node, Leaf):
            yield Fraction(1), node, cells, steps
            return
        if isinstance(node, Dummy):
            yield from ends(node.child, cells, steps + 1)
            return
        m = cell_mass(pair.d1, cells[node.j])
        for s, ch in zip(pair.alphabet.symbols, node.children):
            nc = step(cells, node.j, node.i, s)
            p = cell_mass(pair.d1, nc[node.j]) / m
            if p:
                for q, nd, cc, st in ends(ch, nc, steps + 1):
                    yield p * q, nd, cc, st

    def visit(node, cells, depth, prob):
        if isinstance(node, Leaf):
            if extended and node.label == "halt":
                phases_left = cfg.phases - depth // L
                for _ in range(phases_left):
                    report.increments.append((depth, prob, cfg.dummy_credit, "dummy"))
            return
        base = progress(cells)
        exp = 0.0
        nxt = []
        for p, nd, cc, st in ends(node, cells, 0):
            if st != L:
                raise AssertionError(f"phase ended after {st} steps, expected {L}")
            exp += float(p) * (progress(cc) - base)
            nxt.append((p, nd, cc))
        report.increments.append((depth, prob, exp, "phase"))
        for p, nd, cc in nxt:
            visit(nd, cc, depth + L, prob * p)

    visit(t.root, t.start(), 0, Fraction(1))
    return report


# --- helper inequality ---------------------------------------------------------------

@dataclass(frozen=True)
class HelperReport:
    points: int
    max_violation: float  # max of rhs - lhs
    violations: int

    @property
    def ok(self) -> bool:
        return self.violations == 0


def helper_gap(t: float, M: float) -> float:
    """t ln t - (t - 1) - t ln^2 t / (M + 2); the inequality says this is >= 0."""
    lt = math.log(t)
    lhs = t * lt - (t - 1)
    return lhs - t * lt * lt / (M + 2)


def helper_inequality_check(Ms: Sequence[float] = (0, 0.5, 1, 2, 5), points: int = 10_000,
                            tol: float = 1e-12) -> HelperReport:
    per = max(2, points // len(Ms))
    worst = -math.inf
    bad = total = 0
    for M in Ms:
        top = math.exp(M)
        grid = [top * (i / per) for i in range(1, per // 2 + 1)]
        grid += [math.exp(-30 + (30 + M) * i / (per - per // 2)) for i in range(1, per - per // 2 + 1)]
        for t in grid:
            total += 1
            v = -helper_gap(t, M) / max(1.0, t * math.log(t) ** 2)
            worst = max(worst, v)
            if v > tol:
                bad += 1
    return HelperReport(total, worst, bad)


# --- wrong settlement and certification -------------------------------------------------

@dataclass(frozen=True)
class WrongSettlement:
    per_sample: tuple  # exact Pr_{D1^K}[sample j ends with lr < e^{-tau}]
    expected_fraction: Fraction
    ok: bool


def wrong_settlement_bound(t: DecisionTree, pair: DistPair, K: int, trunc: TruncationParams) -> WrongSettlement:
    d1s = [pair.d1] * K
    masses = [Fraction(0)] * K
    for info in t.leaves():
        p = product_mass(d1s, info.cells)
        if not p:
            continue
        for j, c in enumerate(info.cells):
            r = lr(pair, c)
            if r.is_zero or (not r.is_infinite and cmp_exp(r.value, -trunc.tau) < 0):
                masses[j] += p
    ok = all(m == 0 or cmp_exp(m, -trunc.tau) <= 0 for m in masses)
    return WrongSettlement(tuple(masses), sum(masses, Fraction(0)) / K, ok)


@dataclass(frozen=True)
class Certification:
    ok: bool
    good_mass: Fraction
    achieved_delta: Fraction
    target: BoosterParams
    hypothesis_holds: bool
    depth: int
    query_depth: int


def certify_uniform(cfg: BootstrapConfig, pair: DistPair, target: BoosterParams | None = None,
                    tree: DecisionTree | None = None) -> Certification:
    """Build the bootstrapped tree and check it as a uniform booster (default M = e^tau)."""
    if target is None:
        target = BoosterParams(Fraction(1, 10), ExpThreshold(cfg.trunc.tau), Fraction(1, 10))
    if tree is None:
        tree, _ = build_bootstrap_tree(cfg, pair)
    check = check_uniform_booster(tree, pair, cfg.K, target)
    return Certification(check.ok, check.good_mass, 1 - check.good_mass, target,
                         cfg.hypothesis_holds(pair.alphabet.size, pair.n), tree.depth(), tree.query_depth())
