"""Likelihood boosters, their exact verification, and the transformations between
boosters and testers.

Every guarantee here is checked with exact rationals; nothing is compared
with a tolerance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .core import DistPair, ExpThreshold, QclabError, cmp_exp, lr
from .rng import SplitMix64
from .dtree import (
    DecisionTree,
    TreeError,
    freeze,
    olr,
    product_mass,
    relabel,
    truncate_queries,
)


class NotABooster(QclabError):
    pass


class GuaranteeViolated(QclabError):
    def __init__(self, message: str, stage: str | None = None):
        super().__init__(f"[{stage}] {message}" if stage else message)
        self.stage = stage


class NoGap(QclabError):
    pass


class EnumerationCapExceeded(QclabError):
    pass


@dataclass(frozen=True)
class BoosterParams:
    delta: Fraction
    M: object  # Fraction, ExpThreshold or math.inf
    eps: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "delta", Fraction(self.delta))
        object.__setattr__(self, "eps", Fraction(self.eps))
        if not isinstance(self.M, ExpThreshold) and self.M != math.inf:
            object.__setattr__(self, "M", Fraction(self.M))
            if self.M <= 0:
                raise ValueError("M must be positive")
        if not (0 <= self.delta <= 1 and 0 <= self.eps <= 1):
            raise ValueError("delta and eps must lie in [0, 1]")


@dataclass(frozen=True)
class TesterParams:
    delta0: Fraction
    delta1: Fraction

    def __post_init__(self):
        object.__setattr__(self, "delta0", Fraction(self.delta0))
        object.__setattr__(self, "delta1", Fraction(self.delta1))
        if not (0 <= self.delta0 <= 1 and 0 <= self.delta1 <= 1):
            raise ValueError("tester parameters must lie in [0, 1]")


@dataclass(frozen=True)
class BoosterCheck:
    ok: bool
    good_mass: Fraction  # Pr_{D1^k}[reach a good leaf]

    def __bool__(self):
        return self.ok


def _good_mass(t: DecisionTree, pair: DistPair, good) -> Fraction:
    d1s = [pair.d1] * t.k
    total = Fraction(0)
    for info in t.leaves():
        p = product_mass(d1s, info.cells)
        if p and good(info.cells):
            total += p
    return total


def check_likelihood_booster(t: DecisionTree, pair: DistPair, p: BoosterParams) -> BoosterCheck:
    if t.k != 1:
        raise ValueError("a likelihood booster reads a single sample")
    return check_overall_booster(t, pair, 1, p)


def check_overall_booster(t: DecisionTree, pair: DistPair, k: int, p: BoosterParams) -> BoosterCheck:
    if t.k != k:
        raise ValueError(f"tree reads {t.k} samples, expected {k}")
    mass = _good_mass(t, pair, lambda cells: olr(pair, cells).ge(p.M))
    return BoosterCheck(mass >= 1 - p.delta, mass)


def check_uniform_booster(t: DecisionTree, pair: DistPair, k: int, p: BoosterParams) -> BoosterCheck:
    if t.k != k:
        raise ValueError(f"tree reads {t.k} samples, expected {k}")
    need = (1 - p.eps) * k

    def good(cells):
        return sum(lr(pair, c).ge(p.M) for c in cells) >= need

    mass = _good_mass(t, pair, good)
    return BoosterCheck(mass >= 1 - p.delta, mass)


def accept_probabilities(t: DecisionTree, pair: DistPair) -> tuple[Fraction, Fraction]:
    """Exact (Pr[accept | D0^k], Pr[accept | D1^k])."""
    out = []
    for d in (pair.d0, pair.d1):
        ds = [d] * t.k
        out.append(sum((product_mass(ds, info.cells) for info in t.leaves()
                        if info.leaf.label == "accept"), Fraction(0)))
    return out[0], out[1]


# --- booster <-> tester ---------------------------------------------------------

def soundness_mass(t: DecisionTree, pair: DistPair, M) -> Fraction:
    """D0^k-mass of leaves whose overall likelihood ratio is at least M."""
    d0s = [pair.d0] * t.k
    total = Fraction(0)
    for info in t.leaves():
        p = product_mass(d0s, info.cells)
        if p and olr(pair, info.cells).ge(M):
            total += p
    return total


def booster_to_tester(t: DecisionTree, pair: DistPair, p: BoosterParams) -> DecisionTree:
    """Same queries; accept exactly at leaves with (overall) likelihood ratio >= M."""
    check = check_overall_booster(t, pair, t.k, p)
    if not check:
        raise NotABooster(f"good-leaf mass {check.good_mass} < 1 - {p.delta}")
    def label(info):
        # leaves unreachable under both hypotheses carry no likelihood ratio
        if not (product_mass([pair.d0] * t.k, info.cells) or product_mass([pair.d1] * t.k, info.cells)):
            return "reject"
        return "accept" if olr(pair, info.cells).ge(p.M) else "reject"

    tester = relabel(t, label)
    a0, a1 = accept_probabilities(tester, pair)
    if a1 < 1 - p.delta:
        raise GuaranteeViolated(f"completeness {a1} < {1 - p.delta}")
    if isinstance(p.M, ExpThreshold):
        bound_ok = a0 == 0 or cmp_exp(a0, -p.M.tau) <= 0
    elif p.M == math.inf:
        bound_ok = a0 == 0
    else:
        bound_ok = a0 * p.M <= 1
    if not bound_ok:
        raise GuaranteeViolated(f"soundness {a0} > 1/M")
    return tester


def tester_to_booster_params(t: DecisionTree, pair: DistPair, tp: TesterParams, M,
                             stage: str | None = None) -> BoosterParams:
    """An accept/reject tree with the given errors is a (M*delta0 + delta1, M) booster."""
    a0, a1 = accept_probabilities(t, pair)
    if a0 > tp.delta0 or 1 - a1 > tp.delta1:
        raise GuaranteeViolated(f"tester errors ({a0}, {1 - a1}) exceed ({tp.delta0}, {tp.delta1})", stage)
    M = Fraction(M)
    delta = min(Fraction(1), M * tp.delta0 + tp.delta1)
    p = BoosterParams(delta, M)
    check = check_overall_booster(t, pair, t.k, p)
    if not check:
        raise GuaranteeViolated(f"booster mass {check.good_mass} < {1 - delta}", stage)
    return p


def corr_to_overall(t: DecisionTree, pair: DistPair, k: int, tp: TesterParams, M,
                    stage: str | None = None) -> BoosterParams:
    if t.k != k:
        raise ValueError(f"tree reads {t.k} samples, expected {k}")
    return tester_to_booster_params(t, pair, tp, M, stage)


# --- uniform booster -> single-sample booster ------------------------------------

@dataclass(frozen=True)
class SingleBooster:
    tree: DecisionTree
    slot: int
    frozen: tuple  # strings for the other slots, in slot order
    good_mass: Fraction
    params: BoosterParams
    depth_bound: int
    early_halt_mass: Fraction  # averaged over slots, under D1^k
    certified: bool
    candidates: int = field(default=0)


def early_halt_mass(t: DecisionTree, pair: DistPair, limit: int) -> Fraction:
    """Pr over uniform slot j and x ~ D1^k that t queries sample j more than ``limit`` times."""
    d1s = [pair.d1] * t.k
    total = Fraction(0)
    for info in t.leaves():
        p = product_mass(d1s, info.cells)
        if not p:
            continue
        for j in range(t.k):
            if sum(1 for jj, _ in info.queries if jj == j) > limit:
                total += p
    return total / t.k


def shrink(t: DecisionTree, slot: int, frozen: Sequence[str], limit: int) -> DecisionTree:
    """Fix all samples but ``slot``; halt at the (limit+1)-th query to ``slot``."""
    cut = truncate_queries(t, lambda j, i: j == slot, limit)
    others = [j for j in range(t.k) if j != slot]
    return freeze(cut, dict(zip(others, frozen)), {slot: 0}, 1)


def uniform_to_single(t: DecisionTree, pair: DistPair, k: int, p: BoosterParams, C,
                      budget: int = 200_000, samples: int = 2000, seed: int = 0) -> SingleBooster:
    check = check_uniform_booster(t, pair, k, p)
    if not check:
        raise NotABooster(f"uniform good mass {check.good_mass} < {1 - p.delta}")
    C = Fraction(C)
    limit = math.floor(C * t.query_depth() / k)
    halt = early_halt_mass(t, pair, limit)
    if halt * C > 1:
        raise GuaranteeViolated(f"early-halt mass {halt} exceeds 1/C")
    support = pair.d1.support
    single_params = BoosterParams(min(Fraction(1), p.delta + p.eps + 1 / C), p.M)
    space = k * len(support) ** (k - 1)
    certified = space <= budget
    if certified:
        choices = ((j, fz) for j in range(k) for fz in itertools.product(support, repeat=k - 1))
    else:
        rng = SplitMix64(seed)
        choices = ((rng.below(k), tuple(support[rng.below(len(support))] for _ in range(k - 1)))
                   for _ in range(samples))
    best = None
    count = 0
    for j, fz in choices:
        count += 1
        try:
            tree = shrink(t, j, fz, limit)
        except TreeError:
            continue  # these frozen samples only reach trimmed branches
        mass = check_likelihood_booster(tree, pair, single_params).good_mass
        key = (mass, tuple(-ord(ch) for ch in "".join(fz)), -j)
        if best is None or key > best[0]:
            best = (key, j, fz, tree, mass)
    if best is None:
        raise GuaranteeViolated("no frozen choice reaches a live branch")
    _, j, fz, tree, mass = best
    if tree.query_depth() > limit:
        raise GuaranteeViolated(f"depth {tree.query_depth()} exceeds {limit}")
    if certified and mass < 1 - single_params.delta:
        raise GuaranteeViolated(f"best freeze reaches good mass {mass} < {1 - single_params.delta}")
    return SingleBooster(tree, j, tuple(fz), mass, single_params, limit, halt, certified, count)


# --- amplification ------------------------------------------------------------

@dataclass(frozen=True)
class AmplifiedTester:
    runs: int
    p0: Fraction
    p1: Fraction
    error0: Fraction  # Pr[accept | hypothesis 0]
    error1: Fraction  # Pr[reject | hypothesis 1]

    def accepts(self, count: int) -> bool:
        """Majority rule with the threshold at the midpoint of (p0, p1)."""
        above = 2 * count > self.runs * (self.p0 + self.p1)
        return above if self.p1 > self.p0 else not above


def _binomial_terms(m: int, p: Fraction):
    a, b = p.numerator, p.denominator
    c = b - a
    term = c ** m  # C(m, 0) a^0 c^m
    denom = b ** m
    yield term, denom
    for i in range(m):
        if a == 0:
            term = 0
        elif c == 0:
            term = a ** (i + 1) if i + 1 == m else 0
        else:
            term = term * (m - i) * a // ((i + 1) * c)
        yield term, denom


def _count_mass(m: int, p: Fraction, accept) -> Fraction:
    num = 0
    denom = 1
    for i, (term, denom) in enumerate(_binomial_terms(m, p)):
        if accept(i):
            num += term
    return Fraction(num, denom)


def _errors(m: int, p0: Fraction, p1: Fraction) -> tuple[Fraction, Fraction]:
    tmp = AmplifiedTester(m, p0, p1, Fraction(0), Fraction(0))
    e0 = _count_mass(m, p0, tmp.accepts)
    e1 = 1 - _count_mass(m, p1, tmp.accepts)
    return e0, e1


def _float_errors(m: int, p0: Fraction, p1: Fraction) -> tuple[float, float]:
    from scipy.stats import binom

    cut = math.floor(m * (p0 + p1) / 2)  # exact, so the float screen uses the true vote boundary
    f0, f1 = float(p0), float(p1)
    if p1 > p0:
        return float(binom.sf(cut, m, f0)), float(binom.cdf(cut, m, f1))
    return float(binom.cdf(cut, m, f0)), float(binom.sf(cut, m, f1))


def amplify(p0, p1, delta_gap, eps_target, max_runs: int = 100_000) -> AmplifiedTester:
    """Least number of independent runs whose midpoint vote has both errors <= eps_target.

    Candidate run counts are screened in floating point and any count that is
    not clearly rejected is decided with exact binomial sums.
    """
    p0, p1 = Fraction(p0), Fraction(p1)
    eps_target = Fraction(eps_target)
    if abs(p1 - p0) < 2 * Fraction(delta_gap) or p0 == p1:
        raise NoGap(f"|p0 - p1| = {abs(p1 - p0)} < 2 * {delta_gap}")
    eps_f = float(eps_target)
    for m in range(1, max_runs + 1):
        if m > 50:
            f0, f1 = _float_errors(m, p0, p1)
            if max(f0, f1) > eps_f * (1 + 1e-6) + 1e-12:
                continue
        e0, e1 = _errors(m, p0, p1)
        if e0 <= eps_target and e1 <= eps_target:
            return AmplifiedTester(m, p0, p1, e0, e1)
    raise GuaranteeViolated(f"no run count up to {max_runs} reaches error {eps_target}")
