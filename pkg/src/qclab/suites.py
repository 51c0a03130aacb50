"""Named invariant suites shared by ``qclab verify`` and the acceptance tests.

Each suite returns a flat dict: suite, seed, instances, violations, a suite
specific statistic, and ok.
"""

from __future__ import annotations

from fractions import Fraction

from . import bootstrap, compose, exact, reductions
from .boosters import GuaranteeViolated, soundness_mass
from .core import BINARY, Dist, DistPair, PartialFunction, and_fn, dictator_fn, or_fn, xor_fn
from .dtree import TruncationParams, leaf_reach_dist, olr, product_mass, random_tree, relabel
from .rng import SplitMix64

TOY_TRUNC = TruncationParams(Fraction(1), 5.0)


def helper_suite(grid: int = 10_000, **_) -> dict:
    rep = bootstrap.helper_inequality_check(points=grid)
    return {"suite": "helper", "instances": rep.points, "violations": rep.violations,
            "max_violation": rep.max_violation, "ok": rep.ok}


def submartingale_suite(seed: int = 7, instances: int = 10_000, **_) -> dict:
    const = bootstrap.derive_safe_constant(TOY_TRUNC)
    rep = bootstrap.random_one_step_suite(instances, seed, TOY_TRUNC)
    paper = bootstrap.derive_safe_constant(TruncationParams(Fraction(100), 500.0))
    ok = rep.ok and const == Fraction(1, 12) and paper >= Fraction(1, 1000)
    return {"suite": "submartingale", "seed": seed, "instances": rep.vertices, "violations": rep.violations,
            "min_slack": rep.min_slack, "constant": const, "paper_constant": paper, "ok": ok}


def random_rational(rng: SplitMix64, lo: int = 1, hi: int = 8, den: int = 4) -> Fraction:
    return Fraction(lo * den + rng.below((hi - lo) * den + 1), den)


def soundness_suite(seed: int = 7, instances: int = 1000, **_) -> dict:
    """Sum of D0 over leaves with olr >= M is at most (1/M) sum of D1 there, hence at most 1/M."""
    rng = SplitMix64(seed)
    bad = 0
    worst = Fraction(0)  # max of M * D0(U)
    for _ in range(instances):
        n = 2 + rng.below(2)
        pair = bootstrap.random_pair(rng, n)
        k = 1 + rng.below(2)
        t = random_tree(rng, k, n, 1 + rng.below(4))
        M = Fraction(1, 2) if rng.below(5) == 0 else random_rational(rng)
        u0 = soundness_mass(t, pair, M)
        d1s = [pair.d1] * k
        u1 = Fraction(0)
        for info in t.leaves():
            p = product_mass(d1s, info.cells)
            if p and olr(pair, info.cells).ge(M):
                u1 += p
        if u0 * M > u1 or u0 * M > 1:
            bad += 1
        worst = max(worst, u0 * M)
    return {"suite": "soundness", "seed": seed, "instances": instances, "violations": bad,
            "max_scaled_mass": worst, "ok": bad == 0}


def bicorr_testers(rng: SplitMix64, pair: DistPair, k: int, count: int):
    """Optimal testers at every depth plus random trees with optimal labels."""
    inst = reductions.BicorrInstance(pair, k)
    for q in range(0, 2 * k * pair.n + 1):
        yield reductions.bicorr_tree(pair, k, q)
    for _ in range(count):
        t = random_tree(rng, 2 * k, pair.n, 1 + rng.below(2 * pair.n), stop_weight=1)
        p01 = leaf_reach_dist(t, inst.dists(0, 1))
        p10 = leaf_reach_dist(t, inst.dists(1, 0))
        yield relabel(t, lambda info: "accept" if p10[info.address] > p01[info.address] else "reject")


def hybrid_suite(seed: int = 7, instances: int = 200, **_) -> dict:
    """Hybrid argument on bicorrelated testers with exact error <= 1/3."""
    rng = SplitMix64(seed)
    bad = tested = triangles = 0
    worst = Fraction(0)
    while tested < instances:
        n = 2
        pair = bootstrap.random_pair(rng, n)
        k = 1 + rng.below(2)
        for t in bicorr_testers(rng, pair, k, 6):
            inst = reductions.BicorrInstance(pair, k)
            eps = inst.error(t)
            dists = [leaf_reach_dist(t, inst.dists(a, b)) for a in (0, 1) for b in (0, 1)]
            for p in dists:
                for q in dists:
                    for r in dists:
                        triangles += 1
                        if reductions.statistical_distance(p, r) > (reductions.statistical_distance(p, q)
                                                                    + reductions.statistical_distance(q, r)):
                            bad += 1
            if eps > Fraction(1, 3):
                continue
            tested += 1
            try:
                res = reductions.bicorr_to_corr(t, pair, k)
            except GuaranteeViolated:
                bad += 1
                continue
            worst = max(worst, res.mixture_error)
            if res.mixture_error > Fraction(5, 12) or res.best_error > res.mixture_error:
                bad += 1
            if tested >= instances:
                break
    return {"suite": "hybrid", "seed": seed, "instances": tested, "triangles": triangles,
            "violations": bad, "max_corr_error": worst, "ok": bad == 0}


def toy_inner_pairs() -> dict:
    def uni(xs):
        return Dist.uniform(xs)

    odd3 = [x for x in BINARY.strings(3) if x.count("1") % 2]
    even3 = [x for x in BINARY.strings(3) if x.count("1") % 2 == 0]
    maj = PartialFunction.from_callable(3, lambda x: int(x.count("1") >= 2))
    return {
        "dictator2": DistPair(uni(["00", "01"]), uni(["10", "11"]), dictator_fn(2)),
        "xor2": DistPair(uni(["00", "11"]), uni(["01", "10"]), xor_fn(2)),
        "xor3": DistPair(uni(even3), uni(odd3), xor_fn(3)),
        "and3": DistPair(Dist.from_weights({"000": 1, "011": 2, "101": 2, "110": 2}), uni(["111"]), and_fn(3)),
        "maj3": DistPair(Dist.from_weights({"000": 1, "001": 2, "010": 2, "100": 2}),
                         Dist.from_weights({"111": 1, "110": 2, "101": 2, "011": 2}), maj),
    }


def truncation_suite(**_) -> dict:
    bad = count = 0
    rows = []
    for fname, f in (("and2", and_fn(2)), ("or2", or_fn(2))):
        for gname, pair in toy_inner_pairs().items():
            count += 1
            try:
                rep = compose.composition_gap_report(f, pair.f, pair)
            except GuaranteeViolated:
                bad += 1
                continue
            ok = (rep.blocks.weighted_sum <= rep.blocks.q
                  and rep.blocks.q_blocks[rep.blocks.selected] * rep.fbs <= rep.blocks.q
                  and rep.truncation.ok
                  and max(rep.bicorr.error_01, rep.bicorr.error_10) <= Fraction(2, 5))
            amp = rep.bicorr.amplified
            final = (max(amp.error0, amp.error1) if amp else max(rep.bicorr.error_01, rep.bicorr.error_10))
            ok = ok and final <= Fraction(1, 3)
            bad += not ok
            rows.append({"outer": fname, "inner": gname, "q": rep.blocks.q, "cost": rep.bicorr.cost,
                         "ratio": rep.ratio})
    return {"suite": "truncation", "instances": count, "violations": bad, "rows": rows, "ok": bad == 0}


def selection_suite(**_) -> dict:
    bad = 0
    worst = Fraction(0)
    for n in (5, 6, 7):
        cert = reductions.selection_bias_certificate(n)
        bad += not cert.ok
        worst = max(worst, cert.max_deviation)
    return {"suite": "selection", "instances": 3, "violations": bad, "max_deviation": worst, "ok": bad == 0}


def all_functions(n: int):
    xs = list(BINARY.strings(n))
    for bits in range(2 ** len(xs)):
        yield PartialFunction(n, {x: (bits >> i) & 1 for i, x in enumerate(xs)})


def fbs_suite(**_) -> dict:
    bad = count = 0
    for f in all_functions(3):
        count += 1
        a = exact.fbs(f)
        b = exact.fbs_vertex(f)
        if a.value != b.value or exact.bs(f) > a.value or not a.check(f):
            bad += 1
    xor_ok = all(exact.fbs(xor_fn(n)).value == n for n in range(1, 5))
    bad += not xor_ok
    return {"suite": "fbs", "instances": count, "violations": bad, "xor_ok": xor_ok, "ok": bad == 0}


def rdt_suite(seed: int = 7, **_) -> dict:
    """fbs against the tiny randomized depth over all n=3 functions.

    The asserted form is (1 - 2 eps) fbs <= depth; functions with fbs above
    the depth itself are counted and listed (as truth tables over 000..111),
    not treated as failures. The Yao
    direction dt_eps(f, D) <= depth is checked on uniform D and one random D.
    """
    eps = Fraction(1, 3)
    rng = SplitMix64(seed)
    bad = count = 0
    above = []
    worst = Fraction(0)
    xs = list(BINARY.strings(3))
    for f in all_functions(3):
        count += 1
        r = exact.rdt_tiny(f, eps)
        v = exact.fbs(f).value
        if (1 - 2 * eps) * v > r.depth:
            bad += 1
        if v > r.depth:
            above.append("".join(str(f(x)) for x in xs))
        if r.depth:
            worst = max(worst, v / r.depth)
        rand = Dist.from_weights({x: 1 + rng.below(4) for x in xs})
        for d in (Dist.uniform(xs), rand):
            if exact.dt_eps(f, d, eps) > r.depth:
                bad += 1
    return {"suite": "rdt", "seed": seed, "instances": count, "violations": bad,
            "fbs_above_depth": len(above), "max_fbs_ratio": worst, "examples": above[:5], "ok": bad == 0}


SUITE_FUNCS = {
    "helper": helper_suite,
    "submartingale": submartingale_suite,
    "soundness": soundness_suite,
    "hybrid": hybrid_suite,
    "truncation": truncation_suite,
    "selection": selection_suite,
    "fbs": fbs_suite,
    "rdt": rdt_suite,
}


def run_suite(name: str, seed: int = 7, instances: int | None = None, grid: int | None = None) -> dict:
    kw: dict = {"seed": seed}
    if instances is not None:
        kw["instances"] = instances
    if grid is not None:
        kw["grid"] = grid
    return SUITE_FUNCS[name](**kw)
