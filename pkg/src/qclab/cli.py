"""Command-line entry point: ``qclab <command> ...``.

Every command prints one JSON document to stdout. Field order is fixed,
floats carry 12 significant digits and exact rationals are written as "p/q"
strings. Exit codes: 0 success, 2 parse or usage error, 3 size cap exceeded,
4 guarantee violated, 1 anything else. Failures print an error record
``{"error", "message", "stage"}``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import boosters, bootstrap, compose, exact, reductions, suites
from .boosters import BoosterParams, GuaranteeViolated, TesterParams
from .core import (
    Dist,
    DistPair,
    ExpThreshold,
    ParseError,
    PartialFunction,
    QclabError,
    dictator_fn,
    parse_dist,
    parse_function,
    parse_pair,
    xor_fn,
)
from .dtree import DecisionTree, Leaf, TruncationParams
from .rng import SplitMix64

EXIT_OK, EXIT_OTHER, EXIT_PARSE, EXIT_CAP, EXIT_GUARANTEE = 0, 1, 2, 3, 4


# --- JSON emission --------------------------------------------------------------

def jsonable(v):
    if isinstance(v, bool) or v is None or isinstance(v, (int, str)):
        return v
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            return str(v)
        return float(f"{v:.12g}")
    if isinstance(v, ExpThreshold):
        return f"exp({v.tau.numerator}/{v.tau.denominator})"
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, set, frozenset)):
        items = sorted(v) if isinstance(v, (set, frozenset)) else v
        return [jsonable(x) for x in items]
    return str(v)


def dumps(record) -> str:
    return json.dumps(jsonable(record), indent=2, ensure_ascii=False)


def emit(record, out=None):
    (out or sys.stdout).write(dumps(record) + "\n")


class UsageError(QclabError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- loading inputs ------------------------------------------------------------------

def read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise ParseError(path, 0, f"cannot read file: {e.strerror}") from None


def load_function(path: str) -> PartialFunction:
    return parse_function(read_text(path), path)


def load_dist(path: str) -> Dist:
    return parse_dist(read_text(path), path)


def load_pair(path: str, f: PartialFunction | None = None) -> DistPair:
    return parse_pair(read_text(path), path, f)


def load_json(path: str) -> dict:
    try:
        raw = json.loads(read_text(path))
    except json.JSONDecodeError as e:
        raise ParseError(path, e.lineno, e.msg) from None
    if not isinstance(raw, dict):
        raise ParseError(path, 1, "config must be a JSON object")
    return raw


def frac(v, where: str = "<config>") -> Fraction:
    try:
        return Fraction(str(v))
    except (ValueError, ZeroDivisionError):
        raise ParseError(where, 0, f"bad rational {v!r}") from None


# --- toy instances ---------------------------------------------------------------------

def toy_pair(name: str) -> DistPair:
    """Named desk-scale pairs used by the pipeline and bootstrap simulator."""
    if name == "dictator":
        return DistPair(Dist.uniform(["00", "01"]), Dist.uniform(["10", "11"]), dictator_fn(2))
    if name == "xor2":
        return DistPair(Dist.uniform(["00", "11"]), Dist.uniform(["01", "10"]), xor_fn(2))
    if name in ("maj3", "and3"):
        # unbalanced 3-bit pairs where a one-query tree already errs a little
        return suites.toy_inner_pairs()[name]
    if name.startswith("shaltiel"):
        n = int(name[len("shaltiel"):] or 5)
        f, d = exact.shaltiel_dist_intro(n)
        return DistPair.from_dist(f, d)
    raise ParseError("<config>", 0, f"unknown toy pair {name!r}")


def pair_from_config(raw: dict, base: Path) -> DistPair:
    if "toy" in raw:
        return toy_pair(str(raw["toy"]))
    f = load_function(str(base / raw["function"])) if "function" in raw else None
    if "pair" in raw:
        return load_pair(str(base / raw["pair"]), f)
    if "dist" in raw:
        if f is None:
            raise ParseError("<config>", 0, "'dist' needs 'function'")
        return DistPair.from_dist(f, load_dist(str(base / raw["dist"])))
    raise ParseError("<config>", 0, "config needs 'toy', 'pair' or 'function' + 'dist'")


# --- measures --------------------------------------------------------------------------

ALL_MEASURES = ("dt", "dt_eps", "corr", "rdt", "bs", "fbs")


def cmd_measures(args) -> dict:
    f = load_function(args.function)
    d = load_dist(args.dist) if args.dist else None
    names = [m for m in args.measures.split(",") if m] if args.measures is not None else list(ALL_MEASURES)
    eps = frac(args.eps)
    records = []
    for name in names:
        if name not in ALL_MEASURES:
            raise UsageError(f"unknown measure {name!r}; choose from {', '.join(ALL_MEASURES)}")
        params: dict = {}
        witness = None
        if name == "dt":
            value = exact.dt_exact(f)
        elif name in ("dt_eps", "corr"):
            if d is None:
                raise UsageError(f"measure {name} needs --dist")
            params["eps"] = eps
            if name == "dt_eps":
                value = exact.dt_eps(f, d, eps)
            else:
                k_max = args.k_max or f.n
                params["k_max"] = k_max
                value, k = exact.corr_eps(f, DistPair.from_dist(f, d), eps, k_max)
                witness = {"k": k}
        elif name == "rdt":
            params["eps"] = eps
            res = exact.rdt_tiny(f, eps)
            value = res.depth
            witness = {"game_value": res.value, "trees": res.n_trees}
        elif name == "bs":
            value = exact.bs(f)
        else:
            cert = exact.fbs(f)
            value = cert.value
            witness = {"x": cert.x, "blocks": [sorted(b) for b in cert.blocks], "weights": list(cert.weights)}
        rec = {"measure": name, "f": args.function, "params": params, "value": value}
        if witness is not None:
            rec["witness"] = witness
        records.append(rec)
    return {"command": "measures", "records": records}


# --- the end-to-end chain ---------------------------------------------------------------

STAGES = ("corr", "overall", "bootstrap", "uniform", "single", "tester")


@dataclass(frozen=True)
class PipelineConfig:
    """Desk-scale parameters of the corr tester -> ... -> single-sample tester chain."""
    k: int = 1
    tester_eps: Fraction = Fraction(1, 100)  # target for each one-sided corr tester error
    M: Fraction = Fraction(25)
    K: int = 4
    C: int = 2
    tau: Fraction = Fraction(1)
    settled_value: float = 5.0
    unsettled_floor: int | None = 1
    uniform_delta: Fraction = Fraction(1, 10)
    uniform_eps: Fraction = Fraction(1, 10)
    C_single: int = 10
    fault: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        kw = {}
        for key, conv in (("k", int), ("K", int), ("C", int), ("C_single", int), ("settled_value", float),
                          ("tester_eps", frac), ("M", frac), ("tau", frac), ("uniform_delta", frac),
                          ("uniform_eps", frac)):
            if key in raw:
                kw[key] = conv(raw[key])
        if "unsettled_floor" in raw:
            kw["unsettled_floor"] = None if raw["unsettled_floor"] is None else int(raw["unsettled_floor"])
        if "fault" in raw:
            kw["fault"] = raw["fault"]
            if kw["fault"] is not None and kw["fault"] not in STAGES:
                raise ParseError("<config>", 0, f"unknown fault stage {kw['fault']!r}")
        return cls(**kw)


def _stage(name: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except GuaranteeViolated as e:
        raise GuaranteeViolated(str(e).split("] ", 1)[-1], name) from None
    except exact.CapExceeded:
        raise
    except QclabError as e:
        raise GuaranteeViolated(f"{type(e).__name__}: {e}", name) from None


def run_pipeline(pair: DistPair, cfg: PipelineConfig) -> dict:
    """Run the chain with every stage's guarantee asserted exactly; a failing stage aborts by name."""
    fault = cfg.fault
    trunc = TruncationParams(cfg.tau, cfg.settled_value)
    report: dict = {"command": "pipeline", "n": pair.n}

    # 1. a correlated-samples tester from the exact DP
    def corr_stage():
        q = 0
        while True:
            t = exact.corr_tree(pair, cfg.k, q)
            a0, r1 = exact.tester_error(t, pair)
            if a0 <= cfg.tester_eps and r1 <= cfg.tester_eps:
                break
            q += 1
            if q > cfg.k * pair.n:
                raise GuaranteeViolated(f"no depth reaches one-sided error {cfg.tester_eps}")
        if fault == "corr":
            t = DecisionTree(cfg.k, pair.n, Leaf("accept"), pair.alphabet)
        a0, r1 = exact.tester_error(t, pair)
        if a0 > cfg.tester_eps or r1 > cfg.tester_eps:
            raise GuaranteeViolated(f"tester errors ({a0}, {r1}) exceed {cfg.tester_eps}")
        return t, a0, r1

    tester, a0, r1 = _stage("corr", corr_stage)
    L = max(1, tester.query_depth())
    report["corr"] = {"k": cfg.k, "depth": tester.query_depth(), "error0": a0, "error1": r1}

    # 2. the tester is an overall booster
    def overall_stage():
        t = tester
        if fault == "overall":
            t = DecisionTree(cfg.k, pair.n, Leaf("accept"), pair.alphabet)
        p = boosters.corr_to_overall(t, pair, cfg.k, TesterParams(cfg.tester_eps, cfg.tester_eps), cfg.M)
        return p

    overall = _stage("overall", overall_stage)
    report["overall"] = {"delta": overall.delta, "M": overall.M}

    # 3. bootstrapping over K samples
    def oracle(pattern):
        if fault == "bootstrap":
            return DecisionTree(cfg.k, pair.n, Leaf(), pair.alphabet)
        if pattern == "*" * pair.n:
            return tester
        return bootstrap.dp_overall_booster(pair.conditioned(pattern), cfg.k, L, overall.M, start=pattern)

    bcfg = bootstrap.BootstrapConfig(K=cfg.K, k=cfg.k, L=L, C=cfg.C, trunc=trunc, oracle_params=overall,
                                     unsettled_floor=cfg.unsettled_floor, oracle=oracle)

    def bootstrap_stage():
        t, b = bootstrap.build_bootstrap_tree(bcfg, pair)
        mart = bootstrap.verify_submartingale(t, pair, cfg.K, trunc)
        if not mart.ok:
            raise GuaranteeViolated(f"{mart.violations} sub-martingale violations")
        phases = bootstrap.verify_phase_progress(t, b)
        if not phases.ok:
            raise GuaranteeViolated(f"{phases.violations} phases below the progress target")
        wrong = bootstrap.wrong_settlement_bound(t, pair, cfg.K, trunc)
        if not wrong.ok:
            raise GuaranteeViolated("wrong-settlement mass exceeds e^-tau")
        return t, mart, phases, wrong

    btree, mart, phases, wrong = _stage("bootstrap", bootstrap_stage)
    report["bootstrap"] = {"K": cfg.K, "L": L, "phases": bcfg.phases, "depth": btree.depth(),
                           "query_depth": btree.query_depth(), "vertices_checked": mart.vertices,
                           "min_slack": mart.min_slack, "min_phase_increment": phases.min_increment,
                           "wrong_settlement": wrong.expected_fraction,
                           "hypothesis_holds": bcfg.hypothesis_holds(pair.alphabet.size, pair.n)}

    # 4. the bootstrapped tree is a uniform booster
    target = BoosterParams(cfg.uniform_delta, ExpThreshold(cfg.tau), cfg.uniform_eps)

    def uniform_stage():
        t = btree
        if fault == "uniform":
            t = DecisionTree(cfg.K, pair.n, Leaf(), pair.alphabet)
        cert = bootstrap.certify_uniform(bcfg, pair, target, tree=t)
        if not cert.ok:
            raise GuaranteeViolated(f"uniform good mass {cert.good_mass} < {1 - target.delta}")
        return cert

    cert = _stage("uniform", uniform_stage)
    report["uniform"] = {"delta": target.delta, "eps": target.eps, "M": target.M, "good_mass": cert.good_mass}

    # 5. uniform -> single-sample booster
    def single_stage():
        sb = boosters.uniform_to_single(btree, pair, cfg.K, target, cfg.C_single)
        if fault == "single":
            sb = boosters.SingleBooster(DecisionTree(1, pair.n, Leaf(), pair.alphabet), sb.slot, sb.frozen,
                                        Fraction(0), sb.params, sb.depth_bound, sb.early_halt_mass,
                                        sb.certified, sb.candidates)
        if not boosters.check_likelihood_booster(sb.tree, pair, sb.params):
            raise GuaranteeViolated(f"single-sample booster fails ({sb.params.delta}, {sb.params.M})")
        return sb

    single = _stage("single", single_stage)
    report["single"] = {"delta": single.params.delta, "M": single.params.M, "depth": single.tree.query_depth(),
                        "depth_bound": single.depth_bound, "early_halt_mass": single.early_halt_mass,
                        "good_mass": single.good_mass, "certified": single.certified}

    # 6. single-sample booster -> tester
    def tester_stage():
        t = boosters.booster_to_tester(single.tree, pair, single.params)
        if fault == "tester":
            t = DecisionTree(1, pair.n, Leaf("reject"), pair.alphabet)
        a0, a1 = boosters.accept_probabilities(t, pair)
        if a1 < 1 - single.params.delta:
            raise GuaranteeViolated(f"completeness {a1} < {1 - single.params.delta}")
        return t, a0, a1

    final, fa0, fa1 = _stage("tester", tester_stage)
    cost = final.query_depth()
    amp_runs = 1
    err = max(fa0, 1 - fa1)
    if err > Fraction(1, 3):
        amp = boosters.amplify(fa0, fa1, (fa1 - fa0) / 2, Fraction(1, 3))
        amp_runs = amp.runs
    dt = exact.dt_eps(pair.f, pair.balanced(), Fraction(1, 3)) if pair.f is not None else None
    total = cost * amp_runs
    report["tester"] = {"depth": cost, "accept0": fa0, "accept1": fa1, "runs": amp_runs, "cost": total}
    report["dt_third"] = dt
    report["ratio"] = Fraction(total, dt) if dt else None
    return report


def cmd_pipeline(args) -> dict:
    raw = load_json(args.config)
    base = Path(args.config).parent
    pair = pair_from_config(raw, base)
    cfg = PipelineConfig.from_dict(raw.get("params", {}))
    if args.fault:
        cfg = PipelineConfig(**{**cfg.__dict__, "fault": args.fault})
    out = run_pipeline(pair, cfg)
    out["instance"] = raw.get("toy") or raw.get("pair") or raw.get("dist")
    return out


# --- bootstrap simulation -------------------------------------------------------------

def cmd_bootstrap_sim(args) -> dict:
    raw = load_json(args.config)
    base = Path(args.config).parent
    pair = pair_from_config(raw, base)
    try:
        cfg = bootstrap.BootstrapConfig.from_json(json.dumps(raw))
    except (KeyError, ValueError, TypeError) as e:
        raise ParseError(args.config, 0, f"bad bootstrap config: {e}") from None
    runs = int(raw.get("runs", 1))
    rng = SplitMix64(args.seed)
    b = bootstrap.Bootstrapper(cfg, pair)
    out_runs = []
    trace_lines = []
    for r in range(runs):
        stream = rng.split(r)
        x = [stream.draw(pair.d1) for _ in range(cfg.K)]
        run = b.run(x)
        last = run.trace[-1]
        out_runs.append({"input": x, "reason": run.reason, "steps": last.step, "phases": last.phase,
                         "settled": last.settled, "otllr": last.otllr, "progress": last.progress})
        trace_lines.append(f"# run {r}\n" + bootstrap.format_trace(run.trace))
    if args.trace:
        Path(args.trace).write_text("".join(trace_lines))
    floor = cfg.floor(pair.alphabet.size, pair.n)
    return {"command": "bootstrap-sim", "seed": args.seed, "K": cfg.K, "k": cfg.k, "L": cfg.L,
            "phases": cfg.phases, "unsettled_floor": floor,
            "hypothesis_holds": cfg.hypothesis_holds(pair.alphabet.size, pair.n),
            "safe_constant": bootstrap.derive_safe_constant(cfg.trunc),
            "markov_bound": bootstrap.markov_failure_bound(cfg), "runs": out_runs}


# --- verification suites ------------------------------------------------------------------

SUITES = tuple(suites.SUITE_FUNCS)


def cmd_verify(args) -> dict:

    res = suites.run_suite(args.suite, seed=args.seed, instances=args.instances, grid=args.grid)
    return {"command": "verify", **res}


# --- separation and composition -----------------------------------------------------------

def cmd_separation(args) -> dict:
    n = args.n
    if n < 3:
        raise UsageError("--n must be at least 3")
    third = Fraction(1, 3)
    f, d = exact.shaltiel_dist_intro(n)
    dt = exact.dt_eps(f, d, third)
    cost, samples, err = exact.shaltiel_corr_cost(n, third)
    easy = reductions.corr_easy_on_shaltiel(n)
    cert = reductions.selection_bias_certificate(n)
    amp_err = max(easy.amplified.error0, easy.amplified.error1)
    cost_next = exact.shaltiel_corr_cost(n + 2, third)[0]
    verdict = "separated" if dt >= 3 and cost == cost_next else "not-separated"
    # exact errors here have denominators with thousands of digits; floats keep output readable
    return {
        "command": "separation", "n": n, "dt_third": dt, "corr_cost": cost, "samples": samples, "corr_cost_n_plus_2": cost_next,
        "corr_error": float(err), "corr_error_ok": err <= third, "verdict": verdict,
        "selection": {
            "corr_cost": easy.cost, "base_error": easy.base_error, "runs": easy.amplified.runs,
            "amplified_error": float(amp_err), "amplified_ok": amp_err <= third,
            "bias_max": cert.max_deviation, "q_max": cert.q_max, "cells": cert.cells,
            "leaf_error_floor": cert.leaf_error_floor, "certified": cert.ok,
        },
    }


def cmd_compose(args) -> dict:
    f = load_function(args.outer)
    g = load_function(args.inner)
    pair = load_pair(args.pair, g)
    rep = compose.composition_gap_report(f, g, pair)
    out: dict = {"command": "compose", "fbs": rep.fbs, "vacuous": rep.vacuous}
    if rep.vacuous:
        return out
    b, tr, bc = rep.blocks, rep.truncation, rep.bicorr
    out["blocks"] = {"y": b.y, "f_y": b.f_y, "blocks": [sorted(x) for x in b.certificate.blocks],
                     "weights": list(b.certificate.weights), "q_blocks": list(b.q_blocks),
                     "q_expected": b.q_expected, "q": b.q, "weighted_sum": b.weighted_sum,
                     "selected": b.selected, "block": sorted(b.block)}
    out["truncation"] = {"q_block": tr.q_block, "factor": tr.factor, "limit": tr.limit,
                         "outer_error_y": tr.err_y, "outer_error_flip": tr.err_flip,
                         "correct_flip": tr.correct_flip, "correct_y": tr.correct_y,
                         "markov_mass": tr.markov_mass}
    out["bicorr"] = {"pairs": bc.k, "error_01": bc.error_01, "error_10": bc.error_10, "error": bc.error,
                     "block_queries": bc.max_block_queries,
                     "runs": bc.amplified.runs if bc.amplified else 1, "cost": bc.cost}
    out["composed_depth"] = rep.outer_depth
    out["ratio"] = rep.ratio
    return out


# --- entry point --------------------------------------------------------------------------

def u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qclab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("measures", help="exact complexity measures of a small function")
    m.add_argument("--function", required=True)
    m.add_argument("--dist")
    m.add_argument("--measures", help="comma-separated subset of " + ",".join(ALL_MEASURES))
    m.add_argument("--eps", default="1/3")
    m.add_argument("--k-max", type=int)
    m.set_defaults(run=cmd_measures)

    pl = sub.add_parser("pipeline", help="corr tester -> boosters -> bootstrap -> single-sample tester")
    pl.add_argument("--config", required=True)
    pl.add_argument("--fault", choices=STAGES, help="replace one stage's output by a trivial tree")
    pl.set_defaults(run=cmd_pipeline)

    bs = sub.add_parser("bootstrap-sim", help="run the bootstrapping tree on seeded D1 inputs")
    bs.add_argument("--config", required=True)
    bs.add_argument("--seed", type=u64, required=True)
    bs.add_argument("--trace", help="write 'step phase settled otllr progress dummy' lines here")
    bs.set_defaults(run=cmd_bootstrap_sim)

    v = sub.add_parser("verify", help="run an invariant suite")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--seed", type=u64, default=7)
    v.add_argument("--instances", type=int)
    v.add_argument("--grid", type=int)
    v.set_defaults(run=cmd_verify)

    s = sub.add_parser("separation", help="corr vs selection on the two-equal-bits xor instance")
    s.add_argument("--n", type=int, required=True)
    s.set_defaults(run=cmd_separation)

    c = sub.add_parser("compose", help="composition pipeline from f o g to a bicorrelated tester for g")
    c.add_argument("--outer", required=True)
    c.add_argument("--inner", required=True)
    c.add_argument("--pair", required=True)
    c.set_defaults(run=cmd_compose)
    return p


def error_record(e: Exception) -> tuple[int, dict]:
    if isinstance(e, (ParseError, UsageError)):
        code = EXIT_PARSE
    elif isinstance(e, exact.CapExceeded):
        code = EXIT_CAP
    elif isinstance(e, (GuaranteeViolated, boosters.NotABooster, bootstrap.OracleNotBooster)):
        code = EXIT_GUARANTEE
    else:
        code = EXIT_OTHER
    return code, {"error": type(e).__name__, "message": str(e), "stage": getattr(e, "stage", None)}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        record = args.run(args)
    except (QclabError, ValueError) as e:
        code, rec = error_record(e)
        emit(rec)
        return code
    emit(record)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
