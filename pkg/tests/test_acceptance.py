"""The nine acceptance criteria, each at its stated tolerance.

Every test appends one ``PASS``/``FAIL`` line to RESULTS; the conftest hook
prints them after the run, so ``pytest tests/test_acceptance.py`` ends with
a per-criterion summary.
"""

import time
from fractions import Fraction

import pytest

from qclab import exact, reductions, suites
from qclab.cli import PipelineConfig, run_pipeline, toy_pair
from qclab.core import xor_fn

THIRD = Fraction(1, 3)
RESULTS: list[str] = []


def record(num: int, name: str, ok: bool, detail: str):
    RESULTS.append(f"criterion {num} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def test_1_separation():
    start = time.perf_counter()
    f, d = exact.shaltiel_dist_intro(5)
    dt = exact.dt_eps(f, d, THIRD)
    cost5, _, err5 = exact.shaltiel_corr_cost(5, THIRD)
    cost7, _, err7 = exact.shaltiel_corr_cost(7, THIRD)
    elapsed = time.perf_counter() - start
    ok = dt >= 3 and cost5 == cost7 and err5 <= THIRD and err7 <= THIRD and elapsed < 60
    record(1, "separation", ok, f"dt_1/3={dt}, corr cost n=5: {cost5}, n=7: {cost7}, {elapsed:.2f}s")


def test_2_helper_inequality():
    rep = suites.helper_suite(grid=10_000)
    ok = rep["ok"] and rep["instances"] >= 10_000 and rep["violations"] == 0
    record(2, "helper inequality", ok, f"{rep['instances']} points, {rep['violations']} violations")


def test_3_submartingale():
    rep = suites.submartingale_suite(seed=7, instances=10_000)
    ok = (rep["ok"] and rep["violations"] == 0 and rep["constant"] == Fraction(1, 12)
          and rep["paper_constant"] >= Fraction(1, 1000))
    record(3, "sub-martingale", ok,
           f"{rep['instances']} instances, c={rep['constant']}, c(100,500)={rep['paper_constant']}")


def test_4_soundness():
    rep = suites.soundness_suite(seed=7, instances=1000)
    ok = rep["ok"] and rep["violations"] == 0 and rep["max_scaled_mass"] <= 1
    record(4, "booster soundness", ok, f"{rep['instances']} instances, max M*D0(U)={rep['max_scaled_mass']}")


def test_5_hybrid():
    rep = suites.hybrid_suite(seed=7, instances=200)
    ok = rep["ok"] and rep["max_corr_error"] <= Fraction(5, 12)
    record(5, "hybrid argument", ok,
           f"{rep['instances']} testers, max corr error {rep['max_corr_error']}, {rep['triangles']} triangles")


def test_6_selection_certificate():
    cert = reductions.selection_bias_certificate(5)
    ok = cert.ok and cert.q_max >= 2 and cert.max_deviation <= Fraction(1, 100)
    record(6, "selection certificate", ok, f"{cert.cells} cells, max bias deviation {cert.max_deviation}")


@pytest.mark.parametrize("inner", sorted(suites.toy_inner_pairs()))
def test_7_composition(inner):
    from qclab.core import and_fn
    from qclab.compose import composition_gap_report
    pair = suites.toy_inner_pairs()[inner]
    rep = composition_gap_report(and_fn(2), pair.f, pair, factor=5, outer_error=Fraction(1, 10))
    b, tr, bc = rep.blocks, rep.truncation, rep.bicorr
    final = max(bc.amplified.error0, bc.amplified.error1) if bc.amplified else bc.error
    ok = (pair.n <= 3 and b.weighted_sum <= b.q
          and b.q_blocks[b.selected] * rep.fbs <= b.q
          and tr.correct_flip >= Fraction(4, 5) and tr.correct_y >= Fraction(3, 5)
          and final < THIRD)
    record(7, f"composition AND2 o {inner}", ok,
           f"q={b.q}, q_sel={b.q_blocks[b.selected]}, flip {tr.correct_flip}, y {tr.correct_y}, final error {final}")


def test_8_fbs_oracles():
    rep = suites.fbs_suite()
    xor = [exact.fbs(xor_fn(n)).value for n in range(1, 5)]
    ok = rep["ok"] and rep["instances"] == 256 and xor == [1, 2, 3, 4]
    record(8, "fbs oracle equivalence", ok, f"{rep['instances']} functions, fbs(xor_1..4)={[str(v) for v in xor]}")


@pytest.mark.parametrize("name", ["dictator", "xor2", "and3", "maj3"])
def test_9_pipeline(name):
    out = run_pipeline(toy_pair(name), PipelineConfig())
    tester = out["tester"]
    err = max(tester["accept0"], 1 - tester["accept1"])
    ok = tester["cost"] >= 1 and out["dt_third"] is not None and (tester["runs"] > 1 or err <= THIRD)
    record(9, f"pipeline {name}", ok,
           f"tester cost {tester['cost']}, dt_1/3 {out['dt_third']}, ratio {out['ratio']} (reported)")
