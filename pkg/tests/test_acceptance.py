"""Release gate: one test per acceptance criterion, each reporting a PASS/FAIL line."""

import math

import pytest

from tolerant_robust.compression import generalization_bound
from tolerant_robust.experiments import (check_doubling, check_error_mass_1d, check_error_mass_finite,
                                         check_tpas_contract, default_config, run_bound_tables,
                                         run_compression_corpus, run_counterexample,
                                         run_learner_comparison, summarize_counterexample,
                                         trend_test)
from tolerant_robust.metric import EuclideanSpace, verify_doubling_euclidean


@pytest.fixture(scope="module")
def counterexample_rows():
    return run_counterexample(default_config("counterexample").with_overrides(replicates=100))


@pytest.fixture(scope="module")
def corpus():
    cfg = default_config("verify").with_overrides(corpus_size=50)
    return run_compression_corpus(cfg, m_max=100)


def test_criterion_1_counterexample_dichotomy(counterexample_rows, report_criterion):
    summ = summarize_counterexample(counterexample_rows)
    ok = (summ.replicates == 100 and summ.perturb_only_failures == 100
          and summ.tpas_successes >= 95)
    report_criterion(1, ok, f"perturb-only certified loss >= 0.5 in {summ.perturb_only_failures}/100, "
                            f"TPaS certified loss 0 in {summ.tpas_successes}/100 (need >= 95)")
    assert ok


def test_criterion_2_error_mass_oracle(report_criterion):
    cfg = default_config("verify").with_overrides(mass_instances=1000, finite_instances=100)
    one_d, finite = check_error_mass_1d(cfg), check_error_mass_finite(cfg)
    ok = (one_d.count >= 1000 and finite.count >= 100
          and one_d.failures == 0 and finite.failures == 0)
    report_criterion(2, ok, f"1-D {one_d.failures} violations in {one_d.count} ({one_d.detail}); "
                            f"finite {finite.failures} violations in {finite.count} ({finite.detail})")
    assert ok


def test_criterion_3_doubling_exactness(report_criterion):
    res = check_doubling(default_config("verify"))
    worst = 0.0
    for dim in (1, 2, 3, 5):
        for norm in ("L2", "Linf"):
            for alpha in (1.1, 2.0, 3.7):
                rep = verify_doubling_euclidean(EuclideanSpace(dim, norm), 0.8, alpha)
                worst = max([worst] + [abs(t.ratio - alpha ** dim) for t in rep.trials])
    ok = res.passed and worst <= 1e-9
    report_criterion(3, ok, f"{res.count} grid cells, max |ratio - alpha^dim| = {worst:.2e}")
    assert ok


def test_criterion_4_boosting_decay(corpus, report_criterion):
    ok_runs = [r for r in corpus if r.success]
    bad = [r.index for r in ok_runs if not (r.decay_ok and r.final_ok)]
    ok = len(corpus) >= 50 and len(ok_runs) == len(corpus) and not bad
    report_criterion(4, ok, f"{len(ok_runs)}/{len(corpus)} runs succeeded, decay or final-error "
                            f"violations in {len(bad)}")
    assert ok


def test_criterion_5_compression_correctness(corpus, report_criterion):
    cert = sum(r.certified for r in corpus)
    rt = sum(r.roundtrip_ok and r.decode_ok for r in corpus)
    ok = cert == len(corpus) and rt == len(corpus)
    report_criterion(5, ok, f"certified {cert}/{len(corpus)}, bit-exact round trip {rt}/{len(corpus)}")
    assert ok


def test_criterion_6_generalization_bound(report_criterion):
    value = generalization_bound(1000, 50, 0.1)
    # ln 1000 = 3 ln 10 and ln(1/0.1) = ln 10, so the bound is 151 ln 10 / 950
    oracle = 151 * math.log(10) / 950
    edges = (math.isclose(generalization_bound(1000, 0, 0.1), math.log(10) / 1000)
             and math.isclose(generalization_bound(1000, 50, 1.0), 50 * math.log(1000) / 950))
    try:
        generalization_bound(1000, 1000, 0.1)
        edges = False
    except ValueError:
        pass
    ok = abs(value - oracle) <= 1e-5 and edges
    report_criterion(6, ok, f"bound {value:.6f}, independent re-derivation {oracle:.6f}; "
                            f"0.36597 differs from both by {abs(value - 0.36597):.1e}")
    assert ok


def test_criterion_7_bound_scaling(report_criterion):
    rows = run_bound_tables(default_config("bounds").with_overrides(zeta_d=[5.0], gammas=[0.1]))
    tp = next(r.value for r in rows if r.quantity == "tpas_factor")
    cp = next(r.value for r in rows if r.quantity == "compression_factor")
    ok = round(tp) == 161051 and abs(tp - 161051) <= 1e-6 * 161051 and round(cp, 2) == 11.99
    report_criterion(7, ok, f"tpas factor {tp:.6f}, compression factor {cp:.4f}")
    assert ok


def test_criterion_8_tpas_contract(counterexample_rows, report_criterion):
    contract = check_tpas_contract(default_config("verify"))
    tpas_rows = [r for r in counterexample_rows if r.learner == "tpas"]
    broken = [r for r in tpas_rows if r.status.startswith("contract")]
    ok = contract.passed and not broken
    report_criterion(8, ok, f"{contract.count - contract.failures}/{contract.count} sized runs and "
                            f"{len(tpas_rows) - len(broken)}/{len(tpas_rows)} counter-example runs made "
                            f"m oracle calls and 1 learner call")
    assert ok


def test_criterion_9_trend(report_criterion):
    cfg = default_config("compare")
    rows = run_learner_comparison(cfg)
    results = trend_test(rows, cfg.trend_z)
    failed_rows = [r for r in rows if r.status != "ok"]
    covered = {tr.gamma for tr in results}
    ok = all(tr.passed for tr in results) and covered == set(cfg.gammas) and not failed_rows
    worst = max(results, key=lambda tr: tr.z)
    report_criterion(9, ok, f"{sum(tr.passed for tr in results)}/{len(results)} learner x gamma cells "
                            f"show no increasing trend (largest z {worst.z:.2f} < {cfg.trend_z}); "
                            f"{len(failed_rows)} failed rows")
    assert ok
