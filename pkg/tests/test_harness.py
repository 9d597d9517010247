import json
import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from learnsep.concepts import EvalContext, HypothesisSpec, dcr_concept_eval, dcr_oracle, hypothesis_evaluator
from learnsep.errors import DomainError
from learnsep.harness import (
    BenchConfig,
    BenchRecord,
    PacTask,
    bench_record_from_json,
    capability_gating_violations,
    derive_seed,
    dlp_window_erm_suite,
    estimate_error,
    lemma_b1_frequency,
    m_eval_for,
    pac_trial_suite,
    pass_threshold,
    quantum_within_delta,
    read_jsonl,
    realizable_sample_size,
    separation_benchmark,
    summarize,
    write_jsonl,
)
from learnsep.instances import InstanceRecord, RsaPublic, RsaSecret, SecretVault, gen_2c_instance
from learnsep.learners import LearnerReport, classical_baseline_learn

S55 = RsaSecret.from_primes(5, 11)
P55 = RsaPublic(6, 55)
UNITS55 = [x for x in range(1, 55) if math.gcd(x, 55) == 1]


def rec55():
    return InstanceRecord("modexp2c", P55, SecretVault(S55), 0)


def unit55(rng):
    return rng.choice(UNITS55)


def test_realizable_size_example():
    # (ln 64 + ln 10) / 0.1 = 64.6...
    assert realizable_sample_size(64, 0.1, 0.1) == 65
    assert realizable_sample_size(1, 0.5, 0.5) == 2


def test_pass_threshold_and_eval_size():
    assert pass_threshold(0.1, 500) == pytest.approx(0.1 + 2.6 * math.sqrt(0.09 / 500))
    assert m_eval_for(0.1) == 1000
    assert m_eval_for(0.5) == 100


def test_derive_seed_independent_keys():
    seeds = {derive_seed(0, "dcr", 16, t, lid) for t in range(20) for lid in ("classical_constant",
                                                                            "classical_interval_on_x")}
    assert len(seeds) == 40
    assert derive_seed(5, "a", 1) == derive_seed(5, "a", 1)
    assert all(0 <= s < 2**64 for s in seeds)


def test_estimate_error_trivial_cases():
    concept = lambda x: dcr_concept_eval(S55, 2, x)
    rng = random.Random(0)
    assert estimate_error(concept, concept, unit55, 500, rng) == 0
    assert estimate_error(lambda x: 1 - concept(x), concept, unit55, 500, rng) == 1
    with pytest.raises(DomainError):
        estimate_error(concept, concept, unit55, 0, rng)


def test_trapdoor_hypothesis_exact_at_55():
    h = hypothesis_evaluator(HypothesisSpec("trapdoor_bit", params={"d": 27, "i": 2}), EvalContext(55, 6))
    assert sum(h(x) != dcr_concept_eval(S55, 2, x) for x in UNITS55) == 0


def _dcr_task(seed):
    i = random.Random(seed).randrange(1, 7)
    return PacTask(lambda s: dcr_oracle(P55, i, s), lambda x: dcr_concept_eval(S55, i, x), unit55, i)


def test_pac_suite_cheating_learner():
    def cheat(task, oracle):
        i = task.context
        rep = LearnerReport("cheat", None, 0, {}, 0.0, None, "ok")
        return rep, lambda x: dcr_concept_eval(S55, i, x)

    res = pac_trial_suite(cheat, _dcr_task, 0.1, 0.1, 30, seed=1)
    assert res.failure_rate == 0 and res.passed


def test_pac_suite_zero_budget_learner_fails():
    def lazy(task, oracle):
        rep = classical_baseline_learn(oracle, "constant", 1)
        return rep, hypothesis_evaluator(rep.hypothesis, EvalContext(55, 6))

    res = pac_trial_suite(lazy, _dcr_task, 0.05, 0.1, 30, seed=1)
    assert not res.passed


def test_pac_suite_needs_trials():
    with pytest.raises(DomainError):
        pac_trial_suite(None, _dcr_task, 0.1, 0.1, 10)


def test_erm_suite_small():
    res = dlp_window_erm_suite(trials=40, seed=3)
    assert res.passed and len(res.errors) == 40
    assert dlp_window_erm_suite(trials=30, seed=4, m_samples=63).passed


def test_lemma_b1_exhaustive_55():
    assert lemma_b1_frequency(rec55(), 0, exhaustive=True) == 0.8


def test_lemma_b1_sampled_55():
    within = sum(abs(lemma_b1_frequency(rec55(), 0, sample_count=10_000, seed=s) - 0.8) <= 0.02 for s in range(100))
    assert within >= 99


@pytest.mark.parametrize("seed", range(5))
def test_lemma_b1_generated_exact(seed):
    rec = gen_2c_instance(16, seed=seed)
    s = rec.secret.reveal("test")
    for idx, (p, k) in enumerate(s.odd_part_factors):
        f = lemma_b1_frequency(rec, idx, exhaustive=True)
        assert f == pytest.approx((p**k - p ** (k - 1)) / p**k, abs=1e-12)


def test_lemma_b1_modes():
    with pytest.raises(DomainError):
        lemma_b1_frequency(rec55(), 0)
    big = gen_2c_instance(32, seed=1)
    with pytest.raises(DomainError):
        lemma_b1_frequency(big, 0, exhaustive=True)


SMALL = {"families": ["dlp", "dcr", "modexp2c", "dcri"], "sizes": [16], "trials": 2, "seed": 5}


def test_bench_deterministic():
    a = [r.to_json(timing=False) for r in separation_benchmark(BenchConfig.from_json(SMALL))]
    b = [r.to_json(timing=False) for r in separation_benchmark(BenchConfig.from_json(SMALL))]
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_bench_gating_and_labels():
    records = separation_benchmark(BenchConfig.from_json(SMALL))
    assert capability_gating_violations(records) == []
    for r in records:
        if r.quantum_capable:
            assert r.note == ""
        else:
            assert "illustrative" in r.note
            assert not any(r.capability_calls.values())
    # binary-only baselines are skipped for group-valued labels
    assert not any(r.family == "modexp2c" and r.learner_id == "classical_interval_on_x" for r in records)
    rows = summarize(records)
    assert all(0 <= row["ci95"][0] <= row["mean_accuracy"] <= row["ci95"][1] <= 1 for row in rows)


def test_bench_jsonl_roundtrip(tmp_path):
    records = separation_benchmark(BenchConfig.from_json({**SMALL, "families": ["dcr"], "trials": 1}))
    path = tmp_path / "bench.jsonl"
    write_jsonl(path, [r.to_json() for r in records])
    assert [bench_record_from_json(d) for d in read_jsonl(path)] == records


def test_gating_detects_cheats():
    calls = {"order_calls": 0, "dlog_calls": 0, "factor_calls": 1}
    classical = BenchRecord("dcr", 16, "classical_constant", 0, 0.5, 0.0, 10, calls, 1, "ok", False)
    quantum_wrong = BenchRecord("modexp2c", 16, "modexp_quantum", 0, 1.0, 0.0, 10, calls, 1, "ok", True)
    assert len(capability_gating_violations([classical, quantum_wrong])) == 2


def test_quantum_within_delta():
    zero = {"order_calls": 0, "dlog_calls": 0, "factor_calls": 1}
    recs = [BenchRecord("dcri", 16, "dcri_quantum", t, 1.0, 0.0, 93, zero, t, "ok" if t else "failed", True)
            for t in range(40)]
    assert quantum_within_delta(recs, 0.1)
    assert not quantum_within_delta(recs[:2], 0.01)


def test_config_validation():
    with pytest.raises(DomainError):
        BenchConfig.from_json({"families": ["rsa"]})
    with pytest.raises(DomainError):
        BenchConfig.from_json({"learners": ["svm"]})
    cfg = BenchConfig.from_json({"families": ["dlp"], "sizes": {"dlp": [24]}})
    assert cfg.sizes == {"dlp": [24]} and BenchConfig.from_json(cfg.to_json()) == cfg


@given(st.floats(min_value=0.0, max_value=1.0))
def test_bench_record_accuracy_range(acc):
    BenchRecord("dlp", 16, "x", 0, acc, 0.0, 1, {}, 0, "ok", False)


def test_bench_record_rejects_bad_accuracy():
    with pytest.raises(DomainError):
        BenchRecord("dlp", 16, "x", 0, 1.5, 0.0, 1, {}, 0, "ok", False)
