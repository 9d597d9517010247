import math
import random

import pytest

from learnsep.concepts import HypothesisSpec, uniform_unit
from learnsep.errors import ContractError, DomainError
from learnsep.instances import RsaPublic, RsaSecret, SecretVault, gen_2c_instance, gen_dcri_instance
from learnsep.learners import QuantumCapabilityOracle
from learnsep.reductions import (
    LearnerHandle,
    constant_hypothesis_handle,
    make_cheating_learner,
    quantum_dcri_handle,
    quantum_modexp_handle,
    random_guess_handle,
    reduce_learner_to_cuberoot_evaluator,
    reduce_learner_to_dcr_point,
)

P55_16 = RsaPublic(16, 55)
P55 = RsaPublic(6, 55)
UNITS55 = [x for x in range(1, 55) if math.gcd(x, 55) == 1]


def vault55():
    return SecretVault(RsaSecret.from_primes(5, 11))


def test_cheating_learner_verifies():
    h = make_cheating_learner("dcri", 2)
    out = reduce_learner_to_dcr_point(h, P55_16, 16, 8, seed=0)
    assert out.verified and out.recovered == 2
    assert out.transcript["queries"] == 0


def test_cheating_learner_emits_secret_hypotheses():
    assert make_cheating_learner("dcri", 2)(_NoOracle(), 0.1, 0.1) == HypothesisSpec("dcri", params={"m": 2})
    assert make_cheating_learner("modexp", 7)(_NoOracle(), 0.1, 0.1) == HypothesisSpec("modexp", params={"d": 7})
    with pytest.raises(DomainError):
        make_cheating_learner("dlp", 1)


class _NoOracle:
    queries = 0


def test_honest_learner_at_55():
    qco = QuantumCapabilityOracle(55)
    out = reduce_learner_to_dcr_point(quantum_dcri_handle(P55_16, qco), P55_16, 16, 8, seed=1)
    assert out.recovered == 2 and out.verified
    assert out.transcript["epsilon"] == 1 / 16**3 and out.transcript["delta"] == pytest.approx(1 / 3)
    assert qco.factor_calls == 1


def test_honest_learner_random_challenges():
    rec = gen_dcri_instance(16, seed=11)
    pub = rec.public
    rng = random.Random(3)
    qco = QuantumCapabilityOracle(pub.N)
    for t in range(20):
        m = uniform_unit(pub.N, rng)
        out = reduce_learner_to_dcr_point(quantum_dcri_handle(pub, qco), pub, 16, pow(m, 3, pub.N), seed=t)
        assert out.verified and out.recovered == m


def test_random_guess_rarely_verifies():
    rec = gen_dcri_instance(16, seed=2)
    pub = rec.public
    rng = random.Random(0)
    hits = 0
    for t in range(200):
        e = pow(uniform_unit(pub.N, rng), 3, pub.N)
        hits += reduce_learner_to_dcr_point(random_guess_handle(pub, 10_000 + t), pub, 16, e, seed=t).verified
    # each trial succeeds with probability 1/|Z_N^*| < 2^-14
    assert hits == 0


def test_random_guess_at_55_rate():
    rng = random.Random(1)
    hits = sum(reduce_learner_to_dcr_point(random_guess_handle(P55_16, 10_000 + t), P55_16, 16,
                                           pow(uniform_unit(55, rng), 3, 55), seed=t).verified
               for t in range(4000))
    # success probability is exactly 1/40
    assert abs(hits / 4000 - 1 / 40) < 0.01


def test_non_dcri_hypothesis_is_contract_error():
    with pytest.raises(ContractError):
        reduce_learner_to_dcr_point(constant_hypothesis_handle(), P55_16, 16, 8, seed=0)


def test_query_budget_enforced():
    greedy = LearnerHandle("greedy", lambda o, e, d: o.draw_many(5) and None, max_queries=2)
    with pytest.raises(ContractError):
        reduce_learner_to_dcr_point(greedy, P55_16, 16, 8, seed=0)


def test_giving_up_is_unverified():
    quitter = LearnerHandle("quit", lambda o, e, d: None)
    out = reduce_learner_to_dcr_point(quitter, P55_16, 16, 8, seed=0)
    assert not out.verified and out.recovered is None


def test_bad_challenge():
    h = make_cheating_learner("dcri", 2)
    with pytest.raises(DomainError):
        reduce_learner_to_dcr_point(h, P55_16, 16, 5, seed=0)
    with pytest.raises(DomainError):
        reduce_learner_to_dcr_point(h, P55_16, 12, 8, seed=0)


def test_nonstandard_parameters_recorded():
    h = make_cheating_learner("dcri", 2)
    out = reduce_learner_to_dcr_point(h, P55_16, 16, 8, seed=0, nonstandard={"epsilon": 0.2})
    assert out.transcript["nonstandard"] and out.transcript["epsilon"] == 0.2


def test_learner_only_sees_oracle():
    seen = {}

    def spy(oracle, eps, delta):
        seen["x"] = [ex.x for ex in oracle.draw_many(10)]
        return None

    reduce_learner_to_dcr_point(LearnerHandle("spy", spy), P55_16, 16, 8, seed=4)
    assert all(isinstance(x, str) and len(x) == 16 for x in seen["x"])


def test_cuberoot_honest_exhaustive_at_55():
    vault = vault55()
    out = reduce_learner_to_cuberoot_evaluator(quantum_modexp_handle(P55, QuantumCapabilityOracle(55)), P55,
                                               UNITS55, vault, seed=2)
    assert out.transcript["agreement"] == 40 and out.verified
    # secret read only to score, and only once
    assert vault.access_log == ["verify: score cube-root agreement"]


def test_cuberoot_cheating_and_constant_at_55():
    out = reduce_learner_to_cuberoot_evaluator(make_cheating_learner("modexp", 27), P55, UNITS55, vault55(), 0)
    assert out.transcript["agreement"] == 40
    out = reduce_learner_to_cuberoot_evaluator(constant_hypothesis_handle(), P55, UNITS55, vault55(), 0)
    # only x = 1 is its own cube root and maps to the constant 1
    assert out.transcript["agreement"] <= 1 and not out.verified


def test_cuberoot_generated_instance():
    rec = gen_2c_instance(32, seed=6)
    pub = rec.public
    rng = random.Random(5)
    points = [uniform_unit(pub.N, rng) for _ in range(300)]
    out = reduce_learner_to_cuberoot_evaluator(quantum_modexp_handle(pub, QuantumCapabilityOracle(pub.N)), pub,
                                               points, rec.secret, seed=1)
    assert out.verified and out.transcript["agreement_fraction"] == 1.0


def test_cuberoot_rejects_bad_points():
    with pytest.raises(DomainError):
        reduce_learner_to_cuberoot_evaluator(constant_hypothesis_handle(), P55, [], vault55(), 0)
    with pytest.raises(DomainError):
        reduce_learner_to_cuberoot_evaluator(constant_hypothesis_handle(), P55, [5], vault55(), 0)


def test_outcome_json():
    out = reduce_learner_to_dcr_point(make_cheating_learner("dcri", 2), P55_16, 16, 8, seed=0)
    doc = out.to_json(timing=False)
    assert doc["recovered"] == "2" and doc["transcript"]["wall_time"] == 0.0
