"""Turn learners into cube-root solvers.

A learner handle is any callable ``(oracle, epsilon, delta) -> HypothesisSpec``
(``None`` when it gives up). The reductions build the oracle themselves from
public data and their challenge, so the learner sees nothing else. Secrets
are read only when scoring, through the vault's access log.
"""
from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

from .concepts import (
    EvalContext,
    ExampleOracle,
    HypothesisSpec,
    cube_root_pairs_oracle,
    dcri_labeled_oracle,
    hypothesis_evaluator,
    uniform_unit,
)
from .errors import ContractError, DomainError
from .instances import RsaPublic, SecretVault
from .learners import QuantumCapabilityOracle, learn_dcri_quantum, learn_modexp_quantum
from .numtheory import to_hex

DCR_POINT_EPSILON_EXP = 3
DCR_POINT_DELTA = 1 / 3
EVALUATOR_AGREEMENT = 0.9


@dataclass
class LearnerHandle:
    name: str
    fn: Callable[[ExampleOracle, float, float], Optional[HypothesisSpec]]
    max_queries: Optional[int] = None

    def __call__(self, oracle: ExampleOracle, epsilon: float, delta: float) -> Optional[HypothesisSpec]:
        before = oracle.queries
        h = self.fn(oracle, epsilon, delta)
        used = oracle.queries - before
        if self.max_queries is not None and used > self.max_queries:
            raise ContractError(f"{self.name} used {used} queries, declared at most {self.max_queries}")
        return h


@dataclass
class ReductionOutcome:
    target: str
    recovered: Any
    verified: bool
    transcript: dict = field(default_factory=dict)

    def to_json(self, timing: bool = True) -> dict:
        rec = self.recovered
        if isinstance(rec, HypothesisSpec):
            rec = rec.to_json()
        elif isinstance(rec, int):
            rec = to_hex(rec)
        transcript = dict(self.transcript)
        if not timing:
            transcript["wall_time"] = 0.0
        return {"schema_version": 1, "target": self.target, "recovered": rec, "verified": self.verified,
                "transcript": transcript}


def reduce_learner_to_dcr_point(learner: LearnerHandle, public: RsaPublic, n: int, e: int, seed: int,
                                nonstandard: Optional[dict] = None) -> ReductionOutcome:
    """Use a DCRI learner to find m with m^3 = e (mod N).

    Examples are (x, bin(e, prefix(x))), i.e. labelled by the unknown concept
    c_m. Learner parameters are epsilon = 1/n^3, delta = 1/3 unless
    ``nonstandard`` overrides them explicitly.
    """
    N = public.N
    if n & (n - 1):
        raise DomainError("n must be a power of two")
    if not (1 <= e < N and math.gcd(e, N) == 1):
        raise DomainError("challenge e must lie in Z_N^*")
    epsilon, delta = 1 / n**DCR_POINT_EPSILON_EXP, DCR_POINT_DELTA
    if nonstandard:
        epsilon = nonstandard.get("epsilon", epsilon)
        delta = nonstandard.get("delta", delta)
    t0 = time.perf_counter()
    oracle = dcri_labeled_oracle(n, e, seed)
    h = learner(oracle, epsilon, delta)
    if h is not None and h.family != "dcri":
        raise ContractError(f"learner returned a {h.family} hypothesis, expected dcri")
    m_prime = None if h is None else h.params["m"]
    verified = m_prime is not None and pow(m_prime, 3, N) == e % N
    transcript = {
        "learner": learner.name,
        "epsilon": epsilon,
        "delta": delta,
        "nonstandard": bool(nonstandard),
        "queries": oracle.queries,
        "seed": seed,
        "wall_time": time.perf_counter() - t0,
    }
    return ReductionOutcome("dcr_point", m_prime, verified, transcript)


def reduce_learner_to_cuberoot_evaluator(learner: LearnerHandle, public: RsaPublic, test_points: Sequence[int],
                                         secret: SecretVault, seed: int, epsilon: float = 0.1, delta: float = 0.1,
                                         threshold: float = EVALUATOR_AGREEMENT) -> ReductionOutcome:
    """Feed (y^3, y) pairs to a modexp learner; score its hypothesis as a cube-root evaluator."""
    N = public.N
    if not test_points:
        raise DomainError("need at least one test point")
    if any(not (1 <= x < N and math.gcd(x, N) == 1) for x in test_points):
        raise DomainError("test points must lie in Z_N^*")
    t0 = time.perf_counter()
    oracle = cube_root_pairs_oracle(public, seed)
    h = learner(oracle, epsilon, delta)
    queries = oracle.queries
    agree = 0
    if h is not None:
        predict = hypothesis_evaluator(h, EvalContext(modulus=N, n=public.n))
        d_star = secret.reveal("verify: score cube-root agreement").d_star
        agree = sum(predict(x) == pow(x, d_star, N) for x in test_points)
    fraction = agree / len(test_points)
    transcript = {
        "learner": learner.name,
        "epsilon": epsilon,
        "delta": delta,
        "queries": queries,
        "seed": seed,
        "agreement": agree,
        "test_points": len(test_points),
        "agreement_fraction": fraction,
        "threshold": threshold,
        "wall_time": time.perf_counter() - t0,
    }
    return ReductionOutcome("cuberoot_evaluator", h, fraction >= threshold, transcript)


def make_cheating_learner(family: str, secret_value: int) -> LearnerHandle:
    """Test double that ignores its examples and emits the true hypothesis."""
    if family == "dcri":
        h = HypothesisSpec("dcri", params={"m": secret_value})
    elif family == "modexp":
        h = HypothesisSpec("modexp", params={"d": secret_value})
    else:
        raise DomainError(f"no cheating learner for {family!r}")
    return LearnerHandle(f"cheating_{family}", lambda oracle, eps, delta: h, max_queries=0)


def quantum_dcri_handle(public: RsaPublic, qco: QuantumCapabilityOracle, n: Optional[int] = None) -> LearnerHandle:
    """Honest DCRI learner as a handle.

    Any hypothesis with error below 1/n is exact, so for epsilon < 1/n the
    learner spends the accuracy budget on confidence: it runs at
    min(delta, epsilon).
    """
    n = n or public.n

    def fn(oracle, epsilon, delta):
        target = min(delta, epsilon) if epsilon < 1 / n else delta
        return learn_dcri_quantum(oracle, public, n, min(target, 0.49), qco).hypothesis

    return LearnerHandle("dcri_quantum", fn)


def quantum_modexp_handle(public: RsaPublic, qco: QuantumCapabilityOracle, c_max: int = 8) -> LearnerHandle:
    def fn(oracle, epsilon, delta):
        return learn_modexp_quantum(oracle, public, min(delta, 0.49), qco, c_max=c_max).hypothesis

    return LearnerHandle("modexp_quantum", fn)


def random_guess_handle(public: RsaPublic, seed: int) -> LearnerHandle:
    """Guesses a uniformly random m in Z_N^*; baseline for soundness checks."""
    rng = random.Random(seed)
    return LearnerHandle("random_guess", lambda oracle, eps, delta: HypothesisSpec(
        "dcri", params={"m": uniform_unit(public.N, rng)}), max_queries=0)


def constant_hypothesis_handle(value: int = 1) -> LearnerHandle:
    return LearnerHandle("constant", lambda oracle, eps, delta: HypothesisSpec(
        "lookup_table", params={"table": (), "default": value}), max_queries=0)
