"""Learning algorithms.

Quantum-capable learners get their order-finding, discrete-log and factoring
power only through a :class:`QuantumCapabilityOracle`, a classical desk-scale
stand-in whose calls are counted. Classical baselines never receive one.
"""
from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .concepts import (
    ConceptSpec,
    EvalContext,
    ExampleOracle,
    HypothesisSpec,
    LabeledExample,
    bin_bit,
    bit_features_for,
    dlp_window_contains,
    hypothesis_evaluator,
    prefix_index,
)
from .errors import Degenerate, DomainError, IntegrityError
from .instances import PrimeGroup, RsaPublic
from .numtheory import (
    Congruence,
    Factorization,
    carmichael_lambda,
    crt_combine,
    discrete_log_pohlig_hellman,
    factor_small,
    multiplicative_order,
    totient,
)

OUTCOMES = ("ok", "failed", "budget_exceeded")
ZERO_CALLS = {"order_calls": 0, "dlog_calls": 0, "factor_calls": 0}

COND_CUTOFF = 1e8
ALPHA_ZERO = 1e-12


class QuantumCapabilityOracle:
    """Order finding, subgroup discrete log and factoring for one public modulus.

    Built from the public modulus alone. The answers are what Shor's
    algorithm would return; here they come from classical factoring, which
    is only feasible because the moduli are desk-sized.
    """

    def __init__(self, modulus: int):
        if modulus < 2:
            raise DomainError("modulus must be >= 2")
        self.modulus = modulus
        self.order_calls = 0
        self.dlog_calls = 0
        self.factor_calls = 0
        self._modulus_factors: Optional[Factorization] = None
        self._exponent_factors: Optional[Factorization] = None

    def _factors(self) -> Factorization:
        if self._modulus_factors is None:
            self._modulus_factors = factor_small(self.modulus)
        return self._modulus_factors

    def _exponent(self) -> Factorization:
        if self._exponent_factors is None:
            self._exponent_factors = factor_small(carmichael_lambda(self._factors()))
        return self._exponent_factors

    def _order(self, x: int) -> int:
        return multiplicative_order(x, self.modulus, self._exponent())

    def order(self, x: int) -> int:
        self.order_calls += 1
        return self._order(x)

    def dlog(self, base: int, target: int, base_order: Optional[int] = None) -> int:
        """Least l in {1, ..., ord(base)} with base^l = target."""
        self.dlog_calls += 1
        r = base_order if base_order is not None else self._order(base)
        return discrete_log_pohlig_hellman(base, target, self.modulus, factor_small(r))

    def factor(self) -> Factorization:
        self.factor_calls += 1
        return self._factors()

    def snapshot(self) -> dict:
        return {"order_calls": self.order_calls, "dlog_calls": self.dlog_calls, "factor_calls": self.factor_calls}


@dataclass
class LearnerReport:
    learner_id: str
    hypothesis: Optional[HypothesisSpec]
    oracle_queries: int
    capability_calls: dict
    wall_time: float
    seed: Optional[int]
    outcome: str
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise DomainError(f"unknown outcome {self.outcome!r}")

    def to_json(self, timing: bool = True) -> dict:
        return {
            "schema_version": 1,
            "learner_id": self.learner_id,
            "hypothesis": None if self.hypothesis is None else self.hypothesis.to_json(),
            "oracle_queries": self.oracle_queries,
            "capability_calls": dict(self.capability_calls),
            "wall_time": self.wall_time if timing else 0.0,
            "seed": self.seed,
            "outcome": self.outcome,
            "details": self.details,
        }


@dataclass
class CongruenceLedger:
    """Congruences d = a_i (mod r_i) collected from modexp examples."""

    collected: list = field(default_factory=list)

    def add(self, residue: int, modulus: int) -> None:
        self.collected.append(Congruence(residue % modulus, modulus))

    @property
    def combined(self) -> Congruence:
        return crt_combine(self.collected)


class _Run:
    """Timing and query bookkeeping shared by the learners."""

    def __init__(self, learner_id: str, oracle: Optional[ExampleOracle], qco: Optional[QuantumCapabilityOracle]):
        self.learner_id = learner_id
        self.oracle = oracle
        self.qco = qco
        self.start = time.perf_counter()
        self.q0 = oracle.queries if oracle is not None else 0

    def report(self, hypothesis, outcome="ok", **details) -> LearnerReport:
        return LearnerReport(
            learner_id=self.learner_id,
            hypothesis=hypothesis,
            oracle_queries=(self.oracle.queries - self.q0) if self.oracle is not None else 0,
            capability_calls=self.qco.snapshot() if self.qco is not None else dict(ZERO_CALLS),
            wall_time=time.perf_counter() - self.start,
            seed=self.oracle.seed if self.oracle is not None else None,
            outcome=outcome,
            details=details,
        )


def modexp_sample_budget(N: int, delta: float) -> int:
    return math.ceil(8 * (N.bit_length() + math.log2(1 / delta)))


def dcri_sample_budget(n: int, delta: float) -> int:
    return math.ceil(n * (math.log(n) + math.log(2 / delta)))


def learn_modexp_quantum(oracle: ExampleOracle, public: RsaPublic, delta: float,
                         qco: QuantumCapabilityOracle, c_max: int = 8,
                         budget: Optional[int] = None) -> LearnerReport:
    """Identify d from examples (x, x^d mod N).

    Each example gives d = log_x(x^d) (mod ord(x)). The CRT of these pins d
    modulo M | lambda(N); the missing power of two is brute-forced over
    d = A + jM, j < 2^c_max, keeping candidates consistent with every example.
    """
    if not 0 < delta < 0.5:
        raise DomainError("delta must be in (0, 1/2)")
    run = _Run("modexp_quantum", oracle, qco)
    N = public.N
    T = modexp_sample_budget(N, delta)
    if budget is not None and budget < T:
        return run.report(None, "budget_exceeded", required_queries=T)
    examples = oracle.draw_many(T)
    ledger = CongruenceLedger()
    for ex in examples:
        r = qco.order(ex.x)
        a = qco.dlog(ex.x, ex.y, r)
        ledger.add(a, r)
    try:
        combined = ledger.combined
    except ValueError as exc:
        raise IntegrityError(f"congruences from the oracle are inconsistent: {exc}") from exc
    A, M = combined.residue, combined.modulus
    survivors = []
    for j in range(1 << c_max):
        cand = A + j * M
        if cand == 0 or math.gcd(cand, 2) != 1:
            continue
        if all(pow(ex.x, cand, N) == ex.y for ex in examples):
            survivors.append(cand)
            break
    if not survivors:
        return run.report(None, "failed", ledger_modulus=M, ledger_residue=A)
    d_hat = survivors[0]
    return run.report(HypothesisSpec("modexp", params={"d": d_hat}), ledger_modulus=M, ledger_residue=A,
                      congruences=len(ledger.collected))


def lemma_b1_event(x: int, N: int, lambda_factors: Factorization, prime_power: tuple[int, int]) -> bool:
    """Does p_i^{k_i} divide ord_N(x)?"""
    p, k = prime_power
    return multiplicative_order(x, N, lambda_factors) % p**k == 0


def learn_dcri_quantum(oracle: ExampleOracle, public: RsaPublic, n: int, delta: float,
                       qco: QuantumCapabilityOracle, budget: Optional[int] = None) -> LearnerReport:
    """Recover every bit of m^3 mod N from the prefix buckets, then take the cube root."""
    if n & (n - 1):
        raise DomainError("n must be a power of two")
    if not 0 < delta < 0.5:
        raise DomainError("delta must be in (0, 1/2)")
    run = _Run("dcri_quantum", oracle, qco)
    T = dcri_sample_budget(n, delta)
    if budget is not None and budget < T:
        return run.report(None, "budget_exceeded", required_queries=T)
    bits: dict[int, int] = {}
    for ex in oracle.draw_many(T):
        k = prefix_index(ex.x, n)
        if bits.setdefault(k, ex.y) != ex.y:
            raise IntegrityError(f"conflicting labels for bit position {k}")
    if len(bits) < n:
        return run.report(None, "failed", covered=len(bits), required=n)
    E = sum(b << k for k, b in bits.items())
    phi = totient(qco.factor())
    if math.gcd(3, phi) != 1:
        return run.report(None, "failed", reason="cubing is not a bijection mod N")
    d = pow(3, -1, phi)
    m_hat = pow(E, d, public.N)
    return run.report(HypothesisSpec("dcri", params={"m": m_hat}), covered=n)


def learn_dcr_quantum(oracle: ExampleOracle, public: RsaPublic, qco: QuantumCapabilityOracle,
                      m_samples: int) -> LearnerReport:
    """Compute d* by factoring N, then pick the bit index i by ERM over f_{d*, i}."""
    if m_samples < 1:
        raise DomainError("m_samples must be >= 1")
    run = _Run("dcr_quantum", oracle, qco)
    N, n = public.N, public.n
    phi = totient(qco.factor())
    d_star = pow(3, -1, phi)
    samples = oracle.draw_many(m_samples)
    roots = [pow(ex.x, d_star, N) for ex in samples]
    errors = [sum(bin_bit(z, i) != ex.y for z, ex in zip(roots, samples)) for i in range(1, n + 1)]
    best = min(range(n), key=lambda j: (errors[j], j))
    h = HypothesisSpec("trapdoor_bit", params={"d": d_star, "i": best + 1})
    if errors[best] > 0.49 * m_samples:
        return run.report(h, "failed", empirical_errors=errors[best])
    return run.report(h, empirical_risk=errors[best] / m_samples)


def dlp_window_candidates(exponents: Sequence[int], p: int) -> list[int]:
    """Window starts aligned with observed exponents.

    Sliding any window one step changes only the two boundary labels, so an
    empirical minimiser can always be slid until a sample sits on its first
    slot or just past its last one.
    """
    half = (p - 1) // 2
    out = set()
    for ell in exponents:
        for start in (ell, ell - half, ell - half + 1):
            out.add((start - 1) % (p - 1) + 1)
    return sorted(out)


def _window_errors(start: int, pairs: Sequence[tuple[int, int]], p: int) -> int:
    return sum(int(dlp_window_contains(ell, start, p)) != y for ell, y in pairs)


def learn_dlp_interval(oracle: ExampleOracle, group: PrimeGroup, qco: QuantumCapabilityOracle,
                       m_samples: int) -> LearnerReport:
    if m_samples < 2:
        raise DomainError("m_samples must be >= 2")
    run = _Run("dlp_interval_quantum", oracle, qco)
    p = group.p
    pairs = [(qco.dlog(group.a, ex.x, p - 1), ex.y) for ex in oracle.draw_many(m_samples)]
    scored = [(_window_errors(s, pairs, p), s) for s in dlp_window_candidates([e for e, _ in pairs], p)]
    err, start = min(scored)
    return run.report(HypothesisSpec("dlp_interval", params={"i": start}), empirical_risk=err / m_samples)


def concept_to_hypothesis(spec: ConceptSpec) -> HypothesisSpec:
    if spec.family == "dlp_interval":
        return HypothesisSpec("dlp_interval", spec.instance_ref, {"i": spec.index})
    if spec.family == "modexp":
        return HypothesisSpec("modexp", spec.instance_ref, {"d": spec.index})
    if spec.family == "dcri":
        return HypothesisSpec("dcri", spec.instance_ref, {"m": spec.index})
    if spec.family == "pqc_cosine":
        a, b, g = spec.index
        return HypothesisSpec("pqc_cosine", spec.instance_ref, {"alpha": a, "beta": b, "gamma": g})
    raise DomainError(f"{spec.family} concepts have no secret-free hypothesis form")


def erm_brute_force(oracle: ExampleOracle, concepts: Sequence[ConceptSpec],
                    evaluate: Callable[[ConceptSpec, Any], Any], m_samples: int,
                    qco: Optional[QuantumCapabilityOracle] = None) -> LearnerReport:
    """Return the enumerated concept with the fewest disagreements on m samples.

    ``evaluate`` computes concept labels; for hard-to-evaluate families it is
    expected to route through the capability oracle passed as ``qco`` (whose
    counters then land in the report).
    """
    if not concepts:
        raise DomainError("empty concept enumeration")
    if m_samples < 1:
        raise DomainError("m_samples must be >= 1")
    run = _Run("erm_brute_force", oracle, qco)
    samples = oracle.draw_many(m_samples)
    risks = [sum(evaluate(c, ex.x) != ex.y for ex in samples) for c in concepts]
    best = min(range(len(concepts)), key=lambda j: (risks[j], j))
    return run.report(concept_to_hypothesis(concepts[best]), chosen_index=best,
                      empirical_risk=risks[best] / m_samples, empirical_risks=[r / m_samples for r in risks])


def learn_pqc_cosine(samples: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """Recover (alpha, beta, gamma) of alpha*cos(theta - beta) + gamma from three points."""
    if len(samples) != 3:
        raise DomainError("exactly three (theta, value) samples are required")
    A = np.array([[math.cos(t), math.sin(t), 1.0] for t, _ in samples])
    b = np.array([v for _, v in samples], dtype=float)
    scale = np.abs(A).max(axis=1, keepdims=True)
    As, bs = A / scale, b / scale[:, 0]
    cond = np.linalg.cond(As)
    if not np.isfinite(cond) or cond >= COND_CUTOFF:
        raise Degenerate(f"angles give a near-singular system (cond={cond:.3g}); resample theta")
    a_cos, a_sin, gamma = np.linalg.solve(As, bs)
    alpha = math.hypot(a_cos, a_sin)
    beta = math.atan2(a_sin, a_cos) % (2 * math.pi) if alpha >= ALPHA_ZERO else 0.0
    if beta >= 2 * math.pi:
        beta = 0.0
    return alpha, beta, float(gamma)


# -- classical baselines ----------------------------------------------------------

BASELINE_FAMILIES = ("constant", "interval_on_x", "linear_threshold_on_bits", "lookup_table_capped")
DEFAULT_LOOKUP_CAP = 4096


def _majority(labels: Sequence[Any]) -> Any:
    counts = Counter(labels)
    top = max(counts.values())
    return min(k for k, v in counts.items() if v == top)


def _require_binary(labels: Sequence[Any], family: str) -> None:
    if any(y not in (0, 1) for y in labels):
        raise DomainError(f"{family} baseline needs binary labels")


def _scalar(x) -> int:
    return int(x, 2) if isinstance(x, str) else int(x)


def _best_interval(samples: Sequence[LabeledExample]) -> tuple[int, int, int, int]:
    """ERM over intervals [lo, hi] on the integer value of x; returns (errors, lo, hi, inside)."""
    keyed: dict[int, list[int]] = {}
    for ex in samples:
        keyed.setdefault(_scalar(ex.x), [0, 0])[ex.y] += 1
    keys = sorted(keyed)
    ones = sum(v[1] for v in keyed.values())
    zeros = sum(v[0] for v in keyed.values())
    best = None
    for inside, base_err in ((1, ones), (0, zeros)):
        # Kadane: gain of labelling a run of keys `inside` instead of 1 - inside
        run_gain, run_lo = 0, None
        best_gain, best_lo, best_hi = 0, 1, 0
        for k in keys:
            w = keyed[k][inside] - keyed[k][1 - inside]
            if run_lo is None or run_gain <= 0:
                run_gain, run_lo = w, k
            else:
                run_gain += w
            if run_gain > best_gain:
                best_gain, best_lo, best_hi = run_gain, run_lo, k
        cand = (base_err - best_gain, best_lo, best_hi, inside)
        if best is None or cand < best:
            best = cand
    return best


def classical_baseline_learn(oracle: ExampleOracle, family: str, m_samples: int,
                             n: Optional[int] = None, cap: int = DEFAULT_LOOKUP_CAP) -> LearnerReport:
    """ERM inside a small classical family, from example data alone."""
    if family not in BASELINE_FAMILIES:
        raise DomainError(f"unknown baseline family {family!r}")
    if m_samples < 1:
        raise DomainError("m_samples must be >= 1")
    run = _Run(f"classical_{family}", oracle, None)
    samples = oracle.draw_many(m_samples)
    labels = [ex.y for ex in samples]
    default = _majority(labels)
    if family == "constant":
        h = HypothesisSpec("lookup_table", params={"table": (), "default": default})
    elif family == "lookup_table_capped":
        table: dict = {}
        for ex in samples:
            if len(table) >= cap:
                break
            table.setdefault(ex.x, ex.y)
        h = HypothesisSpec("lookup_table", params={"table": tuple(table.items()), "default": default})
    elif family == "interval_on_x":
        _require_binary(labels, family)
        _, lo, hi, inside = _best_interval(samples)
        h = HypothesisSpec("interval_on_x", params={"lo": lo, "hi": hi, "inside": inside})
    else:
        _require_binary(labels, family)
        feat = bit_features_for(n)
        X = np.array([feat(ex.x) + [1.0] for ex in samples])
        target = 2.0 * np.array(labels, dtype=float) - 1.0
        coef, *_ = np.linalg.lstsq(X, target, rcond=None)
        h = HypothesisSpec("linear_threshold", params={"weights": tuple(float(w) for w in coef[:-1]),
                                                       "bias": float(coef[-1])})
    predict = hypothesis_evaluator(h, EvalContext(n=n))
    risk = sum(predict(ex.x) != ex.y for ex in samples) / m_samples
    return run.report(h, empirical_risk=risk)
