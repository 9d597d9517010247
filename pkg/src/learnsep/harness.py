"""Empirical PAC evaluation, the separation benchmark grid and record persistence."""
from __future__ import annotations

import hashlib
import json
import math
import random
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np

from .concepts import (
    ConceptSpec,
    EvalContext,
    ExampleOracle,
    dcr_oracle,
    dcri_oracle,
    dlp_oracle,
    dlp_window_contains,
    exact_dlog,
    hypothesis_evaluator,
    modexp_oracle,
)
from .errors import DomainError
from .instances import InstanceRecord, generate
from .learners import (
    BASELINE_FAMILIES,
    ZERO_CALLS,
    LearnerReport,
    QuantumCapabilityOracle,
    classical_baseline_learn,
    erm_brute_force,
    learn_dcr_quantum,
    learn_dcri_quantum,
    learn_dlp_interval,
    learn_modexp_quantum,
    lemma_b1_event,
)

SCHEMA_VERSION = 1
PASS_SLACK_Z = 2.6
EXHAUSTIVE_LIMIT = 1 << 16


def derive_seed(master: int, *keys: Any) -> int:
    """Independent 64-bit child seed for (master, keys); order-free across trials."""
    words = [k if isinstance(k, int) else int.from_bytes(hashlib.sha256(str(k).encode()).digest()[:8], "little")
             for k in keys]
    ss = np.random.SeedSequence(master, spawn_key=tuple(words))
    return int(ss.generate_state(1, np.uint64)[0])


def pass_threshold(delta: float, trials: int) -> float:
    """One-sided 99.5% binomial allowance on the failure rate."""
    return delta + PASS_SLACK_Z * math.sqrt(delta * (1 - delta) / trials)


def m_eval_for(epsilon: float) -> int:
    return math.ceil(max(100, 10 / epsilon**2))


def realizable_sample_size(class_size: int, epsilon: float, delta: float) -> int:
    return math.ceil((math.log(class_size) + math.log(1 / delta)) / epsilon)


def estimate_error(predict: Callable[[Any], Any], concept: Callable[[Any], Any],
                   sampler: Callable[[random.Random], Any], m_eval: int, rng: random.Random) -> float:
    """Disagreement rate of ``predict`` vs ``concept`` on m_eval fresh draws."""
    if m_eval < 1:
        raise DomainError("m_eval must be >= 1")
    wrong = 0
    for _ in range(m_eval):
        x = sampler(rng)
        wrong += predict(x) != concept(x)
    return wrong / m_eval


def estimate_error_on_oracle(predict: Callable[[Any], Any], oracle: ExampleOracle, m_eval: int) -> float:
    """Same estimate, taking labelled points from a (secret-side) example oracle."""
    if m_eval < 1:
        raise DomainError("m_eval must be >= 1")
    return sum(predict(ex.x) != ex.y for ex in oracle.draw_many(m_eval)) / m_eval


@dataclass
class PacEvalResult:
    epsilon: float
    delta: float
    trials: int
    errors: list
    failure_rate: float
    passed: bool
    threshold: float

    def to_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **asdict(self)}


@dataclass
class PacTask:
    """One trial's target: a labelled-example source plus a secret-side scorer."""

    make_oracle: Callable[[int], ExampleOracle]
    concept: Callable[[Any], Any]
    sampler: Callable[[random.Random], Any]
    context: Any = None


def pac_trial_suite(learner_factory: Callable[[PacTask, ExampleOracle], tuple[LearnerReport, Optional[Callable]]],
                    instance_generator: Callable[[int], PacTask], epsilon: float, delta: float, trials: int,
                    seed: int = 0) -> PacEvalResult:
    """Run independent seeded trials and grade the (epsilon, delta) guarantee."""
    if trials < 30:
        raise DomainError("need at least 30 trials for a binomial verdict")
    m_eval = m_eval_for(epsilon)
    errors = []
    for t in range(trials):
        task = instance_generator(derive_seed(seed, "instance", t))
        oracle = task.make_oracle(derive_seed(seed, "oracle", t))
        report, predict = learner_factory(task, oracle)
        if report.outcome != "ok" or predict is None:
            errors.append(1.0)
            continue
        errors.append(estimate_error(predict, task.concept, task.sampler, m_eval,
                                     random.Random(derive_seed(seed, "eval", t))))
    failure_rate = sum(e > epsilon for e in errors) / trials
    threshold = pass_threshold(delta, trials)
    return PacEvalResult(epsilon, delta, trials, errors, failure_rate, failure_rate <= threshold, threshold)


def dlp_window_erm_suite(class_size: int = 64, epsilon: float = 0.1, delta: float = 0.1, trials: int = 500,
                         n: int = 16, seed: int = 0, m_samples: Optional[int] = None) -> PacEvalResult:
    """ERM over a random enumeration of DLP windows that contains the target.

    Each trial draws a fresh group, ``class_size`` distinct window starts and
    a target among them; the learner sees m = ceil((ln|C| + ln(1/delta))/eps)
    examples (or ``m_samples``) and labels candidates through the capability
    oracle.
    """
    m_train = m_samples or realizable_sample_size(class_size, epsilon, delta)

    def make_task(task_seed: int) -> PacTask:
        rng = random.Random(task_seed)
        g = generate("dlp", n, task_seed).public
        if g.p - 1 < class_size:
            raise DomainError("group too small for the requested class size")
        starts = rng.sample(range(1, g.p), class_size)
        target = rng.choice(starts)
        log_a = exact_dlog(g)
        return PacTask(
            make_oracle=lambda s: dlp_oracle(g, target, s),
            concept=lambda x: int(dlp_window_contains(log_a(x), target, g.p)),
            sampler=lambda r: r.randrange(1, g.p),
            context=(g, [ConceptSpec("dlp_interval", "", i) for i in starts], log_a),
        )

    def learner(task: PacTask, oracle: ExampleOracle):
        g, concepts, log_a = task.context
        qco = QuantumCapabilityOracle(g.p)
        logs: dict[int, int] = {}

        def label(c: ConceptSpec, x: int) -> int:
            if x not in logs:
                logs[x] = qco.dlog(g.a, x, g.p - 1)
            return int(dlp_window_contains(logs[x], c.index, g.p))

        report = erm_brute_force(oracle, concepts, label, m_train, qco=qco)
        i = report.hypothesis.params["i"]
        return report, lambda x: int(dlp_window_contains(log_a(x), i, g.p))

    return pac_trial_suite(learner, make_task, epsilon, delta, trials, seed)


def lemma_b1_frequency(record: InstanceRecord, factor_index: int, sample_count: Optional[int] = None,
                       exhaustive: bool = False, seed: int = 0) -> float:
    """Fraction of x in Z_N^* whose order is divisible by the chosen odd prime power of phi."""
    secret = record.secret.reveal("order-divisibility frequency")
    N = secret.N
    pp = secret.odd_part_factors.factors[factor_index]
    lam = secret.lambda_factors
    if exhaustive:
        if N > EXHAUSTIVE_LIMIT:
            raise DomainError("exhaustive mode is limited to N <= 2^16")
        hits = total = 0
        for x in range(1, N):
            if math.gcd(x, N) == 1:
                total += 1
                hits += lemma_b1_event(x, N, lam, pp)
        return hits / total
    if not sample_count or sample_count < 1:
        raise DomainError("give sample_count or exhaustive=True")
    rng = random.Random(seed)
    hits = 0
    for _ in range(sample_count):
        while True:
            x = rng.randrange(1, N)
            if math.gcd(x, N) == 1:
                break
        hits += lemma_b1_event(x, N, lam, pp)
    return hits / sample_count


# -- benchmark ------------------------------------------------------------------------

FAMILY_KIND = {"dlp": "dlp", "dcr": "dcr", "modexp2c": "modexp2c", "dcri": "dcri"}
QUANTUM_LEARNER = {
    "dlp": "dlp_interval_quantum",
    "dcr": "dcr_quantum",
    "modexp2c": "modexp_quantum",
    "dcri": "dcri_quantum",
}
BINARY_FAMILIES = ("dlp", "dcr", "dcri")
ILLUSTRATIVE_NOTE = "classical baseline; illustrative only, not evidence of a lower bound"


@dataclass
class BenchConfig:
    families: list = field(default_factory=lambda: ["dlp", "dcr", "modexp2c", "dcri"])
    sizes: dict = field(default_factory=lambda: {"dlp": [16], "dcr": [16], "modexp2c": [16], "dcri": [16]})
    learners: list = field(default_factory=lambda: ["quantum", *BASELINE_FAMILIES])
    epsilon: float = 0.1
    delta: float = 0.1
    trials: int = 3
    seed: int = 0
    c_max: int = 8

    @classmethod
    def from_json(cls, d: dict) -> "BenchConfig":
        sizes = d.get("sizes", {})
        fams = list(d.get("families", cls().families))
        for f in fams:
            if f not in FAMILY_KIND:
                raise DomainError(f"unknown family {f!r}")
        if isinstance(sizes, list):
            sizes = {f: list(sizes) for f in fams}
        learners = list(d.get("learners", cls().learners))
        for lid in learners:
            if lid != "quantum" and lid not in BASELINE_FAMILIES:
                raise DomainError(f"unknown learner {lid!r}")
        return cls(
            families=fams,
            sizes={f: list(sizes.get(f, [16])) for f in fams},
            learners=learners,
            epsilon=float(d.get("epsilon", 0.1)),
            delta=float(d.get("delta", 0.1)),
            trials=int(d.get("trials", 3)),
            seed=int(d.get("seed", 0)),
            c_max=int(d.get("c_max", 8)),
        )

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class BenchRecord:
    family: str
    n: int
    learner_id: str
    trial: int
    accuracy: float
    wall_time: float
    queries: int
    capability_calls: dict
    seed: int
    outcome: str
    quantum_capable: bool
    note: str = ""

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise DomainError("accuracy must lie in [0, 1]")

    def to_json(self, timing: bool = True) -> dict:
        d = {"schema_version": SCHEMA_VERSION, **asdict(self)}
        if not timing:
            d["wall_time"] = 0.0
        return d


@dataclass
class _Target:
    record: InstanceRecord
    index: Any
    make_oracle: Callable[[int], ExampleOracle]
    ctx: EvalContext
    class_size: int


CONCEPT_FAMILY = {"dlp": "dlp_interval", "dcr": "dcr_bit", "modexp2c": "modexp", "dcri": "dcri"}


def _target(family: str, n: int, inst_seed: int, concept_seed: int, c_max: int) -> _Target:
    rec = generate(FAMILY_KIND[family], n, inst_seed, c_max=c_max)
    rng = random.Random(concept_seed)
    ref = rec.instance_ref
    pub = rec.public
    secret = None
    if family == "dlp":
        i = rng.randrange(1, pub.p)
        tgt = _Target(rec, i, lambda s: dlp_oracle(pub, i, s, ref), EvalContext(pub.p, n, exact_dlog(pub)), pub.p - 1)
    else:
        secret = rec.secret.reveal(f"benchmark: choose concept for {family}")
        ctx = EvalContext(pub.N, pub.n)
        if family == "dcr":
            i = rng.randrange(1, n + 1)
            tgt = _Target(rec, i, lambda s: dcr_oracle(pub, i, s, ref), ctx, n)
        elif family == "modexp2c":
            while True:
                d = rng.randrange(1, secret.phi)
                if math.gcd(d, secret.phi) == 1:
                    break
            tgt = _Target(rec, d, lambda s: modexp_oracle(pub, d, s, ref), ctx, secret.phi)
        else:
            m = secret.m
            tgt = _Target(rec, m, lambda s: dcri_oracle(pub, m, s, ref), ctx, pub.N)
    ConceptSpec(CONCEPT_FAMILY[family], ref, tgt.index).validate_index(pub, secret)
    return tgt


def _run_learner(learner: str, family: str, tgt: _Target, oracle: ExampleOracle, cfg: BenchConfig) -> LearnerReport:
    rec = tgt.record
    m_train = realizable_sample_size(tgt.class_size, cfg.epsilon, cfg.delta)
    if learner != "quantum":
        return classical_baseline_learn(oracle, learner, m_train, n=tgt.ctx.n)
    if family == "dlp":
        qco = QuantumCapabilityOracle(rec.public.p)
        return learn_dlp_interval(oracle, rec.public, qco, m_train)
    qco = QuantumCapabilityOracle(rec.public.N)
    if family == "dcr":
        return learn_dcr_quantum(oracle, rec.public, qco, m_train)
    if family == "modexp2c":
        return learn_modexp_quantum(oracle, rec.public, cfg.delta, qco, c_max=cfg.c_max)
    return learn_dcri_quantum(oracle, rec.public, rec.public.n, cfg.delta, qco)


def separation_benchmark(config: BenchConfig) -> list[BenchRecord]:
    """Grid over families x sizes x learners x trials; failures are recorded, never raised."""
    records = []
    m_eval = m_eval_for(config.epsilon)
    for family in config.families:
        for n in config.sizes[family]:
            for trial in range(config.trials):
                inst_seed = derive_seed(config.seed, family, n, trial, "instance")
                tgt = _target(family, n, inst_seed, derive_seed(config.seed, family, n, trial, "concept"),
                              config.c_max)
                for learner in config.learners:
                    if learner in ("interval_on_x", "linear_threshold_on_bits") and family not in BINARY_FAMILIES:
                        continue
                    lid = QUANTUM_LEARNER[family] if learner == "quantum" else f"classical_{learner}"
                    oseed = derive_seed(config.seed, family, n, trial, lid, "train")
                    try:
                        report = _run_learner(learner, family, tgt, tgt.make_oracle(oseed), config)
                    except Exception as exc:  # grid must survive any single trial
                        report = LearnerReport(lid, None, 0, dict(ZERO_CALLS), 0.0, oseed, "failed",
                                               {"error": f"{type(exc).__name__}: {exc}"})
                    accuracy = 0.0
                    if report.outcome == "ok" and report.hypothesis is not None:
                        predict = hypothesis_evaluator(report.hypothesis, tgt.ctx)
                        held_out = tgt.make_oracle(derive_seed(config.seed, family, n, trial, lid, "eval"))
                        accuracy = 1.0 - estimate_error_on_oracle(predict, held_out, m_eval)
                    records.append(BenchRecord(
                        family=family, n=n, learner_id=lid, trial=trial, accuracy=accuracy,
                        wall_time=report.wall_time, queries=report.oracle_queries,
                        capability_calls=report.capability_calls, seed=oseed, outcome=report.outcome,
                        quantum_capable=learner == "quantum",
                        note="" if learner == "quantum" else ILLUSTRATIVE_NOTE,
                    ))
    return records


def summarize(records: Sequence[BenchRecord]) -> list[dict]:
    """Mean held-out accuracy (with a 95% normal interval) and wall time per cell."""
    cells: dict[tuple, list[BenchRecord]] = {}
    for r in records:
        cells.setdefault((r.family, r.n, r.learner_id), []).append(r)
    rows = []
    for (family, n, lid), rs in sorted(cells.items()):
        accs = [r.accuracy for r in rs]
        mean = statistics.fmean(accs)
        half = 1.96 * statistics.stdev(accs) / math.sqrt(len(accs)) if len(accs) > 1 else 0.0
        rows.append({
            "family": family,
            "n": n,
            "learner_id": lid,
            "trials": len(rs),
            "mean_accuracy": mean,
            "ci95": [max(0.0, mean - half), min(1.0, mean + half)],
            "mean_wall_time": statistics.fmean(r.wall_time for r in rs),
            "illustrative": not rs[0].quantum_capable,
        })
    return rows


def quantum_within_delta(records: Sequence[BenchRecord], delta: float) -> bool:
    """Quantum failure rate per (family, n) stays under the binomial pass threshold."""
    groups: dict = {}
    for r in records:
        if r.quantum_capable:
            groups.setdefault((r.family, r.n), []).append(r.outcome != "ok")
    return all(sum(fails) / len(fails) <= pass_threshold(delta, len(fails)) for fails in groups.values())


def capability_gating_violations(records: Iterable[BenchRecord]) -> list[str]:
    """Records whose capability-call pattern contradicts the learner type."""
    bad = []
    for r in records:
        calls = r.capability_calls
        if not r.quantum_capable:
            if any(calls.values()):
                bad.append(f"{r.learner_id} trial {r.trial}: classical learner used the capability oracle")
            continue
        if r.outcome != "ok":
            continue
        if r.family == "modexp2c":
            ok = calls["order_calls"] > 0 and calls["dlog_calls"] > 0 and calls["factor_calls"] == 0
        elif r.family == "dlp":
            ok = calls["dlog_calls"] > 0 and calls["order_calls"] == 0 and calls["factor_calls"] == 0
        else:
            ok = calls["factor_calls"] > 0 and calls["order_calls"] == 0 and calls["dlog_calls"] == 0
        if not ok:
            bad.append(f"{r.learner_id} {r.family} trial {r.trial}: unexpected calls {calls}")
    return bad


# -- persistence ---------------------------------------------------------------------------

def dumps_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_jsonl(path: Path | str, rows: Iterable[dict]) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_jsonl(path: Path | str) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_instance(path: Path | str) -> InstanceRecord:
    return InstanceRecord.loads(Path(path).read_text())


def bench_record_from_json(d: dict) -> BenchRecord:
    d = {k: v for k, v in d.items() if k != "schema_version"}
    return BenchRecord(**d)

