"""Command-line entry point: gen, learn, reduce, verify, bench.

Exit codes: 0 pass, 1 fail, 2 usage error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import random
import sys
from pathlib import Path

from . import harness
from . import concepts as C
from .concepts import EvalContext, HypothesisSpec, exact_dlog, hypothesis_evaluator, uniform_unit
from .errors import ContractError, DomainError
from .harness import BenchConfig, derive_seed
from .instances import InstanceRecord, generate, validate_2c
from .learners import (
    BASELINE_FAMILIES,
    LearnerReport,
    QuantumCapabilityOracle,
    classical_baseline_learn,
    learn_dcr_quantum,
    learn_dcri_quantum,
    learn_dlp_interval,
    learn_modexp_quantum,
)
from .numtheory import from_hex, to_hex
from .reductions import (
    constant_hypothesis_handle,
    make_cheating_learner,
    quantum_dcri_handle,
    quantum_modexp_handle,
    random_guess_handle,
    reduce_learner_to_cuberoot_evaluator,
    reduce_learner_to_dcr_point,
)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _common(parser: argparse.ArgumentParser, top: bool) -> None:
    default = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
    parser.add_argument("--seed", type=int, default=default(0), help="64-bit master seed")
    parser.add_argument("--out", type=Path, default=default(None), help="write the result here instead of stdout")
    parser.add_argument("--json", action="store_true", default=default(False), help="machine-readable stdout")
    parser.add_argument("--no-timing", action="store_true", default=default(False),
                        help="zero wall-clock fields so output replays byte-identically")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="learnsep", description="classical/quantum learning separation lab")
    _common(p, top=True)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance file")
    _common(g, top=False)
    g.add_argument("--kind", required=True, choices=["dlp", "dcr", "modexp2c", "dcri"])
    g.add_argument("--n", type=int, required=True, help="bit length")
    g.add_argument("--c-max", type=int, default=8)

    lrn = sub.add_parser("learn", help="run a learner against an instance")
    _common(lrn, top=False)
    lrn.add_argument("--instance", type=Path, required=True)
    lrn.add_argument("--learner", default="quantum", choices=["quantum", *BASELINE_FAMILIES])
    lrn.add_argument("--index", help="concept index (hex); drawn from the seed when omitted")
    lrn.add_argument("--epsilon", type=float, default=0.1)
    lrn.add_argument("--delta", type=float, default=0.1)
    lrn.add_argument("--m-samples", type=int, default=None)
    lrn.add_argument("--c-max", type=int, default=8)

    red = sub.add_parser("reduce", help="run a learner-to-solver reduction")
    _common(red, top=False)
    red.add_argument("--instance", type=Path, required=True)
    red.add_argument("--target", required=True, choices=["dcr_point", "cuberoot_evaluator"])
    red.add_argument("--learner", default="quantum", choices=["quantum", "cheating", "random", "constant"])
    red.add_argument("--challenge", help="cube-root challenge e (hex); drawn from the seed when omitted")
    red.add_argument("--test-points", type=int, default=1000)
    red.add_argument("--nonstandard-epsilon", type=float, default=None)
    red.add_argument("--nonstandard-delta", type=float, default=None)

    ver = sub.add_parser("verify", help="check an instance, or a learn report against its instance")
    _common(ver, top=False)
    ver.add_argument("--instance", type=Path, required=True)
    ver.add_argument("--report", type=Path, default=None)
    ver.add_argument("--m-eval", type=int, default=1000)

    b = sub.add_parser("bench", help="run the separation benchmark grid")
    _common(b, top=False)
    b.add_argument("--config", type=Path, default=None, help="JSON config {families, sizes, learners, ...}")
    return p


def _emit(args, text: str) -> None:
    if args.out is not None:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _load(path: Path) -> InstanceRecord:
    try:
        return harness.load_instance(path)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise UsageError(f"cannot read instance {path}: {exc}") from exc


def cmd_gen(args) -> int:
    rec = generate(args.kind, args.n, args.seed, c_max=args.c_max)
    if not args.no_timing:
        rec.created_at = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    _emit(args, rec.dumps())
    return EXIT_PASS


def _pick_index(rec: InstanceRecord, rng: random.Random, given):
    if given is not None:
        return from_hex(given)
    if rec.kind == "dlp":
        return rng.randrange(1, rec.public.p)
    secret = rec.secret.reveal("learn: choose target concept")
    if rec.kind == "dcr":
        return rng.randrange(1, rec.public.n + 1)
    if rec.kind == "modexp2c":
        while True:
            d = rng.randrange(1, secret.phi)
            if math.gcd(d, secret.phi) == 1:
                return d
    return secret.m


def _oracle_and_ctx(rec: InstanceRecord, index: int):
    ref = rec.instance_ref
    if rec.kind == "dlp":
        g = rec.public
        return (lambda s: C.dlp_oracle(g, index, s, ref)), EvalContext(g.p, g.n, exact_dlog(g))
    pub = rec.public
    ctx = EvalContext(pub.N, pub.n)
    make = {
        "dcr": lambda s: C.dcr_oracle(pub, index, s, ref),
        "modexp2c": lambda s: C.modexp_oracle(pub, index, s, ref),
        "dcri": lambda s: C.dcri_oracle(pub, index, s, ref),
    }[rec.kind]
    return make, ctx


def _learn(rec: InstanceRecord, learner: str, oracle, args) -> LearnerReport:
    class_size = {"dlp": lambda: rec.public.p - 1, "dcr": lambda: rec.public.n}.get(rec.kind, lambda: rec.public.N)()
    m = args.m_samples or harness.realizable_sample_size(class_size, args.epsilon, args.delta)
    if learner != "quantum":
        return classical_baseline_learn(oracle, learner, m, n=rec.public.n)
    if rec.kind == "dlp":
        return learn_dlp_interval(oracle, rec.public, QuantumCapabilityOracle(rec.public.p), m)
    qco = QuantumCapabilityOracle(rec.public.N)
    if rec.kind == "dcr":
        return learn_dcr_quantum(oracle, rec.public, qco, m)
    if rec.kind == "modexp2c":
        return learn_modexp_quantum(oracle, rec.public, args.delta, qco, c_max=args.c_max)
    return learn_dcri_quantum(oracle, rec.public, rec.public.n, args.delta, qco)


def cmd_learn(args) -> int:
    rec = _load(args.instance)
    index = _pick_index(rec, random.Random(derive_seed(args.seed, "concept")), args.index)
    secret = rec.secret.reveal("learn: check concept index") if rec.kind == "modexp2c" else None
    C.ConceptSpec(harness.CONCEPT_FAMILY[rec.kind], rec.instance_ref, index).validate_index(rec.public, secret)
    make_oracle, ctx = _oracle_and_ctx(rec, index)
    report = _learn(rec, args.learner, make_oracle(derive_seed(args.seed, "train")), args)
    accuracy = None
    if report.outcome == "ok" and report.hypothesis is not None:
        predict = hypothesis_evaluator(report.hypothesis, ctx)
        held_out = make_oracle(derive_seed(args.seed, "eval"))
        accuracy = 1.0 - harness.estimate_error_on_oracle(predict, held_out, harness.m_eval_for(args.epsilon))
    out = report.to_json(timing=not args.no_timing)
    out.update({
        "instance_ref": rec.instance_ref,
        "target_index": to_hex(index),
        "master_seed": args.seed,
        "held_out_accuracy": accuracy,
        "epsilon": args.epsilon,
        "quantum_capable": args.learner == "quantum",
    })
    _emit(args, harness.dumps_json(out))
    return EXIT_PASS if accuracy is not None and accuracy >= 1 - args.epsilon else EXIT_FAIL


def cmd_reduce(args) -> int:
    rec = _load(args.instance)
    if rec.kind == "dlp":
        raise UsageError("reductions need an RSA-style instance")
    pub = rec.public
    rng = random.Random(derive_seed(args.seed, "challenge"))
    qco = QuantumCapabilityOracle(pub.N)
    rseed = derive_seed(args.seed, "reduction")
    if args.target == "dcr_point":
        if args.challenge is not None:
            e, cheat_m = from_hex(args.challenge), None
        else:
            cheat_m = uniform_unit(pub.N, rng)
            e = pow(cheat_m, 3, pub.N)
        if args.learner == "cheating":
            if cheat_m is None:
                cheat_m = pow(e, rec.secret.reveal("cheating learner setup").d_star, pub.N)
            handle = make_cheating_learner("dcri", cheat_m)
        elif args.learner == "quantum":
            handle = quantum_dcri_handle(pub, qco)
        elif args.learner == "random":
            handle = random_guess_handle(pub, derive_seed(args.seed, "guess"))
        else:
            raise UsageError("constant learner only applies to the cuberoot_evaluator target")
        nonstd = {k: v for k, v in (("epsilon", args.nonstandard_epsilon), ("delta", args.nonstandard_delta))
                  if v is not None}
        outcome = reduce_learner_to_dcr_point(handle, pub, pub.n, e, rseed, nonstandard=nonstd or None)
    else:
        points = [uniform_unit(pub.N, rng) for _ in range(args.test_points)]
        if args.learner == "cheating":
            handle = make_cheating_learner("modexp", rec.secret.reveal("cheating learner setup").d_star)
        elif args.learner == "quantum":
            handle = quantum_modexp_handle(pub, qco)
        elif args.learner == "constant":
            handle = constant_hypothesis_handle()
        else:
            raise UsageError("random learner only applies to the dcr_point target")
        outcome = reduce_learner_to_cuberoot_evaluator(handle, pub, points, rec.secret, rseed)
    out = outcome.to_json(timing=not args.no_timing)
    out["capability_calls"] = qco.snapshot()
    out["master_seed"] = args.seed
    _emit(args, harness.dumps_json(out))
    return EXIT_PASS if outcome.verified else EXIT_FAIL


def _verify_instance(rec: InstanceRecord) -> dict:
    checks = {}
    try:
        rec.validate()
        checks["valid"] = True
    except Exception as exc:
        checks["valid"] = False
        checks["error"] = str(exc)
    if rec.kind != "dlp" and rec.secret.present:
        secret = rec.secret.reveal("verify: instance conditions")
        two = validate_2c(secret)
        checks["two_adic"] = {"c": two.c, "c_prime": two.c_prime, "c_ok": two.c_ok, "c_prime_ok": two.c_prime_ok,
                              "odd_parts_coprime": two.odd_parts_coprime, "cube_invertible": two.cube_invertible}
        if rec.kind == "modexp2c" and secret.N <= harness.EXHAUSTIVE_LIMIT:
            freqs = []
            for idx, (p, k) in enumerate(secret.odd_part_factors):
                f = harness.lemma_b1_frequency(rec, idx, exhaustive=True)
                expected = (p - 1) / p
                freqs.append({"prime": p, "exponent": k, "frequency": f, "expected": expected,
                              "ok": abs(f - expected) < 1e-12 and f >= 0.5})
            checks["lemma_b1"] = freqs
    ok = checks["valid"] and all(f["ok"] for f in checks.get("lemma_b1", []))
    if rec.kind == "modexp2c":
        t = checks["two_adic"]
        ok = ok and t["odd_parts_coprime"] and t["cube_invertible"]
    checks["pass"] = ok
    return checks


def cmd_verify(args) -> int:
    rec = _load(args.instance)
    out = {"schema_version": 1, "instance_ref": rec.instance_ref, "kind": rec.kind, "instance": _verify_instance(rec)}
    ok = out["instance"]["pass"]
    if args.report is not None:
        rep = json.loads(Path(args.report).read_text())
        if rep.get("instance_ref") != rec.instance_ref:
            raise UsageError("report does not belong to this instance")
        index = from_hex(rep["target_index"])
        make_oracle, ctx = _oracle_and_ctx(rec, index)
        if rep.get("hypothesis") is None:
            out["report"] = {"pass": False, "reason": f"learner outcome {rep.get('outcome')}"}
            ok = False
        else:
            h = HypothesisSpec.from_json(rep["hypothesis"])
            predict = hypothesis_evaluator(h, ctx)
            acc = 1.0 - harness.estimate_error_on_oracle(predict, make_oracle(derive_seed(args.seed, "verify")),
                                                         args.m_eval)
            eps = rep.get("epsilon", 0.1)
            classical_clean = rep.get("quantum_capable", True) or not any(rep["capability_calls"].values())
            passed = acc >= 1 - eps and classical_clean
            out["report"] = {"accuracy": acc, "epsilon": eps, "capability_gating_ok": classical_clean,
                             "pass": passed}
            ok = ok and passed
    out["pass"] = ok
    _emit(args, harness.dumps_json(out))
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_bench(args) -> int:
    raw = {}
    if args.config is not None:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
    cfg = BenchConfig.from_json(raw)
    if "seed" not in raw:
        cfg.seed = args.seed
    records = harness.separation_benchmark(cfg)
    timing = not args.no_timing
    rows = [r.to_json(timing=timing) for r in records]
    violations = harness.capability_gating_violations(records)
    quantum_ok = harness.quantum_within_delta(records, cfg.delta)
    summary = harness.summarize(records)
    if not timing:
        for row in summary:
            row["mean_wall_time"] = 0.0
    if args.out is not None:
        harness.write_jsonl(args.out, rows)
    if args.json:
        if args.out is None:
            for row in rows:
                sys.stdout.write(json.dumps(row, sort_keys=True) + "\n")
        sys.stdout.write(json.dumps({"summary": summary, "gating_violations": violations,
                                     "config": cfg.to_json()}, sort_keys=True) + "\n")
    else:
        print(f"{'family':<9}{'n':>4}  {'learner':<36}{'acc':>7}  {'95% CI':<15}{'time[s]':>9}")
        for row in summary:
            tag = "  (illustrative)" if row["illustrative"] else ""
            print(f"{row['family']:<9}{row['n']:>4}  {row['learner_id']:<36}{row['mean_accuracy']:>7.3f}  "
                  f"[{row['ci95'][0]:.3f},{row['ci95'][1]:.3f}]{row['mean_wall_time']:>9.3f}{tag}")
        if violations:
            print("capability gating violations:", *violations, sep="\n  ")
    return EXIT_PASS if quantum_ok and not violations else EXIT_FAIL


COMMANDS = {"gen": cmd_gen, "learn": cmd_learn, "reduce": cmd_reduce, "verify": cmd_verify, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not 0 <= args.seed < 1 << 64:
        parser.error("--seed must be a 64-bit unsigned integer")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DomainError, ContractError) as exc:
        print(f"learnsep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
