#!/usr/bin/env python3
"""Empirical (epsilon, delta) check of ERM over enumerated DLP window concepts.

Sweeps the class size and reports the failure rate against the binomial
pass threshold. One PacEvalResult per line goes to --out.
"""
import argparse
import json

from learnsep.harness import dlp_window_erm_suite, realizable_sample_size


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[4, 16, 64, 256])
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--n", type=int, default=16, help="bit length of the prime")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="JSON Lines output path")
    args = ap.parse_args()

    rows = []
    for size in args.sizes:
        m = realizable_sample_size(size, args.epsilon, args.delta)
        res = dlp_window_erm_suite(size, args.epsilon, args.delta, args.trials, args.n, args.seed)
        row = {**res.to_json(), "class_size": size, "m_samples": m}
        row.pop("errors")
        rows.append(row)
        print(f"|C|={size:<5} m={m:<4} failure rate {res.failure_rate:.3f} "
              f"(threshold {res.threshold:.3f}) {'pass' if res.passed else 'FAIL'}")
    if args.out:
        with open(args.out, "w") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
