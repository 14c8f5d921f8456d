"""Largest injection rate keeping the toy caprock failure probability below target."""
import argparse
import math

from pcuq.design import optimal_design
from pcuq.studies import caprock_design_problem


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--threshold", type=float, default=330.0)
    parser.add_argument("--target", type=float, default=0.05)
    parser.add_argument("--samples", type=int, default=1_000_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--margin-se", type=float, default=0.0)
    parser.add_argument("--sweep-csv", default=None)
    args = parser.parse_args()

    problem, interval = caprock_design_problem(threshold=args.threshold, target_prob=args.target)
    res = optimal_design(problem, interval, args.samples, args.seed, verify_seed=args.seed + 1, margin_se=args.margin_se)
    if args.sweep_csv:
        res.sweep_csv(args.sweep_csv)
    print(f"log Q* = {res.value:.6f}  ->  Q* = {math.exp(res.value):.4f} kg/s")
    print(f"failure probability at Q*: {res.prob:.5f} +- {res.stderr:.1e} (fresh draws: {res.verified_prob:.5f})")
    print(f"binding: {res.binding}")


if __name__ == "__main__":
    main()
