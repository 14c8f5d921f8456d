"""Rewrite the golden files under tests/golden.

Run only after an intentional change to the toy models or the design
search; the tests compare against these files exactly.
"""
import argparse
import json
from pathlib import Path

import numpy as np

from pcuq.cli import default_times
from pcuq.design import optimal_design
from pcuq.models import TABLE2_SPEC, extract_qois, format_float, toy_leakage
from pcuq.projection import atomic_write_text
from pcuq.studies import caprock_design_problem

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "golden"
DESIGN_SETTINGS = {"order": 4, "nq": 5, "n": 1_000_000, "seed": 0, "tol": 1e-4}


def median_curve() -> None:
    medians = TABLE2_SPEC.to_physical(np.zeros((1, TABLE2_SPEC.dim)))
    series = toy_leakage(medians, default_times())
    lines = ["t,q_leak"] + [f"{format_float(t)},{format_float(v)}" for t, v in zip(series.times, series.values[0])]
    atomic_write_text(GOLDEN / "toy_leakage_median.csv", "\n".join(lines) + "\n")
    q = extract_qois(series)
    qois = {"t_arrival": float(q.t_arrival[0]), "q_max": float(q.q_max[0]), "t_maxleak": float(q.t_maxleak[0])}
    atomic_write_text(GOLDEN / "toy_leakage_median_qoi.json", json.dumps(qois, indent=2) + "\n")


def caprock_design() -> None:
    s = DESIGN_SETTINGS
    problem, interval = caprock_design_problem(s["order"], s["nq"])
    res = optimal_design(problem, interval, s["n"], s["seed"], s["tol"])
    out = dict(s, q_star=res.value, prob_at_q_star=res.prob, threshold=problem.threshold, target_prob=problem.target_prob)
    atomic_write_text(GOLDEN / "caprock_design.json", json.dumps(out, indent=2) + "\n")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--only", choices=["median", "design"])
    args = parser.parse_args()
    GOLDEN.mkdir(parents=True, exist_ok=True)
    if args.only in (None, "median"):
        median_curve()
    if args.only in (None, "design"):
        caprock_design()


if __name__ == "__main__":
    main()
