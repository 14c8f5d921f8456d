"""Chance-constrained choice of one design input of a scalar surrogate.

The design input is one germ dimension pinned through an affine map
``xi = (value - center) / scale``; the remaining dimensions stay random.
Every failure-probability evaluation in a search reuses the same germ
draws (common random numbers), so the estimated curve is a deterministic
function of the design value and bisection on it is well posed.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .analysis import DEFAULT_SAMPLES, canonical_chunks
from .basis import eval_1d_all
from .projection import PcSurrogate, atomic_write_text

__all__ = [
    "DesignProblem",
    "DesignResult",
    "NonMonotoneWarning",
    "failure_probability",
    "optimal_design",
]


class NonMonotoneWarning(UserWarning):
    """Swept failure probability decreased somewhere along the sweep."""


@dataclass(frozen=True)
class DesignProblem:
    """``design_dim`` is a 0-based germ index; ``output`` picks the surrogate column."""

    surrogate: PcSurrogate
    design_dim: int
    center: float
    scale: float
    threshold: float
    target_prob: float = 0.05
    output: int = 0

    def __post_init__(self):
        if not 0 <= self.design_dim < self.surrogate.basis.dim:
            raise ValueError(f"design_dim {self.design_dim} outside 0..{self.surrogate.basis.dim - 1}")
        if not self.scale > 0:
            raise ValueError("design scale must be positive")
        if not 0 < self.target_prob <= 1:
            raise ValueError("target_prob must be in (0, 1]")
        if not 0 <= self.output < self.surrogate.n_outputs:
            raise ValueError(f"output {self.output} outside 0..{self.surrogate.n_outputs - 1}")

    def to_germ(self, value: float) -> float:
        return (value - self.center) / self.scale


class _Sampler:
    """Common random draws for one problem, reduced to a polynomial in the design germ.

    The surrogate series is regrouped as sum_j psi_j(xi_design) * g_j(rest),
    with g_j evaluated once on the stored draws.
    """

    def __init__(self, problem: DesignProblem, n: int, seed: int):
        self.problem = problem
        sur = problem.surrogate
        basis = sur.basis
        d = problem.design_dim
        c = sur.coeffs[:, problem.output]
        # grouped[k, j] = c_k when term k has degree j in the design dim
        grouped = np.zeros((basis.n_terms, basis.order + 1))
        grouped[np.arange(basis.n_terms), basis.terms[:, d]] = c
        self.g = np.empty((n, basis.order + 1))
        start = 0
        for xi in canonical_chunks(basis.families, n, seed):
            psi_rest = None
            for i, fam in enumerate(basis.families):
                if i != d:
                    factor = eval_1d_all(fam, basis.order, xi[:, i])[:, basis.terms[:, i]]
                    psi_rest = factor if psi_rest is None else np.multiply(psi_rest, factor, out=psi_rest)
            if psi_rest is None:
                psi_rest = np.ones((xi.shape[0], basis.n_terms))
            self.g[start : start + xi.shape[0]] = psi_rest @ grouped
            start += xi.shape[0]
        self.family = basis.families[d]
        self.order = basis.order
        self.log = sur.log_transformed
        self.n = n

    def __call__(self, value: float) -> tuple[float, float]:
        p = self.problem
        psi_d = eval_1d_all(self.family, self.order, p.to_germ(value))
        out = self.g @ psi_d
        if self.log:
            out = np.exp(out)
        prob = int((out > p.threshold).sum()) / self.n
        return prob, float(np.sqrt(prob * (1 - prob) / self.n))


def failure_probability(
    problem: DesignProblem, design_value: float, n: int = DEFAULT_SAMPLES, seed: int = 0
) -> tuple[float, float]:
    """P(output > threshold) with the design input pinned; returns (prob, stderr)."""
    return _Sampler(problem, n, seed)(design_value)


@dataclass(frozen=True)
class DesignResult:
    value: float
    prob: float
    stderr: float
    binding: bool
    sweep_values: np.ndarray = field(repr=False)
    sweep_probs: np.ndarray = field(repr=False)
    sweep_stderr: np.ndarray = field(repr=False)
    verified_prob: float | None = None
    warnings: tuple[str, ...] = ()
    margin_se: float = 0.0

    def sweep_csv(self, path) -> None:
        lines = ["design_value,prob,stderr"]
        lines += [f"{v:.17g},{p:.17g},{s:.17g}" for v, p, s in zip(self.sweep_values, self.sweep_probs, self.sweep_stderr)]
        atomic_write_text(path, "\n".join(lines) + "\n")

    def summary(self, problem: DesignProblem, n: int, seed: int) -> dict:
        return {
            "q_star": self.value,
            "prob_at_q_star": self.prob,
            "stderr_at_q_star": self.stderr,
            "binding": self.binding,
            "target_prob": problem.target_prob,
            "threshold": problem.threshold,
            "design_dim": problem.design_dim,
            "n": n,
            "seed": seed,
            "verified_prob": self.verified_prob,
            "margin_se": self.margin_se,
        }

    def summary_json(self, path, problem: DesignProblem, n: int, seed: int) -> None:
        atomic_write_text(path, json.dumps(self.summary(problem, n, seed), indent=2) + "\n")


def optimal_design(
    problem: DesignProblem,
    search_interval: tuple[float, float],
    n: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tol: float = 1e-4,
    n_sweep: int = 41,
    verify_seed: int | None = None,
    margin_se: float = 0.0,
) -> DesignResult:
    """Largest design value in the interval with failure probability below target.

    Requires P(lo) < target.  If P(hi) < target too the constraint does not
    bind and ``hi`` is returned.  Otherwise bisection keeps a feasible lower
    end and an infeasible upper end until they are ``tol`` apart and returns
    the lower end.  A sweep of ``n_sweep`` points is returned for plotting;
    any decrease along it is reported as a :class:`NonMonotoneWarning`.
    With ``verify_seed`` the answer is re-checked on fresh draws.

    A design value counts as feasible when ``prob + margin_se * stderr``
    is below the target.  With the default of zero the answer sits at the
    estimated boundary, so an independent sample lands on either side of
    the target about equally often; a margin of about 3 makes fresh-sample
    feasibility near certain at the cost of a more conservative design.
    """
    lo, hi = map(float, search_interval)
    if not lo < hi:
        raise ValueError("search interval must have lo < hi")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not margin_se >= 0:
        raise ValueError("margin_se must be >= 0")
    prob_at = _Sampler(problem, n, seed)
    target = problem.target_prob
    notes = []

    def feasible(p: float, s: float) -> bool:
        return p + margin_se * s < target

    grid = np.linspace(lo, hi, n_sweep)
    sweep = np.array([prob_at(v) for v in grid])
    drops = np.flatnonzero(np.diff(sweep[:, 0]) < 0)
    if drops.size:
        msg = (
            f"failure probability is not monotone along the sweep "
            f"({drops.size} decreases, first after design value {grid[drops[0]]:.6g})"
        )
        warnings.warn(msg, NonMonotoneWarning, stacklevel=2)
        notes.append(msg)

    p_lo, s_lo = prob_at(lo)
    if not feasible(p_lo, s_lo):
        raise ValueError(
            f"interval does not bracket the target: failure probability {p_lo:.4g} at lo={lo:.6g} is not below {target:g}"
        )
    p_hi, s_hi = prob_at(hi)
    if feasible(p_hi, s_hi):
        result_value, result_p, result_s, binding = hi, p_hi, s_hi, False
    else:
        a, b = lo, hi
        pa, sa = p_lo, s_lo
        while b - a >= tol:
            mid = 0.5 * (a + b)
            pm, sm = prob_at(mid)
            if feasible(pm, sm):
                a, pa, sa = mid, pm, sm
            else:
                b = mid
        result_value, result_p, result_s, binding = a, pa, sa, True

    verified = None
    if verify_seed is not None:
        verified = _Sampler(problem, n, verify_seed)(result_value)[0]
    return DesignResult(
        result_value, result_p, result_s, binding, grid, sweep[:, 0], sweep[:, 1], verified, tuple(notes), margin_se
    )
