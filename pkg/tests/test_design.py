import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import norm

from pcuq.basis import build_basis
from pcuq.design import DesignProblem, NonMonotoneWarning, failure_probability, optimal_design
from pcuq.projection import PcSurrogate
from pcuq.studies import caprock_design_problem

GOLDEN = Path(__file__).parent / "golden"
Z95 = norm.ppf(0.95)


def additive(dim=2):
    """X = xi_1 + xi_design with the design input last."""
    basis = build_basis(dim, 1)
    c = np.zeros(basis.n_terms)
    c[1], c[dim] = 1.0, 1.0
    return PcSurrogate(basis, c)


class TestFailureProbability:
    def test_infinite_threshold(self):
        assert failure_probability(DesignProblem(additive(), 1, 0, 1, math.inf), 0.0, 10**4)[0] == 0.0

    def test_symmetric(self):
        p, se = failure_probability(DesignProblem(additive(), 1, 0, 1, 0.0), 0.0, 10**6, 3)
        assert abs(p - 0.5) < 3 * se

    def test_normal_tail(self):
        p, se = failure_probability(DesignProblem(additive(), 1, 0, 1, Z95), 0.0, 10**6, 4)
        assert abs(p - 0.05) < 3 * se

    def test_affine_map(self):
        # design value 12 with center 10, scale 4 pins xi_design = 0.5
        prob = DesignProblem(additive(), 1, 10.0, 4.0, 1.0)
        p, se = failure_probability(prob, 12.0, 10**6, 5)
        assert abs(p - norm.sf(0.5)) < 3 * se

    def test_log_surrogate(self):
        sur = PcSurrogate(additive().basis, additive().coeffs, log_transformed=True)
        p, se = failure_probability(DesignProblem(sur, 1, 0, 1, 1.0), 0.0, 10**6, 6)
        assert abs(p - 0.5) < 3 * se

    def test_matches_direct_sampling(self, rng):
        # the regrouped evaluation equals evaluating the full series
        basis = build_basis(3, 3, ["hermite", "legendre", "hermite"])
        sur = PcSurrogate(basis, rng.standard_normal(basis.n_terms))
        from pcuq.analysis import canonical_chunks

        xi = np.concatenate(list(canonical_chunks(basis.families, 5000, 8)))
        xi[:, 1] = 0.3
        direct = (sur.evaluate(xi)[:, 0] > 0.2).mean()
        assert failure_probability(DesignProblem(sur, 1, 0.0, 1.0, 0.2), 0.3, 5000, 8)[0] == direct

    @pytest.mark.parametrize("kwargs", [{"design_dim": 2}, {"scale": 0.0}, {"target_prob": 0.0}, {"output": 1}])
    def test_invalid_problem(self, kwargs):
        args = dict(surrogate=additive(), design_dim=1, center=0.0, scale=1.0, threshold=0.0) | kwargs
        with pytest.raises(ValueError):
            DesignProblem(**args)


class TestOptimalDesign:
    def test_normal_quantile_inversion(self):
        # Pi(q) = Phi(xi_d(q)), so Q* = center - 1.6449 scale
        center, scale = 8.0, 0.5
        prob = DesignProblem(additive(), 1, center, scale, 0.0, 0.05)
        res = optimal_design(prob, (center - 4 * scale, center + 4 * scale), 10**6, 9)
        assert res.binding
        assert res.value == pytest.approx(center - Z95 * scale, abs=0.01 * scale)
        assert res.prob < 0.05

    def test_design_input_alone_is_a_step(self):
        # with X = xi_design only nothing is random once it is pinned
        basis = build_basis(1, 1)
        prob = DesignProblem(PcSurrogate(basis, [0.0, 1.0]), 0, 8.0, 0.5, 0.0)
        res = optimal_design(prob, (6.0, 10.0), 1000, 0, tol=1e-6)
        assert res.value == pytest.approx(8.0, abs=1e-6)
        assert set(res.sweep_probs) == {0.0, 1.0}

    def test_nonbinding_target(self):
        prob = DesignProblem(additive(), 1, 0, 1, 0.0, target_prob=1.0)
        res = optimal_design(prob, (-2, 2), 10**4, 0)
        assert res.value == 2 and not res.binding

    def test_not_bracketing(self):
        prob = DesignProblem(additive(), 1, 0, 1, 0.0)
        with pytest.raises(ValueError, match="bracket"):
            optimal_design(prob, (0, 2), 10**4, 0)

    def test_bad_interval(self):
        with pytest.raises(ValueError):
            optimal_design(DesignProblem(additive(), 1, 0, 1, 0.0), (1, 1), 10, 0)

    def test_nonmonotone_warning(self):
        # X = -xi_design^2 + xi_1: failure peaks in the middle
        basis = build_basis(2, 2)
        c = np.zeros(basis.n_terms)
        c[basis.index_of((1, 0))] = 1.0
        c[basis.index_of((0, 2))] = -1.0
        c[0] = -1.0  # -(He_2 + 1) = -xi^2
        prob = DesignProblem(PcSurrogate(basis, c), 1, 0, 1, 1.0, target_prob=0.5)
        with pytest.warns(NonMonotoneWarning):
            res = optimal_design(prob, (-3, 3), 10**4, 0)
        assert res.warnings

    def test_margin_is_conservative(self):
        prob = DesignProblem(additive(), 1, 0, 1, 0.0)
        plain = optimal_design(prob, (-4, 4), 10**5, 1)
        safe = optimal_design(prob, (-4, 4), 10**5, 1, margin_se=3)
        assert safe.value < plain.value
        assert safe.prob + 3 * safe.stderr < 0.05

    def test_sweep_csv(self, tmp_path):
        res = optimal_design(DesignProblem(additive(), 1, 0, 1, 0.0), (-4, 4), 10**4, 0, n_sweep=5)
        res.sweep_csv(tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "design_value,prob,stderr" and len(lines) == 6
        assert float(lines[1].split(",")[0]) == -4


@pytest.fixture(scope="module")
def caprock():
    s = json.loads((GOLDEN / "caprock_design.json").read_text())
    problem, interval = caprock_design_problem(s["order"], s["nq"])
    return s, problem, interval


class TestCaprock:
    def test_regression_value(self, caprock):
        s, problem, interval = caprock
        res = optimal_design(problem, interval, s["n"], s["seed"], s["tol"])
        assert res.value == s["q_star"]
        assert res.prob == s["prob_at_q_star"]

    def test_reproducible(self, caprock):
        _, problem, interval = caprock
        a = optimal_design(problem, interval, 10**5, 3)
        b = optimal_design(problem, interval, 10**5, 3)
        assert a.value == b.value and a.sweep_probs.tobytes() == b.sweep_probs.tobytes()

    def test_sweep_monotone(self, caprock):
        # pressure increases with injection rate, so failure probability must too
        _, problem, interval = caprock
        res = optimal_design(problem, interval, 10**5, 4)
        assert (np.diff(res.sweep_probs) >= -3 * res.sweep_stderr[1:]).all()

    def test_fresh_seed_consistency(self, caprock):
        # at the estimated boundary a fresh sample agrees with the target within noise
        s, problem, interval = caprock
        res = optimal_design(problem, interval, s["n"], s["seed"], s["tol"], verify_seed=s["seed"] + 1)
        se = math.sqrt(0.05 * 0.95 / s["n"])
        assert abs(res.verified_prob - problem.target_prob) < 3 * math.sqrt(2) * se

    def test_fresh_seed_feasible_with_margin(self, caprock):
        s, problem, interval = caprock
        res = optimal_design(problem, interval, s["n"], s["seed"], s["tol"], verify_seed=s["seed"] + 1, margin_se=3)
        assert res.verified_prob < problem.target_prob
