import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcuq.basis import build_basis
from pcuq.models import TABLE2_SPEC, ishigami, ishigami_reference, toy_leakage
from pcuq.projection import EvaluationTable, LogTransformError, PcSurrogate, project
from pcuq.quadrature import tensor_grid
from pcuq.sensitivity import sensitivity_timeseries, sobol_indices

EPS = 1e-12


def surrogate_from(basis, terms: dict, c0=0.0):
    c = np.zeros(basis.n_terms)
    c[0] = c0
    for alpha, v in terms.items():
        c[basis.index_of(alpha)] = v
    return PcSurrogate(basis, c)


@pytest.fixture(scope="module")
def ishigami_report():
    rule = tensor_grid(["legendre"] * 3, 10)
    table = EvaluationTable.from_rule(rule, ishigami(rule.nodes))
    return sobol_indices(project(table, rule, build_basis(3, 9, "legendre")))


class TestExamples:
    def test_additive(self):
        rep = sobol_indices(surrogate_from(build_basis(2, 2), {(1, 0): 1, (0, 1): 1}))
        np.testing.assert_allclose(rep.first[:, 0], [0.5, 0.5], atol=EPS)
        assert rep.second[0, 0] == 0 and rep.mixed[0] == 0
        np.testing.assert_array_equal(rep.total, rep.first)

    def test_pure_interaction(self):
        rep = sobol_indices(surrogate_from(build_basis(2, 2), {(1, 1): 1}))
        np.testing.assert_array_equal(rep.first[:, 0], [0, 0])
        assert rep.second[0, 0] == 1 and rep.mixed[0] == 1
        np.testing.assert_array_equal(rep.total[:, 0], [1, 1])

    def test_ishigami(self, ishigami_report):
        ref = ishigami_reference()
        assert ref["first"][:2] == pytest.approx([0.3139, 0.4424], abs=5e-5)
        assert ref["total"][[0, 2]] == pytest.approx([0.5576, 0.2437], abs=5e-5)
        rep = ishigami_report
        np.testing.assert_allclose(rep.first[:, 0], ref["first"], atol=1e-2)
        np.testing.assert_allclose(rep.total[:, 0], ref["total"], atol=1e-2)
        assert rep.second[rep.pairs.index((0, 2)), 0] == pytest.approx(ref["second"][(0, 2)], abs=1e-2)
        assert rep.variance[0] == pytest.approx(ref["variance"], rel=1e-3)

    def test_ishigami_pick_freeze(self, ishigami_report):
        # Saltelli pick-freeze estimator on the true function as an independent oracle
        rng = np.random.default_rng(77)
        n = 10**6
        a, b = rng.uniform(-1, 1, (n, 3)), rng.uniform(-1, 1, (n, 3))
        fa, fb = ishigami(a), ishigami(b)
        var = np.var(np.concatenate([fa, fb]))
        for i in range(3):
            ab = a.copy()
            ab[:, i] = b[:, i]
            terms = fb * (ishigami(ab) - fa)
            s_mc, se = terms.mean() / var, terms.std() / math.sqrt(n) / var
            assert abs(ishigami_report.first[i, 0] - s_mc) < 3 * se, (i, s_mc, se)

    def test_zero_variance_flagged(self):
        basis = build_basis(2, 1)
        rep = sobol_indices(PcSurrogate(basis, [[1.0, 2.0], [0.0, 1.0], [0.0, 0.0]]))
        assert list(rep.defined) == [False, True]
        assert np.isnan(rep.first[:, 0]).all() and np.isnan(rep.mixed[0])
        np.testing.assert_array_equal(rep.first[:, 1], [1, 0])

    def test_log_refused(self):
        with pytest.raises(LogTransformError):
            sobol_indices(PcSurrogate(build_basis(1, 1), [0, 1], log_transformed=True))


def brute_force(basis, c):
    """Classify each term by walking its multi-index."""
    d = basis.dim
    contrib = {alpha: c[k] ** 2 * basis.norms[k] for k, alpha in enumerate(basis.multi_indices()) if any(alpha)}
    var = sum(contrib.values())
    first, total = np.zeros(d), np.zeros(d)
    second = {pair: 0.0 for pair in itertools.combinations(range(d), 2)}
    mixed = 0.0
    for alpha, v in contrib.items():
        active = [i for i, a in enumerate(alpha) if a > 0]
        if len(active) == 1:
            first[active[0]] += v
        else:
            mixed += v
        if len(active) == 2:
            second[tuple(active)] += v
        for i in active:
            total[i] += v
    return first / var, np.array(list(second.values())) / var, total / var, mixed / var


@settings(max_examples=60, deadline=None)
@given(d=st.integers(1, 4), p=st.integers(1, 4), seed=st.integers(0, 2**32), data=st.data())
def test_against_brute_force(d, p, seed, data):
    fams = data.draw(st.lists(st.sampled_from(["hermite", "legendre"]), min_size=d, max_size=d))
    basis = build_basis(d, p, fams)
    c = np.random.default_rng(seed).standard_normal(basis.n_terms)
    rep = sobol_indices(PcSurrogate(basis, c))
    first, second, total, mixed = brute_force(basis, c)
    np.testing.assert_allclose(rep.first[:, 0], first, atol=EPS)
    np.testing.assert_allclose(rep.second[:, 0], second, atol=EPS)
    np.testing.assert_allclose(rep.total[:, 0], total, atol=EPS)
    assert rep.mixed[0] == pytest.approx(mixed, abs=EPS)
    # invariants
    for arr in (rep.first, rep.second, rep.total, rep.mixed):
        assert (arr >= -EPS).all() and (arr <= 1 + EPS).all()
    assert (rep.first <= rep.total + EPS).all()
    assert rep.first.sum() + rep.second.sum() <= 1 + EPS
    assert rep.mixed[0] == pytest.approx(1 - rep.first.sum(), abs=EPS)
    assert rep.first.sum() + rep.second.sum() + rep.higher_order[0] == pytest.approx(1, abs=EPS)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32), scale=st.floats(1e-3, 1e3), sign=st.sampled_from([-1, 1]), c0=st.floats(-1e3, 1e3))
def test_scale_invariance(seed, scale, sign, c0):
    basis = build_basis(3, 3)
    c = np.random.default_rng(seed).standard_normal(basis.n_terms)
    c2 = sign * scale * c
    c2[0] = c0
    a, b = sobol_indices(PcSurrogate(basis, c)), sobol_indices(PcSurrogate(basis, c2))
    for x, y in [(a.first, b.first), (a.second, b.second), (a.total, b.total), (a.mixed, b.mixed)]:
        np.testing.assert_allclose(x, y, atol=EPS)


class TestTimeseries:
    def test_time_constant(self, rng):
        basis = build_basis(3, 2)
        col = rng.standard_normal(basis.n_terms)
        sur = PcSurrogate(basis, np.tile(col[:, None], (1, 5)), output_labels=["0", "1", "2", "5", "9"])
        times, rep = sensitivity_timeseries(sur)
        np.testing.assert_array_equal(times, [0, 1, 2, 5, 9])
        assert rep.output_labels == ("0", "1", "2", "5", "9")
        for arr in (rep.first, rep.total, rep.second):
            assert (arr == arr[:, :1]).all()

    def test_single_dimension(self, rng):
        basis = build_basis(3, 3)
        c = np.zeros((basis.n_terms, 4))
        for k, alpha in enumerate(basis.multi_indices()):
            if alpha[1] == alpha[2] == 0:
                c[k] = rng.standard_normal(4)
        _, rep = sensitivity_timeseries(PcSurrogate(basis, c, output_labels=["1", "2", "3", "4"]))
        np.testing.assert_allclose(rep.total[0], 1, atol=EPS)
        np.testing.assert_array_equal(rep.total[1:], 0)

    def test_labels_must_increase(self):
        sur = PcSurrogate(build_basis(1, 1), [[0, 0], [1, 1]], output_labels=["5", "2"])
        with pytest.raises(ValueError):
            sensitivity_timeseries(sur)

    def test_toy_mixed_index_decays(self):
        times = np.array([20.0, 40.0, 60.0, 500.0, 1000.0, 1500.0])
        rule = tensor_grid(TABLE2_SPEC.families, 5)
        table = EvaluationTable.from_rule(rule, toy_leakage(TABLE2_SPEC.to_physical(rule.nodes), times).values, [f"{t:g}" for t in times])
        _, rep = sensitivity_timeseries(project(table, rule, build_basis(4, 4, TABLE2_SPEC.families)))
        early, late = rep.mixed[:3], rep.mixed[3:]
        assert (early > 0.1).all()
        assert late.max() < early.min()
        # around arrival porosity and injection dominate; late the permeabilities do
        for j in (1, 2):
            assert rep.total[[0, 3], j].min() > rep.total[[1, 2], j].max()
        assert rep.total[[1, 2], -1].min() > rep.total[[0, 3], -1].max()


def test_csv(tmp_path):
    rep = sobol_indices(PcSurrogate(build_basis(3, 2), np.arange(10.0), output_labels=["y"]))
    rep.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "label,S_1,S_2,S_3,S_12,S_13,S_23,T_1,T_2,T_3,T_mix,variance,defined"
    row = lines[1].split(",")
    assert row[0] == "y" and float(row[1]) == rep.first[0, 0] and row[-1] == "1"
