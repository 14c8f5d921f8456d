"""Ready-made surrogates and design problems for the shipped example models.

Scripts, golden-file regeneration and tests all build their examples here
so a regression value always refers to the same construction.
"""
from __future__ import annotations

from typing import Sequence

from .basis import build_basis
from .design import DesignProblem
from .models import TABLE2_SPEC, ishigami, toy_caprock_pressure, toy_leakage
from .projection import EvaluationTable, PcSurrogate, project
from .quadrature import tensor_grid

__all__ = ["ishigami_surrogate", "toy_leakage_surrogate", "caprock_surrogate", "caprock_design_problem"]

# Injection rate is the last Table 2 input.
CAPROCK_DESIGN_DIM = 3
CAPROCK_THRESHOLD = 330.0


def ishigami_surrogate(order: int = 9, nq: int = 10, a: float = 7.0, b: float = 0.1) -> PcSurrogate:
    rule = tensor_grid(["legendre"] * 3, nq)
    table = EvaluationTable.from_rule(rule, ishigami(rule.nodes, a, b), ["ishigami"])
    return project(table, rule, build_basis(3, order, "legendre"))


def toy_leakage_surrogate(
    times: Sequence[float], order: int = 4, nq: int = 5, log_transform: bool = False
) -> PcSurrogate:
    rule = tensor_grid(TABLE2_SPEC.families, nq)
    series = toy_leakage(TABLE2_SPEC.to_physical(rule.nodes), times)
    table = EvaluationTable.from_rule(rule, series.values, [f"{t:g}" for t in series.times])
    return project(table, rule, build_basis(TABLE2_SPEC.dim, order, TABLE2_SPEC.families), log_transform)


def caprock_surrogate(order: int = 4, nq: int = 5) -> PcSurrogate:
    rule = tensor_grid(TABLE2_SPEC.families, nq)
    table = EvaluationTable.from_rule(rule, toy_caprock_pressure(TABLE2_SPEC.to_physical(rule.nodes)), ["p_caprock"])
    return project(table, rule, build_basis(TABLE2_SPEC.dim, order, TABLE2_SPEC.families))


def caprock_design_problem(
    order: int = 4, nq: int = 5, threshold: float = CAPROCK_THRESHOLD, target_prob: float = 0.05
) -> tuple[DesignProblem, tuple[float, float]]:
    """Toy caprock problem over log injection rate, with a +-3 sigma search interval."""
    center, scale = TABLE2_SPEC.parameters[CAPROCK_DESIGN_DIM].design_center_scale()
    problem = DesignProblem(caprock_surrogate(order, nq), CAPROCK_DESIGN_DIM, center, scale, threshold, target_prob)
    return problem, (center - 3 * scale, center + 3 * scale)
