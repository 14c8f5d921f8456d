"""Non-intrusive spectral projection (NISP) of model evaluations onto a PC basis."""
from __future__ import annotations

import json
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .basis import PcBasis
from .quadrature import QuadratureRule, check_discrete_orthogonality, tensor_grid

__all__ = [
    "EvaluationTable",
    "PcSurrogate",
    "L2Error",
    "OrthogonalityWarning",
    "NestedGridWarning",
    "LogTransformError",
    "compensated_weighted_sum",
    "project",
    "relative_l2_error",
    "moments",
    "write_archive",
    "read_archive",
    "atomic_write_text",
]


class OrthogonalityWarning(UserWarning):
    """Quadrature rule does not preserve discrete orthogonality of the basis."""


class NestedGridWarning(UserWarning):
    """Validation grid shares its nodes with the construction grid."""


class LogTransformError(ValueError):
    """Operation needs a surrogate in physical space (use the sampling path)."""


def _labels(labels, m: int) -> tuple[str, ...]:
    if labels is None:
        return tuple(str(i) for i in range(m))
    labels = tuple(str(v) for v in labels)
    if len(labels) != m:
        raise ValueError(f"{len(labels)} labels for {m} outputs")
    return labels


@dataclass(frozen=True)
class EvaluationTable:
    """Model outputs at quadrature nodes, shape ``(n_nodes, n_outputs)``."""

    rule_id: str
    outputs: np.ndarray = field(repr=False)
    output_labels: tuple[str, ...] = None

    def __post_init__(self):
        out = np.asarray(self.outputs, dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        if out.ndim != 2:
            raise ValueError("outputs must be a 2D (nodes x outputs) array")
        bad = ~np.isfinite(out)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise ValueError(f"non-finite output at node {row}, output {col}")
        out = out.copy()
        out.setflags(write=False)
        object.__setattr__(self, "outputs", out)
        object.__setattr__(self, "output_labels", _labels(self.output_labels, out.shape[1]))

    @property
    def n_outputs(self) -> int:
        return self.outputs.shape[1]

    @classmethod
    def from_rule(cls, rule: QuadratureRule, outputs, labels=None) -> "EvaluationTable":
        table = cls(rule.rule_id, outputs, labels)
        if table.outputs.shape[0] != rule.n_nodes:
            raise ValueError(f"table has {table.outputs.shape[0]} rows, rule has {rule.n_nodes} nodes")
        return table


@dataclass(frozen=True)
class PcSurrogate:
    """Truncated PC expansion; ``coeffs`` is ``(n_terms, n_outputs)``.

    With ``log_transformed`` the expansion approximates ``log X`` and
    evaluation returns ``exp`` of the series.  ``points_per_dim`` records
    the construction grid, when known, for cross-validation checks.
    """

    basis: PcBasis
    coeffs: np.ndarray = field(repr=False)
    log_transformed: bool = False
    output_labels: tuple[str, ...] = None
    points_per_dim: tuple[int, ...] | None = None

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if c.shape[0] != self.basis.n_terms:
            raise ValueError(f"{c.shape[0]} coefficient rows for {self.basis.n_terms} basis terms")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "output_labels", _labels(self.output_labels, c.shape[1]))
        if self.points_per_dim is not None:
            object.__setattr__(self, "points_per_dim", tuple(int(n) for n in self.points_per_dim))

    @property
    def n_outputs(self) -> int:
        return self.coeffs.shape[1]

    def evaluate_series(self, points) -> np.ndarray:
        """The polynomial series itself (log-space for log surrogates)."""
        psi = self.basis.evaluate(points)
        return psi @ self.coeffs

    def evaluate(self, points) -> np.ndarray:
        """Surrogate values, ``(n_points, n_outputs)`` or ``(n_outputs,)``."""
        series = self.evaluate_series(points)
        return np.exp(series) if self.log_transformed else series

    def select(self, outputs: Sequence[int]) -> "PcSurrogate":
        idx = list(outputs)
        return PcSurrogate(
            self.basis,
            self.coeffs[:, idx],
            self.log_transformed,
            [self.output_labels[i] for i in idx],
            self.points_per_dim,
        )


def compensated_weighted_sum(weights: np.ndarray, psi: np.ndarray, y: np.ndarray) -> np.ndarray:
    """sum_j w_j psi[j, :, None] * y[j, None, :] with Neumaier compensation.

    Returns an ``(n_terms, n_outputs)`` array.  The loop runs over nodes so
    each step is a vectorized update of the whole coefficient block.
    """
    total = np.zeros((psi.shape[1], y.shape[1]))
    comp = np.zeros_like(total)
    for j in range(weights.shape[0]):
        term = np.outer(weights[j] * psi[j], y[j])
        t = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - t) + term, (term - t) + total)
        total = t
    return total + comp


def project(
    table: EvaluationTable,
    rule: QuadratureRule,
    basis: PcBasis,
    log_transform: bool = False,
    orthogonality_tol: float = 1e-10,
) -> PcSurrogate:
    """Compute c_k = <Y Psi_k> / <Psi_k^2> by quadrature over ``rule``.

    ``Y`` is the raw output or, with ``log_transform``, its natural log.
    A rule that fails the discrete orthogonality check for ``basis`` emits
    an :class:`OrthogonalityWarning` but is still used.
    """
    if table.outputs.shape[0] != rule.n_nodes:
        raise ValueError(f"evaluation table has {table.outputs.shape[0]} rows but rule has {rule.n_nodes} nodes")
    if table.rule_id != rule.rule_id:
        raise ValueError(f"evaluation table was built on {table.rule_id!r}, not {rule.rule_id!r}")
    if basis.dim != rule.dim:
        raise ValueError(f"basis dim {basis.dim} != rule dim {rule.dim}")
    if tuple(basis.families) != tuple(rule.families):
        raise ValueError("basis and quadrature families differ")

    y = table.outputs
    if log_transform:
        if (y <= 0).any():
            row, col = np.argwhere(y <= 0)[0]
            raise ValueError(
                f"log-transform needs positive outputs; node {row}, output {table.output_labels[col]!r} is {y[row, col]!r}"
            )
        y = np.log(y)

    report = check_discrete_orthogonality(basis, rule, orthogonality_tol)
    if not report.passed:
        warnings.warn(
            f"rule {rule.rule_id} does not preserve discrete orthogonality of the order-{basis.order} basis "
            f"(max deviation {report.max_deviation:.3g} > {orthogonality_tol:g})",
            OrthogonalityWarning,
            stacklevel=2,
        )

    psi = basis.evaluate(rule.nodes)
    moments_ = compensated_weighted_sum(rule.weights, psi, y)
    coeffs = moments_ / basis.norms[:, None]
    return PcSurrogate(basis, coeffs, bool(log_transform), table.output_labels, rule.points_per_dim)


@dataclass(frozen=True)
class L2Error:
    """Relative L2 errors per output.

    ``value`` is measured in the space the surrogate approximates (log
    space for log surrogates); ``physical`` always compares the original
    quantity with the (exponentiated) surrogate.
    """

    value: np.ndarray
    physical: np.ndarray
    space: str


def _grid_is_nested(surrogate: PcSurrogate, rule: QuadratureRule) -> bool:
    if surrogate.points_per_dim is None:
        return False
    if surrogate.points_per_dim == rule.points_per_dim:
        return True
    build = tensor_grid(surrogate.basis.families, surrogate.points_per_dim)
    for i in range(rule.dim):
        ref = np.unique(build.nodes[:, i])
        val = np.unique(rule.nodes[:, i])
        if not all(np.isclose(ref, v, rtol=0, atol=1e-12).any() for v in val):
            return False
    return True


def _rel_err(w, exact, approx):
    num = (w[:, None] * (exact - approx) ** 2).sum(axis=0)
    den = (w[:, None] * exact**2).sum(axis=0)
    if (den == 0).any():
        bad = int(np.flatnonzero(den == 0)[0])
        raise ZeroDivisionError(f"validation output {bad} is identically zero")
    return np.sqrt(num / den)


def relative_l2_error(
    surrogate: PcSurrogate, validation: EvaluationTable, validation_rule: QuadratureRule
) -> L2Error:
    """Quadrature estimate of the relative L2 error on a validation grid.

    The validation grid should not be nested in the construction grid;
    when it is, a :class:`NestedGridWarning` is emitted.
    """
    if validation_rule.dim != surrogate.basis.dim:
        raise ValueError("validation rule dimension does not match surrogate basis")
    if validation.outputs.shape != (validation_rule.n_nodes, surrogate.n_outputs):
        raise ValueError(
            f"validation table shape {validation.outputs.shape} does not match "
            f"({validation_rule.n_nodes}, {surrogate.n_outputs})"
        )
    if _grid_is_nested(surrogate, validation_rule):
        warnings.warn(
            "validation and construction grids are nested/identical; the error estimate is not a cross-validation",
            NestedGridWarning,
            stacklevel=2,
        )
    w = validation_rule.weights
    x = validation.outputs
    series = surrogate.evaluate_series(validation_rule.nodes)
    if surrogate.log_transformed:
        if (x <= 0).any():
            raise ValueError("log-space error needs positive validation outputs")
        value = _rel_err(w, np.log(x), series)
        physical = _rel_err(w, x, np.exp(series))
        return L2Error(value, physical, "log")
    value = _rel_err(w, x, series)
    return L2Error(value, value, "physical")


def moments(surrogate: PcSurrogate) -> tuple[np.ndarray, np.ndarray]:
    """Mean c_0 and variance sum_{k>=1} c_k^2 <Psi_k^2> per output."""
    if surrogate.log_transformed:
        raise LogTransformError("moments of a log-transformed surrogate must be estimated by sampling")
    c = surrogate.coeffs
    mean = c[0].copy()
    var = (c[1:] ** 2 * surrogate.basis.norms[1:, None]).sum(axis=0)
    return mean, var


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def archive_dict(surrogate: PcSurrogate) -> dict:
    data = {
        "basis": surrogate.basis.to_dict(),
        "log_transformed": surrogate.log_transformed,
        "output_labels": list(surrogate.output_labels),
        "coeffs": surrogate.coeffs.tolist(),
    }
    if surrogate.points_per_dim is not None:
        data["points_per_dim"] = list(surrogate.points_per_dim)
    return data


def write_archive(surrogate: PcSurrogate, path) -> None:
    """Serialize to the JSON expansion archive (coefficients row-major by term)."""
    atomic_write_text(path, json.dumps(archive_dict(surrogate), indent=1) + "\n")


def read_archive(path) -> PcSurrogate:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    try:
        basis = PcBasis.from_dict(data["basis"])
        coeffs = np.array(data["coeffs"], dtype=float)
        return PcSurrogate(
            basis,
            coeffs.reshape(basis.n_terms, -1),
            bool(data["log_transformed"]),
            data["output_labels"],
            data.get("points_per_dim"),
        )
    except KeyError as exc:
        raise ValueError(f"{path}: expansion archive is missing field {exc}") from None
