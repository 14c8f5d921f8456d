"""Variance-based sensitivity indices read off PC coefficients."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .basis import PcBasis
from .projection import LogTransformError, PcSurrogate, atomic_write_text

__all__ = ["SensitivityReport", "sobol_indices", "sensitivity_timeseries", "term_partition"]


@dataclass(frozen=True)
class SensitivityReport:
    """Sobol indices per output.

    ``first`` and ``total`` are ``(dim, M)``, ``second`` is ``(n_pairs, M)``
    with pairs in ``itertools.combinations`` order, ``mixed`` and
    ``variance`` have length ``M``.  Columns of zero-variance outputs are
    NaN and flagged in ``defined``.
    """

    first: np.ndarray
    second: np.ndarray
    total: np.ndarray
    mixed: np.ndarray
    variance: np.ndarray
    defined: np.ndarray
    pairs: tuple[tuple[int, int], ...]
    output_labels: tuple[str, ...]

    @property
    def higher_order(self) -> np.ndarray:
        """Share of variance from interactions of three or more inputs."""
        return self.mixed - self.second.sum(axis=0)

    def to_csv(self, path) -> None:
        d = self.first.shape[0]
        sep = "" if d < 10 else "_"
        header = (
            ["label"]
            + [f"S_{i + 1}" for i in range(d)]
            + [f"S_{i + 1}{sep}{j + 1}" for i, j in self.pairs]
            + [f"T_{i + 1}" for i in range(d)]
            + ["T_mix", "variance", "defined"]
        )
        lines = [",".join(header)]
        for m, label in enumerate(self.output_labels):
            row = [label]
            row += [f"{v:.17g}" for v in self.first[:, m]]
            row += [f"{v:.17g}" for v in self.second[:, m]]
            row += [f"{v:.17g}" for v in self.total[:, m]]
            row += [f"{self.mixed[m]:.17g}", f"{self.variance[m]:.17g}", str(int(self.defined[m]))]
            lines.append(",".join(row))
        atomic_write_text(path, "\n".join(lines) + "\n")


def term_partition(basis: PcBasis):
    """Boolean masks over terms: (first[d, K], second[pairs, K], total[d, K], mixed[K])."""
    support = basis.terms > 0
    order = support.sum(axis=1)
    d = basis.dim
    first = np.array([(order == 1) & support[:, i] for i in range(d)])
    pairs = tuple(itertools.combinations(range(d), 2))
    second = np.array(
        [(order == 2) & support[:, i] & support[:, j] for i, j in pairs], dtype=bool
    ).reshape(len(pairs), basis.n_terms)
    total = support.T.copy()
    mixed = order > 1
    return first, second, total, mixed, pairs


def sobol_indices(surrogate: PcSurrogate) -> SensitivityReport:
    """First, second, total and mixed indices from the coefficient partition.

    Each term k >= 1 contributes c_k^2 <Psi_k^2> to the variance; indices
    sum those contributions over terms whose multi-index support matches.
    """
    if surrogate.log_transformed:
        raise LogTransformError(
            "sensitivity indices of a log-transformed surrogate describe log X, not X; project X directly"
        )
    basis = surrogate.basis
    contrib = surrogate.coeffs**2 * basis.norms[:, None]
    contrib[0] = 0.0
    variance = contrib.sum(axis=0)
    defined = variance > 0
    first_m, second_m, total_m, mixed_m, pairs = term_partition(basis)

    scale = np.full(variance.shape, np.nan)
    scale[defined] = 1.0 / variance[defined]
    first = (first_m.astype(float) @ contrib) * scale
    second = (second_m.astype(float) @ contrib) * scale
    total = (total_m.astype(float) @ contrib) * scale
    mixed = (mixed_m.astype(float) @ contrib) * scale
    return SensitivityReport(first, second, total, mixed, variance, defined, pairs, surrogate.output_labels)


def sensitivity_timeseries(surrogate: PcSurrogate) -> tuple[np.ndarray, SensitivityReport]:
    """Indices per time label; labels must parse as increasing numbers."""
    times = np.array([float(t) for t in surrogate.output_labels])
    if (np.diff(times) <= 0).any():
        raise ValueError("time labels must be strictly increasing")
    return times, sobol_indices(surrogate)
