"""Gaussian quadrature rules for the PC germ densities and full tensor grids."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .basis import PcBasis, PolyFamily

__all__ = [
    "QuadratureRule",
    "OrthogonalityReport",
    "gauss_1d",
    "tensor_grid",
    "isotropic_grid",
    "check_discrete_orthogonality",
    "DEFAULT_HIERARCHY",
]

DEFAULT_HIERARCHY = (2, 3, 4, 5)
MAX_NODES = 50_000_000


def _jacobi_offdiag(family: PolyFamily, n: int) -> np.ndarray:
    # Off-diagonal of the Jacobi matrix of the monic recurrence; both
    # families are symmetric so the diagonal vanishes.
    k = np.arange(1, n, dtype=float)
    if family is PolyFamily.HERMITE:
        return np.sqrt(k)
    return k / np.sqrt(4.0 * k * k - 1.0)


def gauss_1d(family: PolyFamily | str, n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss rule for the family's probability density.

    Nodes are eigenvalues of the symmetric tridiagonal Jacobi matrix,
    weights the squared first components of its eigenvectors (Golub-Welsch).
    The rule is exact for polynomials of degree <= 2n - 1, nodes ascend and
    weights sum to one.
    """
    family = PolyFamily.parse(family)
    if n < 1:
        raise ValueError("number of quadrature points must be >= 1")
    if n == 1:
        return np.zeros(1), np.ones(1)
    off = _jacobi_offdiag(family, n)
    jacobi = np.diag(off, 1) + np.diag(off, -1)
    nodes, vecs = np.linalg.eigh(jacobi)
    weights = vecs[0, :] ** 2
    order = np.argsort(nodes)
    nodes, weights = nodes[order], weights[order]
    # Both densities are symmetric: enforce it exactly.
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    weights = weights / math.fsum(weights)
    return nodes, weights


@dataclass(frozen=True)
class QuadratureRule:
    """Full tensor Gauss rule; ``nodes`` is ``(n_nodes, dim)`` in odometer order."""

    families: tuple[PolyFamily, ...]
    points_per_dim: tuple[int, ...]
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def dim(self) -> int:
        return len(self.families)

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    @property
    def rule_id(self) -> str:
        fams = "-".join(f.value for f in self.families)
        return f"gauss[{fams}]:" + "x".join(str(n) for n in self.points_per_dim)


def tensor_grid(families: Sequence[PolyFamily | str], points_per_dim: Sequence[int] | int) -> QuadratureRule:
    """Cartesian product of 1D Gauss rules, last dimension varying fastest."""
    fams = tuple(PolyFamily.parse(f) for f in families)
    if not fams:
        raise ValueError("need at least one dimension")
    if isinstance(points_per_dim, (int, np.integer)):
        npts = (int(points_per_dim),) * len(fams)
    else:
        npts = tuple(int(n) for n in points_per_dim)
    if len(npts) != len(fams):
        raise ValueError(f"{len(npts)} point counts for {len(fams)} dimensions")
    if any(n < 1 for n in npts):
        raise ValueError("every dimension needs at least one quadrature point")
    total = math.prod(npts)
    if total > MAX_NODES:
        raise OverflowError(f"tensor grid would have {total} nodes (cap {MAX_NODES})")

    rules = [gauss_1d(f, n) for f, n in zip(fams, npts)]
    mesh = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    nodes = np.stack([m.reshape(-1) for m in mesh], axis=1)
    wmesh = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    weights = np.ones(total)
    for w in wmesh:
        weights *= w.reshape(-1)
    return QuadratureRule(families=fams, points_per_dim=npts, nodes=nodes, weights=weights)


def isotropic_grid(basis: PcBasis, n_q: int) -> QuadratureRule:
    """Tensor grid matched to ``basis`` with ``n_q`` points per dimension."""
    return tensor_grid(basis.families, n_q)


@dataclass(frozen=True)
class OrthogonalityReport:
    max_deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol


def check_discrete_orthogonality(basis: PcBasis, rule: QuadratureRule, tol: float = 1e-10) -> OrthogonalityReport:
    """Largest |<Psi_i, Psi_j>_quad - delta_ij <Psi_i^2>| over the basis."""
    if basis.dim != rule.dim:
        raise ValueError(f"basis has dim {basis.dim}, rule has dim {rule.dim}")
    psi = basis.evaluate(rule.nodes)
    gram = psi.T @ (rule.weights[:, None] * psi)
    dev = np.abs(gram - np.diag(basis.norms)).max()
    return OrthogonalityReport(max_deviation=float(dev), tol=tol)
