"""Orthogonal polynomial families and the total-degree multivariate PC basis."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "PolyFamily",
    "MultiIndex",
    "PcBasis",
    "eval_1d",
    "eval_1d_all",
    "norm_1d",
    "build_basis",
    "eval_basis",
    "total_degree_multi_indices",
]

# Sanity cap on the number of basis terms; far above anything a dense
# coefficient array can usefully hold.
MAX_TERMS = 10_000_000

MultiIndex = tuple[int, ...]


class PolyFamily(str, enum.Enum):
    """1D polynomial family, paired with its canonical germ distribution.

    ``HERMITE`` is the probabilists' Hermite family (germ ~ N(0, 1)),
    ``LEGENDRE`` the classical Legendre family (germ ~ U(-1, 1)).
    """

    HERMITE = "hermite"
    LEGENDRE = "legendre"

    @classmethod
    def parse(cls, value: "PolyFamily | str") -> "PolyFamily":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {
            "hermite": cls.HERMITE,
            "hermiteprobabilist": cls.HERMITE,
            "normal": cls.HERMITE,
            "legendre": cls.LEGENDRE,
            "uniform": cls.LEGENDRE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown polynomial family {value!r}") from None


def norm_1d(family: PolyFamily, order: int) -> float:
    """Squared norm <psi_n^2> under the family's probability density."""
    family = PolyFamily.parse(family)
    if order < 0:
        raise ValueError("order must be non-negative")
    if family is PolyFamily.HERMITE:
        return float(math.factorial(order))
    return 1.0 / (2 * order + 1)


def eval_1d_all(family: PolyFamily, max_order: int, x) -> np.ndarray:
    """Evaluate psi_0..psi_max_order at ``x`` by three-term recurrence.

    Returns an array of shape ``x.shape + (max_order + 1,)``.
    """
    family = PolyFamily.parse(family)
    if max_order < 0:
        raise ValueError("max_order must be non-negative")
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (max_order + 1,))
    out[..., 0] = 1.0
    if max_order == 0:
        return out
    out[..., 1] = x
    if family is PolyFamily.HERMITE:
        for n in range(1, max_order):
            out[..., n + 1] = x * out[..., n] - n * out[..., n - 1]
    else:
        for n in range(1, max_order):
            out[..., n + 1] = ((2 * n + 1) * x * out[..., n] - n * out[..., n - 1]) / (n + 1)
    return out


def eval_1d(family: PolyFamily, order: int, x: float) -> float:
    """Value of the degree-``order`` polynomial of ``family`` at scalar ``x``."""
    return float(eval_1d_all(family, order, x)[..., order])


def _compositions(total: int, parts: int):
    # Lexicographically descending: (2,0), (1,1), (0,2).
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def total_degree_multi_indices(dim: int, order: int) -> list[MultiIndex]:
    """All multi-indices of total degree <= order in graded order.

    Degree ascends; within a degree, entries are ordered lexicographically
    descending so the first dimension varies slowest, e.g. for d=2, p=2:
    (0,0), (1,0), (0,1), (2,0), (1,1), (0,2).
    """
    return [alpha for n in range(order + 1) for alpha in _compositions(n, dim)]


@dataclass(frozen=True)
class PcBasis:
    """Total-degree tensor-product polynomial chaos basis.

    ``terms`` is an ``(n_terms, dim)`` integer array of multi-indices and
    ``norms`` holds the squared norm of each multivariate term.
    """

    dim: int
    order: int
    families: tuple[PolyFamily, ...]
    terms: np.ndarray = field(repr=False)
    norms: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.terms.setflags(write=False)
        self.norms.setflags(write=False)

    @property
    def n_terms(self) -> int:
        return self.terms.shape[0]

    @property
    def P(self) -> int:
        return self.n_terms - 1

    def multi_indices(self) -> list[MultiIndex]:
        return [tuple(int(a) for a in row) for row in self.terms]

    def index_of(self, alpha: Sequence[int]) -> int:
        alpha = tuple(int(a) for a in alpha)
        for k, row in enumerate(self.multi_indices()):
            if row == alpha:
                return k
        raise KeyError(f"multi-index {alpha} not in basis")

    def total_degrees(self) -> np.ndarray:
        return self.terms.sum(axis=1)

    def interaction_orders(self) -> np.ndarray:
        """Number of nonzero entries of each multi-index (the l0 "norm")."""
        return np.count_nonzero(self.terms, axis=1)

    def evaluate(self, points) -> np.ndarray:
        """Evaluate every basis term at each row of ``points``.

        ``points`` has shape ``(n, dim)`` (or ``(dim,)`` for one point);
        the result has shape ``(n, n_terms)`` (or ``(n_terms,)``).
        """
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValueError(
                f"expected points with {self.dim} coordinates, got shape {np.shape(points)}"
            )
        out = np.ones((pts.shape[0], self.n_terms))
        for i, fam in enumerate(self.families):
            table = eval_1d_all(fam, self.order, pts[:, i])
            out *= table[:, self.terms[:, i]]
        return out[0] if single else out

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "order": self.order,
            "families": [f.value for f in self.families],
            "multi_indices": [list(a) for a in self.multi_indices()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PcBasis":
        basis = build_basis(int(data["dim"]), int(data["order"]), data["families"])
        stored = data.get("multi_indices")
        if stored is not None and [list(a) for a in basis.multi_indices()] != [
            [int(v) for v in a] for a in stored
        ]:
            raise ValueError("stored multi-index list does not match the graded ordering")
        return basis


def build_basis(dim: int, order: int, families: "PolyFamily | str | Sequence" = PolyFamily.HERMITE) -> PcBasis:
    """Build the total-degree basis of the given dimension and order.

    ``families`` is either one family used for every dimension or a
    per-dimension sequence.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if order < 0:
        raise ValueError("order must be >= 0")
    if isinstance(families, (str, PolyFamily)):
        fams = (PolyFamily.parse(families),) * dim
    else:
        fams = tuple(PolyFamily.parse(f) for f in families)
        if len(fams) != dim:
            raise ValueError(f"got {len(fams)} families for dim={dim}")
    count = math.comb(dim + order, order)
    if count > MAX_TERMS:
        raise OverflowError(f"basis with dim={dim}, order={order} has {count} terms (cap {MAX_TERMS})")

    terms = np.array(total_degree_multi_indices(dim, order), dtype=np.int64).reshape(count, dim)
    norm_tables = [np.array([norm_1d(f, n) for n in range(order + 1)]) for f in fams]
    norms = np.ones(count)
    for i, table in enumerate(norm_tables):
        norms *= table[terms[:, i]]
    return PcBasis(dim=dim, order=order, families=fams, terms=terms, norms=norms)


def eval_basis(basis: PcBasis, point) -> np.ndarray:
    """Vector of all basis-term values at a single point of length ``dim``."""
    point = np.asarray(point, dtype=float)
    if point.shape != (basis.dim,):
        raise ValueError(f"point must have length {basis.dim}, got shape {point.shape}")
    return basis.evaluate(point)
