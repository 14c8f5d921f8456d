"""Forward models and the file protocol for coupling external solvers.

The built-in models are cheap analytic stand-ins:

* :func:`ishigami` -- the classical sensitivity benchmark on [-pi, pi]^3.
* :func:`toy_leakage` -- a synthetic leakage-rate time series with a
  smooth rise at an arrival time, a peak and a decay to a plateau.
* :func:`toy_caprock_pressure` -- a scalar end-time pressure that grows
  with injection rate, for the chance-constrained design search.

None of them solves any flow equations.  External solvers couple through
``nodes.csv`` (written by :func:`emit_nodes`) and ``results.csv`` (read by
:func:`ingest_results`).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .basis import PolyFamily
from .projection import EvaluationTable, atomic_write_text
from .quadrature import QuadratureRule

__all__ = [
    "Parameter",
    "ParameterSpec",
    "TimeSeriesOutput",
    "QoiSet",
    "ProtocolError",
    "ARRIVAL_THRESHOLD",
    "TABLE2_SPEC",
    "ishigami",
    "ishigami_reference",
    "leakage_amplitude",
    "arrival_scale",
    "toy_leakage",
    "toy_caprock_pressure",
    "extract_qois",
    "emit_nodes",
    "read_nodes",
    "ingest_results",
    "write_results",
    "format_float",
]

# Leakage rate (percent) above which the plume counts as arrived.
ARRIVAL_THRESHOLD = 3.0e-3


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


class ProtocolError(ValueError):
    """Malformed node or result file."""


@dataclass(frozen=True)
class Parameter:
    """One uncertain input.

    ``lognormal``/``normal`` use ``mu``, ``sigma`` (of the log for
    lognormal) and map to Hermite germs; ``uniform`` uses ``a``, ``b`` and
    maps to Legendre germs.
    """

    name: str
    distribution: str
    mu: float | None = None
    sigma: float | None = None
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        kind = self.distribution.lower()
        object.__setattr__(self, "distribution", kind)
        if kind in ("lognormal", "normal"):
            if self.mu is None or self.sigma is None:
                raise ValueError(f"{self.name}: {kind} needs mu and sigma")
            if not self.sigma > 0:
                raise ValueError(f"{self.name}: sigma must be positive")
        elif kind == "uniform":
            if self.a is None or self.b is None:
                raise ValueError(f"{self.name}: uniform needs a and b")
            if not self.a < self.b:
                raise ValueError(f"{self.name}: need a < b")
        else:
            raise ValueError(f"{self.name}: unknown distribution {self.distribution!r}")

    @property
    def family(self) -> PolyFamily:
        return PolyFamily.LEGENDRE if self.distribution == "uniform" else PolyFamily.HERMITE

    def design_variable(self, xi):
        """Affine image of the germ: the log-value for lognormal inputs."""
        xi = np.asarray(xi, dtype=float)
        if self.distribution == "uniform":
            return 0.5 * (self.a + self.b) + 0.5 * (self.b - self.a) * xi
        return self.mu + self.sigma * xi

    def design_center_scale(self) -> tuple[float, float]:
        if self.distribution == "uniform":
            return 0.5 * (self.a + self.b), 0.5 * (self.b - self.a)
        return self.mu, self.sigma

    def to_physical(self, xi):
        y = self.design_variable(xi)
        return np.exp(y) if self.distribution == "lognormal" else y

    def to_canonical(self, value):
        value = np.asarray(value, dtype=float)
        if self.distribution == "lognormal":
            value = np.log(value)
        center, scale = self.design_center_scale()
        return (value - center) / scale

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class ParameterSpec:
    parameters: tuple[Parameter, ...]

    @property
    def dim(self) -> int:
        return len(self.parameters)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.parameters]

    @property
    def families(self) -> tuple[PolyFamily, ...]:
        return tuple(p.family for p in self.parameters)

    def to_physical(self, xi) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if xi.shape[1] != self.dim:
            raise ValueError(f"spec has {self.dim} parameters, points have {xi.shape[1]} coordinates")
        return np.column_stack([p.to_physical(xi[:, i]) for i, p in enumerate(self.parameters)])

    def index(self, name: str) -> int:
        return self.names.index(name)

    def to_dict(self) -> dict:
        return {"parameters": [p.to_dict() for p in self.parameters]}

    @classmethod
    def from_dict(cls, data: dict) -> "ParameterSpec":
        try:
            params = tuple(Parameter(**entry) for entry in data["parameters"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed parameter spec: {exc}") from None
        if not params:
            raise ValueError("parameter spec is empty")
        return cls(params)

    @classmethod
    def load(cls, path) -> "ParameterSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2) + "\n")


# Log-normal inputs of the leakage study: porosity [-], aquifer and
# leaky-well permeability [m^2], injection rate [kg/s].  The well
# permeability entry is read as N(mean, variance), like the other rows.
TABLE2_SPEC = ParameterSpec(
    (
        Parameter("porosity", "lognormal", mu=-1.8971, sigma=0.2),
        Parameter("perm_aquifer", "lognormal", mu=-30.002, sigma=1.2),
        Parameter("perm_well", "lognormal", mu=-27.631, sigma=math.sqrt(0.3679)),
        Parameter("injection_rate", "lognormal", mu=2.1827, sigma=0.2),
    )
)

_MEDIANS = np.exp([p.mu for p in TABLE2_SPEC.parameters])


def ishigami(xi, a: float = 7.0, b: float = 0.1) -> np.ndarray:
    """Ishigami function of germs in [-1, 1]^3, scaled by pi to [-pi, pi]^3."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != 3:
        raise ValueError("ishigami takes 3 coordinates")
    x = np.pi * xi
    s1 = np.sin(x[..., 0])
    return s1 + a * np.sin(x[..., 1]) ** 2 + b * x[..., 2] ** 4 * s1


def ishigami_reference(a: float = 7.0, b: float = 0.1) -> dict:
    """Closed-form mean, variance and Sobol indices of :func:`ishigami`."""
    pi = np.pi
    v1 = 0.5 * (1 + b * pi**4 / 5) ** 2
    v2 = a**2 / 8
    v13 = b**2 * pi**8 * (1 / 18 - 1 / 50)
    var = v1 + v2 + v13
    return {
        "mean": a / 2,
        "variance": var,
        "first": np.array([v1, v2, 0.0]) / var,
        "total": np.array([v1 + v13, v2, v13]) / var,
        "second": {(0, 1): 0.0, (0, 2): v13 / var, (1, 2): 0.0},
    }


# Toy leakage constants.  tau in days, amplitude in percent of injection.
_TAU0 = 100.0
_AMP0 = 0.15
_RISE = 8.0  # arrival scale / logistic width
_DECAY = 5.0  # decay time / arrival scale
_PLATEAU = 0.6


def _physical(params) -> np.ndarray:
    params = np.atleast_2d(np.asarray(params, dtype=float))
    if params.shape[-1] != 4:
        raise ValueError("toy models take (porosity, perm_aquifer, perm_well, injection_rate)")
    if (params <= 0).any() or not np.isfinite(params).all():
        raise ValueError("toy model parameters must be positive and finite")
    return params / _MEDIANS


def leakage_amplitude(params) -> np.ndarray:
    """A = 0.15 * sqrt(K_L / K_A) * sqrt(Q), each relative to its median."""
    r = _physical(params)
    return _AMP0 * np.sqrt(r[:, 2] / r[:, 1]) * np.sqrt(r[:, 3])


def arrival_scale(params) -> np.ndarray:
    """tau = 100 days * phi / Q, each relative to its median."""
    r = _physical(params)
    return _TAU0 * r[:, 0] / r[:, 3]


def toy_leakage(params, times) -> "TimeSeriesOutput":
    """Synthetic leakage rate (percent) for rows of physical parameters.

    Q_leak(t) = A * sigma((t - tau) / w) * (r + (1 - r) * exp(-t / t_d))

    with ``sigma`` the logistic function, ``w = tau / 8``, ``t_d = 5 tau``
    and plateau fraction ``r = 0.6``; A and tau are given by
    :func:`leakage_amplitude` and :func:`arrival_scale`.  The curve is
    positive, rises through the arrival threshold near ``tau`` (dominated
    by porosity and injection rate), peaks, then relaxes to ``r * A``
    (dominated by the permeability ratio).
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or (np.diff(times) <= 0).any():
        raise ValueError("times must be a strictly increasing vector")
    amp = leakage_amplitude(params)[:, None]
    tau = arrival_scale(params)[:, None]
    rise = 0.5 * (1.0 + np.tanh(0.5 * _RISE * (times - tau) / tau))
    decay = _PLATEAU + (1.0 - _PLATEAU) * np.exp(-times / (_DECAY * tau))
    return TimeSeriesOutput(times, amp * rise * decay)


def toy_caprock_pressure(params) -> np.ndarray:
    """End-time caprock pressure [bar]: 290 + 30 * Q * K_A^-0.15 * phi^-0.1 (relative to medians)."""
    r = _physical(params)
    return 290.0 + 30.0 * r[:, 3] * r[:, 1] ** -0.15 * r[:, 0] ** -0.1


@dataclass(frozen=True)
class TimeSeriesOutput:
    """``values`` has shape ``(n_realizations, n_times)``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if times.ndim != 1 or (np.diff(times) <= 0).any():
            raise ValueError("times must be strictly increasing")
        if values.shape[-1] != times.size:
            raise ValueError("values do not match the time axis")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class QoiSet:
    """Per-realization arrival time, peak value and peak time.

    Where a series never exceeds the threshold ``censored`` is set and
    ``t_arrival`` holds the last time of the horizon.
    """

    t_arrival: np.ndarray
    q_max: np.ndarray
    t_maxleak: np.ndarray
    censored: np.ndarray

    def as_columns(self) -> np.ndarray:
        return np.column_stack([self.t_arrival, self.q_max, self.t_maxleak])


def extract_qois(series: TimeSeriesOutput, arrival_threshold: float = ARRIVAL_THRESHOLD) -> QoiSet:
    t, v = series.times, series.values
    if t.size == 0:
        raise ValueError("empty series")
    above = v > arrival_threshold
    censored = ~above.any(axis=1)
    first = np.argmax(above, axis=1)
    rows = np.arange(v.shape[0])
    t_arr = np.where(censored, t[-1], t[first])
    inner = ~censored & (first > 0)
    i, j = first[inner] - 1, first[inner]
    v0, v1 = v[rows[inner], i], v[rows[inner], j]
    t_arr[inner] = t[i] + (arrival_threshold - v0) / (v1 - v0) * (t[j] - t[i])
    peak = np.argmax(v, axis=1)
    return QoiSet(t_arr, v[rows, peak], t[peak], censored)


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def emit_nodes(rule: QuadratureRule, spec: ParameterSpec, path=None) -> str:
    """Write the node table: node_id, xi_1..xi_d, physical values, weight."""
    if spec.dim != rule.dim:
        raise ValueError(f"spec has {spec.dim} parameters, rule has {rule.dim} dimensions")
    if spec.families != rule.families:
        raise ValueError("spec distributions do not match the quadrature families")
    phys = spec.to_physical(rule.nodes)
    header = ["node_id"] + [f"xi_{i + 1}" for i in range(rule.dim)] + spec.names + ["weight"]
    rows = (
        [str(j)] + [format_float(v) for v in rule.nodes[j]] + [format_float(v) for v in phys[j]] + [format_float(rule.weights[j])]
        for j in range(rule.n_nodes)
    )
    text = _csv_text(header, rows)
    if path is not None:
        atomic_write_text(path, text)
    return text


def read_nodes(path) -> tuple[list[str], np.ndarray, np.ndarray, np.ndarray]:
    """Parse a node table into (physical names, xi, physical values, weights)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = sum(1 for h in header if h.startswith("xi_"))
        names = header[1 + d : -1]
        data = np.array([[float(v) for v in row[1:]] for row in reader if row])
    if data.size == 0:
        raise ProtocolError(f"{path}: no nodes")
    return names, data[:, :d], data[:, d : 2 * d], data[:, -1]


def write_results(path, table: EvaluationTable) -> None:
    """Write ``results.csv`` for a table (node_id, one column per label)."""
    rows = ([str(j)] + [format_float(v) for v in table.outputs[j]] for j in range(table.outputs.shape[0]))
    atomic_write_text(path, _csv_text(["node_id", *table.output_labels], rows))


def ingest_results(path, rule: QuadratureRule) -> EvaluationTable:
    """Read ``results.csv`` and bind it to ``rule``.

    Rows may come in any order; every node id must appear exactly once,
    every row must carry one finite value per label.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ProtocolError(f"{path}: empty results file") from None
        if not header or header[0].strip() != "node_id" or len(header) < 2:
            raise ProtocolError(f"{path}: header must be node_id,<label_1>,...")
        labels = [h.strip() for h in header[1:]]
        out = np.full((rule.n_nodes, len(labels)), np.nan)
        seen = np.zeros(rule.n_nodes, dtype=bool)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(labels) + 1:
                raise ProtocolError(f"{path}:{lineno}: expected {len(labels)} values, got {len(row) - 1}")
            try:
                node = int(row[0])
            except ValueError:
                raise ProtocolError(f"{path}:{lineno}: bad node_id {row[0]!r}") from None
            if not 0 <= node < rule.n_nodes:
                raise ProtocolError(f"{path}:{lineno}: node_id {node} outside 0..{rule.n_nodes - 1}")
            if seen[node]:
                raise ProtocolError(f"{path}:{lineno}: duplicate node_id {node}")
            try:
                vals = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise ProtocolError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise ProtocolError(f"{path}:{lineno}: non-finite value for node_id {node}")
            out[node] = vals
            seen[node] = True
    missing = np.flatnonzero(~seen)
    if missing.size:
        raise ProtocolError(f"{path}: missing node_id {missing[0]} ({missing.size} missing in total)")
    return EvaluationTable.from_rule(rule, out, labels)
