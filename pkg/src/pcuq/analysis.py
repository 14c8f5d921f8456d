"""Monte Carlo characterization of PC surrogates.

All sampling goes through :func:`canonical_chunks`, which splits the draw
index range into fixed-size chunks with one RNG stream per chunk (derived
from the seed and the chunk number).  Results therefore do not depend on
how chunks are scheduled, and the streaming estimators below see exactly
the draws :func:`sample` returns.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .basis import PolyFamily
from .projection import PcSurrogate

__all__ = [
    "CHUNK",
    "DEFAULT_SAMPLES",
    "DEFAULT_QUANTILES",
    "SampleBatch",
    "DensityEstimate",
    "Exceedance",
    "canonical_chunks",
    "sample",
    "silverman_bandwidth",
    "robust_silverman_bandwidth",
    "kde",
    "percentiles",
    "exceedance_probability",
    "sample_moments",
]

CHUNK = 1 << 16
DEFAULT_SAMPLES = 1_000_000
DEFAULT_QUANTILES = (0.05, 0.25, 0.50, 0.75, 0.95)
# Max doubles held per block when streaming surrogate outputs.
_BLOCK_BUDGET = 1 << 24


@dataclass(frozen=True)
class SampleBatch:
    draws: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return self.draws.shape[0]


@dataclass(frozen=True)
class DensityEstimate:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def mode(self) -> float:
        return float(self.grid[np.argmax(self.density)])


@dataclass(frozen=True)
class Exceedance:
    prob: np.ndarray
    stderr: np.ndarray
    n: int


def _check_families(families, requested) -> tuple[PolyFamily, ...]:
    fams = tuple(families)
    if requested is None:
        return fams
    req = tuple(PolyFamily.parse(f) for f in requested)
    if req != fams:
        names = {PolyFamily.HERMITE: "normal", PolyFamily.LEGENDRE: "uniform"}
        raise ValueError(
            "input distribution does not match basis families: "
            f"got {[names[f] for f in req]}, basis needs {[names[f] for f in fams]}"
        )
    return fams


def canonical_chunks(families: Sequence[PolyFamily], n: int, seed: int) -> Iterator[np.ndarray]:
    """Yield iid germ draws in chunks of at most ``CHUNK`` rows.

    Hermite dimensions draw N(0, 1), Legendre dimensions U(-1, 1).
    """
    if n < 1:
        raise ValueError("sample size must be >= 1")
    fams = tuple(PolyFamily.parse(f) for f in families)
    for c, start in enumerate(range(0, n, CHUNK)):
        size = min(CHUNK, n - start)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(c,)))
        out = np.empty((size, len(fams)))
        for i, fam in enumerate(fams):
            if fam is PolyFamily.HERMITE:
                out[:, i] = rng.standard_normal(size)
            else:
                out[:, i] = rng.uniform(-1.0, 1.0, size)
        yield out


def _output_blocks(surrogate: PcSurrogate, n: int) -> list[list[int]]:
    width = max(1, _BLOCK_BUDGET // max(n, 1))
    idx = list(range(surrogate.n_outputs))
    return [idx[i : i + width] for i in range(0, len(idx), width)]


def _draws(surrogate: PcSurrogate, n: int, seed: int, outputs: Sequence[int] | None = None) -> np.ndarray:
    sub = surrogate if outputs is None else surrogate.select(outputs)
    out = np.empty((n, sub.n_outputs))
    start = 0
    for xi in canonical_chunks(sub.basis.families, n, seed):
        out[start : start + xi.shape[0]] = sub.evaluate(xi)
        start += xi.shape[0]
    return out


def sample(surrogate: PcSurrogate, n: int = DEFAULT_SAMPLES, seed: int = 0, input_families=None) -> SampleBatch:
    """Evaluate the surrogate at ``n`` iid germ draws.

    ``input_families`` optionally states the germ distribution per
    dimension ("normal"/"uniform" or families) and must match the basis.
    """
    _check_families(surrogate.basis.families, input_families)
    return SampleBatch(_draws(surrogate, n, seed), seed)


def sample_moments(surrogate: PcSurrogate, n: int = DEFAULT_SAMPLES, seed: int = 0):
    """Sample mean, variance and their standard errors per output."""
    mean = np.empty(surrogate.n_outputs)
    var = np.empty_like(mean)
    se_mean = np.empty_like(mean)
    se_var = np.empty_like(mean)
    for block in _output_blocks(surrogate, n):
        x = _draws(surrogate, n, seed, block)
        m = x.mean(axis=0)
        d = x - m
        v = (d**2).sum(axis=0) / (n - 1) if n > 1 else np.zeros(len(block))
        m4 = (d**4).mean(axis=0)
        mean[block] = m
        var[block] = v
        se_mean[block] = np.sqrt(v / n)
        se_var[block] = np.sqrt(np.maximum(m4 - v**2, 0.0) / n)
    return mean, var, se_mean, se_var


def silverman_bandwidth(values: np.ndarray) -> float:
    """1.06 * std * N^(-1/5)."""
    values = np.asarray(values, dtype=float)
    return 1.06 * float(values.std(ddof=1)) * values.size ** (-0.2)


def robust_silverman_bandwidth(values: np.ndarray) -> float:
    """0.9 * min(std, IQR / 1.34) * N^(-1/5); less oversmoothing on skewed samples."""
    values = np.asarray(values, dtype=float)
    q75, q25 = np.percentile(values, [75, 25])
    spread = min(float(values.std(ddof=1)), float(q75 - q25) / 1.34)
    return 0.9 * spread * values.size ** (-0.2)


def kde(values, grid=None, n_grid: int = 512, bandwidth: float | str | None = None) -> DensityEstimate:
    """Gaussian-kernel density estimate evaluated on ``grid``.

    Draws are linearly binned onto a fine mesh (spacing <= h/8) and
    convolved with the kernel by FFT, then interpolated onto ``grid``.  The
    default grid spans the data range padded by four bandwidths.

    ``bandwidth`` is a number, ``"silverman"`` (the default) or
    ``"silverman-robust"``.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 2 or np.ptp(x) == 0:
        raise ValueError("kernel density estimate needs at least two distinct values (sample is degenerate)")
    if bandwidth is None or bandwidth == "silverman":
        h = silverman_bandwidth(x)
    elif bandwidth == "silverman-robust":
        h = robust_silverman_bandwidth(x)
    elif isinstance(bandwidth, str):
        raise ValueError(f"unknown bandwidth rule {bandwidth!r}")
    else:
        h = float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    lo, hi = x.min() - 4 * h, x.max() + 4 * h
    if grid is None:
        n_grid = max(n_grid, min(1 << 16, int(np.ceil((hi - lo) / (h / 4))) + 1))
        grid = np.linspace(lo, hi, n_grid)
    grid = np.asarray(grid, dtype=float)

    m = int(min(1 << 22, np.ceil((hi - lo) / (h / 8)) + 1))
    mesh = np.linspace(lo, hi, m)
    delta = mesh[1] - mesh[0]
    pos = (x - lo) / delta
    left = np.clip(np.floor(pos).astype(np.int64), 0, m - 2)
    frac = pos - left
    counts = np.bincount(left, weights=1.0 - frac, minlength=m) + np.bincount(left + 1, weights=frac, minlength=m)
    half = int(np.ceil(5 * h / delta))
    u = np.arange(-half, half + 1) * delta / h
    kernel = np.exp(-0.5 * u * u) / (np.sqrt(2 * np.pi) * h)
    smooth = fftconvolve(counts, kernel, mode="same") / x.size
    density = np.interp(grid, mesh, np.maximum(smooth, 0.0), left=0.0, right=0.0)
    return DensityEstimate(grid, density, h)


def percentiles(
    surrogate: PcSurrogate,
    quantiles: Sequence[float] = DEFAULT_QUANTILES,
    n: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> np.ndarray:
    """Empirical quantiles per output, shape ``(n_outputs, len(quantiles))``.

    Uses linear interpolation between order statistics.
    """
    q = np.asarray(quantiles, dtype=float)
    if ((q <= 0) | (q >= 1)).any():
        raise ValueError("quantiles must lie strictly between 0 and 1")
    out = np.empty((surrogate.n_outputs, q.size))
    for block in _output_blocks(surrogate, n):
        x = _draws(surrogate, n, seed, block)
        out[block] = np.quantile(x, q, axis=0).T
    return out


def exceedance_probability(
    surrogate: PcSurrogate, threshold: float, n: int = DEFAULT_SAMPLES, seed: int = 0
) -> Exceedance:
    """Fraction of draws strictly above ``threshold`` with binomial stderr."""
    threshold = float(threshold)
    if np.isnan(threshold):
        raise ValueError("threshold must not be NaN")
    counts = np.zeros(surrogate.n_outputs, dtype=np.int64)
    for xi in canonical_chunks(surrogate.basis.families, n, seed):
        counts += (surrogate.evaluate(xi) > threshold).sum(axis=0)
    prob = counts / n
    return Exceedance(prob, np.sqrt(prob * (1 - prob) / n), n)
