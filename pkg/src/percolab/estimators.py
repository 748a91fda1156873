"""Statistics assembled from paths and replica ensembles.

Two estimator families attack the same quantities from opposite ends:
per-path running averages (one tree, many scales) and importance-weighted
ensembles (many trees, scale zero).  Stationarity of the scale sequence
makes their targets coincide, so agreement between the two is the main
self-consistency check this package offers.  Every hole quantity is
reported as a lower/upper pair; the truth at infinite depth sits in
between, and no point estimate of it is ever produced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .holes import cells_threshold
from .percolation import PercolationConfig
from .qsampler import (
    DEFAULT_PROBE_DEPTH,
    QPath,
    WeightedMean,
    _grid_index,
    ensemble_view,
    sample_qpath,
)

Z95 = 1.96


def running_mean(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return np.cumsum(values) / np.arange(1, len(values) + 1)


@dataclass
class MeanPorositySeries:
    """Running hole frequencies N_i / i along one path, as a bracket pair.

    For set holes the two series come from the certified (lower) and
    unrefuted (upper) indicators.  For measure holes there is a single
    indicator; it is mirrored into both slots so downstream code can treat
    every series as a bracket.
    """

    alpha: float
    eps: Optional[float]
    n: int
    counts_lower: np.ndarray  # cumulative indicator counts
    counts_upper: np.ndarray
    lower: np.ndarray  # counts / scale
    upper: np.ndarray


def mean_porosity_series(
    path: QPath, alpha: float, eps: Optional[float] = None
) -> MeanPorositySeries:
    """Running average of the recorded hole indicators at one parameter."""
    if eps is None:
        lo = path.set_hole_lower(alpha).astype(np.int64)
        up = path.set_hole_upper(alpha).astype(np.int64)
    else:
        v = path.measure_hole(alpha, eps).astype(np.int64)
        lo = up = v
    scale = np.arange(1, path.n + 1, dtype=np.float64)
    counts_lower = np.cumsum(lo)
    counts_upper = np.cumsum(up)
    return MeanPorositySeries(
        alpha=float(alpha),
        eps=None if eps is None else float(eps),
        n=path.n,
        counts_lower=counts_lower,
        counts_upper=counts_upper,
        lower=counts_lower / scale,
        upper=counts_upper / scale,
    )


@dataclass
class EnsembleEstimate:
    """Point estimate of one indicator mean with a normal 95% interval."""

    alpha: float
    eps: Optional[float]
    r: int
    g: int
    estimate: float
    se: float
    ci_low: float
    ci_high: float
    replicas: int
    kind: str  # "importance-weighted" | "path-average"


def _estimate(values: np.ndarray, alpha, eps, r, g, kind) -> EnsembleEstimate:
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    est = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EnsembleEstimate(
        alpha=alpha,
        eps=eps,
        r=r,
        g=g,
        estimate=est,
        se=se,
        ci_low=est - Z95 * se,
        ci_high=est + Z95 * se,
        replicas=n,
        kind=kind,
    )


def bracket_interval(
    lower: EnsembleEstimate, upper: EnsembleEstimate
) -> Tuple[float, float]:
    """Outer hull of a bracket pair's confidence intervals."""
    return lower.ci_low, upper.ci_high


# -- importance-weighted ensemble estimates ----------------------------------


def ensemble_sweep(
    config: PercolationConfig, r: int, g: int, replicas: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-replica (deep root weight, largest empty block) pairs.

    One depth-(r+g) expansion per replica yields both the total word weight
    (the root martingale estimate at depth r+g) and the geometry needed for
    every alpha at once; hole indicators at any threshold are then pure
    arithmetic on these two arrays.
    """
    weights = np.zeros(replicas)
    blocks = np.zeros(replicas, dtype=np.int64)
    for i in range(replicas):
        view = ensemble_view(config, r, g, i)
        weights[i] = float(view.word_weights.sum())
        blocks[i] = view.a_star
    return weights, blocks


def ensemble_from_sweep(
    config: PercolationConfig,
    alphas: Sequence[float],
    r: int,
    g: int,
    weights: np.ndarray,
    blocks: np.ndarray,
) -> List[Tuple[EnsembleEstimate, EnsembleEstimate]]:
    """Bracket estimates for many alphas from one replica sweep.

    Only alive words carry weight, and every alive word's cell is occupied,
    so forcing any such center leaves the largest empty block unchanged;
    the per-word weighted sum therefore collapses to
    weight * [a_star >= threshold], which is what gets averaged.
    """
    side = config.k ** r
    out = []
    for alpha in alphas:
        thr = cells_threshold(float(alpha), side)
        lower_vals = weights * (blocks >= thr)
        upper_vals = weights * (blocks >= thr - 1)
        out.append(
            (
                _estimate(lower_vals, float(alpha), None, r, g, "importance-weighted"),
                _estimate(upper_vals, float(alpha), None, r, g, "importance-weighted"),
            )
        )
    return out


def ensemble_mean_porosity(
    config: PercolationConfig,
    alpha: Union[float, Sequence[float]],
    r: int,
    g: int = DEFAULT_PROBE_DEPTH,
    replicas: int = 1000,
) -> Union[
    Tuple[EnsembleEstimate, EnsembleEstimate],
    List[Tuple[EnsembleEstimate, EnsembleEstimate]],
]:
    """Importance-weighted bracket for the scale-0 hole frequency.

    Accepts one alpha or a whole ladder; the ladder reuses a single replica
    sweep, so asking for twenty alphas costs the same as one.
    """
    scalar = np.isscalar(alpha)
    alphas = [float(alpha)] if scalar else [float(a) for a in alpha]
    weights, blocks = ensemble_sweep(config, r, g, replicas)
    pairs = ensemble_from_sweep(config, alphas, r, g, weights, blocks)
    return pairs[0] if scalar else pairs


# -- path-average estimates ---------------------------------------------------


def path_average_bracket(
    paths: Sequence[QPath], alpha: float
) -> Tuple[EnsembleEstimate, EnsembleEstimate]:
    """Across-path mean of the per-path hole frequencies, as a bracket.

    Each path contributes its own n-scale average, so the standard error
    reflects path-to-path spread and stays honest about within-path
    correlation.
    """
    lower_means = np.array([p.set_hole_lower(alpha).mean() for p in paths])
    upper_means = np.array([p.set_hole_upper(alpha).mean() for p in paths])
    r, g = paths[0].r, paths[0].g
    return (
        _estimate(lower_means, float(alpha), None, r, g, "path-average"),
        _estimate(upper_means, float(alpha), None, r, g, "path-average"),
    )


# -- covariance probe ---------------------------------------------------------


@dataclass
class CovarianceEstimate:
    alpha: float
    r: int
    g: int
    lag: int
    replicas: int
    covariance: float
    se: float
    ci_low: float
    ci_high: float
    mean_first: float
    mean_second: float


def covariance_from_paths(
    paths: Sequence[QPath], alpha: float, lag: int
) -> CovarianceEstimate:
    """Plug-in covariance of the certified indicator at scales 1 and 1+lag.

    One pair per path keeps the pairs independent across replicas; using
    many pairs per path would entangle them through the shared tree and
    understate the error.  lag 0 degenerates to the variance q(1-q).
    """
    if lag < 0:
        raise ValueError("lag must be >= 0")
    if any(p.n < lag + 1 for p in paths):
        raise ValueError(f"paths must record at least {lag + 1} scales")
    a = np.array([float(p.set_hole_lower(alpha)[0]) for p in paths])
    b = np.array([float(p.set_hole_lower(alpha)[lag]) for p in paths])
    n = len(paths)
    cov = float((a * b).mean() - a.mean() * b.mean())
    centered = (a - a.mean()) * (b - b.mean())
    se = float(centered.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return CovarianceEstimate(
        alpha=float(alpha),
        r=paths[0].r,
        g=paths[0].g,
        lag=lag,
        replicas=n,
        covariance=cov,
        se=se,
        ci_low=cov - Z95 * se,
        ci_high=cov + Z95 * se,
        mean_first=float(a.mean()),
        mean_second=float(b.mean()),
    )


def covariance_probe(
    config: PercolationConfig,
    alpha: float,
    r: int,
    lag: int,
    replicas: int,
    g: int = DEFAULT_PROBE_DEPTH,
    max_attempts: int = 1000,
) -> CovarianceEstimate:
    """Sample fresh paths of lag+1 scales and probe the indicator covariance."""
    paths = [
        sample_qpath(
            config,
            n=lag + 1,
            r=r,
            g=g,
            alpha_grid=(alpha,),
            eps_grid=(),
            replica=i,
            max_attempts=max_attempts,
        )
        for i in range(replicas)
    ]
    return covariance_from_paths(paths, alpha, lag)


# -- per-path diagnostics ------------------------------------------------------


def x_tail_frequency(path: QPath, s: float) -> np.ndarray:
    """Running frequency of scales whose martingale estimate is at most s."""
    if s < 0:
        raise ValueError("threshold must be >= 0")
    return running_mean(path.x_hat <= s)


def discrepancy_rate(path: QPath, alpha: float, eps: float, delta: float) -> np.ndarray:
    """Running rate of measure holes the set bracket cannot account for."""
    return running_mean(path.discrepancy(alpha, eps, delta))


@dataclass
class PorosityExtremes:
    """Running extremes of the per-scale ball porosities of one path."""

    eps_grid: Tuple[float, ...]
    set_min: np.ndarray  # (n,) nonincreasing
    set_max: np.ndarray  # (n,) nondecreasing
    meas_min: np.ndarray  # (n, n_eps)
    meas_max: np.ndarray

    def for_eps(self, eps: float) -> Tuple[np.ndarray, np.ndarray]:
        ie = _grid_index(self.eps_grid, eps, "eps")
        return self.meas_min[:, ie], self.meas_max[:, ie]


def porosity_extremes(path: QPath) -> PorosityExtremes:
    return PorosityExtremes(
        eps_grid=path.eps_grid,
        set_min=np.minimum.accumulate(path.set_por),
        set_max=np.maximum.accumulate(path.set_por),
        meas_min=np.minimum.accumulate(path.meas_por, axis=0),
        meas_max=np.maximum.accumulate(path.meas_por, axis=0),
    )
