"""Forecast metrics, series-complexity diagnostics, and BCa bootstrap CIs."""

from __future__ import annotations

import os
from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy import stats as sps


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    mae: float
    mse: float
    smape: float
    count: int

    def to_lines(self, prefix: str = "") -> list[str]:
        return [
            f"{prefix}rmse={self.rmse!r}",
            f"{prefix}mae={self.mae!r}",
            f"{prefix}mse={self.mse!r}",
            f"{prefix}smape={self.smape!r}",
            f"{prefix}count={self.count}",
        ]


@dataclass(frozen=True)
class BcaInterval:
    estimate: float
    lower: float
    upper: float
    resamples: int
    bias: float  # z0
    acceleration: float  # a
    degenerate: bool = False


def forecast_metrics(predictions, targets) -> MetricReport:
    """MSE/RMSE/MAE and two-sided SMAPE (0..200%, 0/0 terms count as 0)."""
    pred = np.asarray(predictions, dtype=np.float64).ravel()
    true = np.asarray(targets, dtype=np.float64).ravel()
    if pred.size != true.size:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {true.size} targets")
    if pred.size == 0:
        raise ValueError("empty input")
    err = pred - true
    mse = float(np.mean(err**2))
    denom = np.abs(true) + np.abs(pred)
    ratio = np.divide(
        2.0 * np.abs(err), denom, out=np.zeros_like(denom), where=denom > 0
    )
    return MetricReport(
        rmse=float(np.sqrt(mse)),
        mae=float(np.mean(np.abs(err))),
        mse=mse,
        smape=float(100.0 * np.mean(ratio)),
        count=pred.size,
    )


def total_variation(series) -> float:
    """Sum of absolute first differences."""
    x = np.asarray(series, dtype=np.float64)
    if x.size < 2:
        raise ValueError("total variation needs at least 2 samples")
    return float(np.sum(np.abs(np.diff(x))))


def l2_second_diff(series) -> float:
    """L2 norm of the second-difference sequence."""
    x = np.asarray(series, dtype=np.float64)
    if x.size < 3:
        raise ValueError("second differences need at least 3 samples")
    return float(np.linalg.norm(np.diff(x, n=2)))


def permutation_entropy(series, order: int = 3, delay: int = 1) -> float:
    """Normalized Shannon entropy of ordinal patterns in sliding tuples.

    Ties break by index order (stable argsort). Result lies in [0, 1].
    """
    x = np.asarray(series, dtype=np.float64)
    if order < 2:
        raise ValueError("pattern order must be >= 2")
    span = (order - 1) * delay
    if x.size < span + 1:
        raise ValueError(f"series of {x.size} samples too short for order {order}, delay {delay}")
    num = x.size - span
    # All sliding tuples at once: rows are (x[i], x[i+delay], ..., x[i+(m-1)delay]).
    idx = np.arange(num)[:, None] + delay * np.arange(order)[None, :]
    patterns = np.argsort(x[idx], axis=1, kind="stable")
    # Encode each pattern row as a single integer for counting.
    weights = (order ** np.arange(order)).astype(np.int64)
    codes = patterns @ weights
    _, counts = np.unique(codes, return_counts=True)
    probs = counts / num
    entropy = -np.sum(probs * np.log(probs))
    return float(entropy / np.log(factorial(order))) + 0.0  # avoid -0.0


def bca_ci(samples, statistic=np.mean, resamples: int = 10000, level: float = 0.95,
           seed: int = 0) -> BcaInterval:
    """Bias-corrected and accelerated bootstrap confidence interval.

    ``z0`` comes from the fraction of resampled statistics below the point
    estimate; the acceleration ``a`` from jackknife skewness; the interval
    endpoints are the adjusted quantiles of the bootstrap distribution.
    """
    data = np.asarray(samples, dtype=np.float64)
    if data.size < 3:
        raise ValueError("need at least 3 samples for a bootstrap interval")
    rng = np.random.default_rng(seed)
    estimate = float(statistic(data))

    boot = np.empty(resamples)
    for b in range(resamples):
        boot[b] = statistic(data[rng.integers(0, data.size, size=data.size)])

    if np.all(boot == boot[0]):
        return BcaInterval(
            estimate=estimate, lower=estimate, upper=estimate,
            resamples=resamples, bias=0.0, acceleration=0.0, degenerate=True,
        )

    proportion = np.mean(boot < estimate)
    proportion = min(max(proportion, 1.0 / resamples), 1.0 - 1.0 / resamples)
    z0 = float(sps.norm.ppf(proportion))

    jack = np.array([statistic(np.delete(data, i)) for i in range(data.size)])
    diffs = jack.mean() - jack
    denom = np.sum(diffs**2) ** 1.5
    acceleration = float(np.sum(diffs**3) / (6.0 * denom)) if denom > 0 else 0.0

    z_crit = sps.norm.ppf(0.5 + level / 2.0)
    alphas = []
    for z in (-z_crit, z_crit):
        adj = z0 + (z0 + z) / (1.0 - acceleration * (z0 + z))
        alphas.append(float(sps.norm.cdf(adj)))
    lower, upper = np.quantile(boot, alphas)
    return BcaInterval(
        estimate=estimate, lower=float(lower), upper=float(upper),
        resamples=resamples, bias=z0, acceleration=acceleration,
    )


def percentile_ci(samples, statistic=np.mean, resamples: int = 10000,
                  level: float = 0.95, seed: int = 0) -> tuple[float, float]:
    """Plain percentile bootstrap; the uncorrected reference interval."""
    data = np.asarray(samples, dtype=np.float64)
    rng = np.random.default_rng(seed)
    boot = np.empty(resamples)
    for b in range(resamples):
        boot[b] = statistic(data[rng.integers(0, data.size, size=data.size)])
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(boot, [tail, 1.0 - tail])
    return float(lo), float(hi)


def write_records(path, records: dict) -> None:
    """Line-oriented ``key=value`` records file (sorted, deterministic)."""
    def fmt(value) -> str:
        if isinstance(value, float):  # incl. numpy scalars; repr roundtrips
            return repr(float(value))
        return str(value)

    lines = [f"{k}={fmt(records[k])}" for k in sorted(records)]
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_records(path) -> dict:
    out: dict[str, float | int | str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            try:
                out[key] = int(value)
            except ValueError:
                try:
                    out[key] = float(value)
                except ValueError:
                    out[key] = value

    return out
