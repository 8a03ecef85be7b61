"""Window tokenization by adaptive-knot B-spline least squares.

Each lookback window of length ``L`` becomes ``n`` tokens ``(c_i, mu_i)``:
the spline coefficient and the center of its basis support in sample units.
The least-squares fit runs through QR; an ill-conditioned Gram matrix (or a
failed direct solve) falls back to a ridge-regularized system. Coefficients
are clipped to a configurable cap, and datasets can be tokenized once and
cached to disk.
"""

from __future__ import annotations

import hashlib
import os
import struct
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from threadpoolctl import threadpool_limits

from .knots import place_knots
from .splines import KnotVector, basis_matrix

CACHE_MAGIC = b"BSAT"
CACHE_VERSION = 1


@dataclass(frozen=True)
class TokenizerConfig:
    lookback: int = 720
    budget: int = 45
    degree: int = 3
    clip_factor: float = 1.0
    coeff_cap: float = 10.0
    ridge_threshold: float = 1e8
    ridge_scale: float = 1e-6

    def __post_init__(self):
        if not self.degree + 1 < self.budget < self.lookback:
            raise ValueError(
                f"budget {self.budget} must satisfy degree+1 < budget < lookback "
                f"({self.degree + 1} < n < {self.lookback})"
            )
        if self.clip_factor <= 0:
            raise ValueError("clip_factor must be positive")
        if self.coeff_cap <= 0:
            raise ValueError("coeff_cap must be positive")
        if self.ridge_threshold <= 1:
            raise ValueError("ridge_threshold must exceed 1")


@dataclass(frozen=True)
class FitDiagnostics:
    used_ridge: bool
    condition_number: float
    clipped_count: int
    fit_rmse: float
    ridge_lambda: float | None = None


@dataclass(frozen=True)
class TokenSequence:
    """``n`` coefficients plus basis-support centers (sample-index units).

    ``diagnostics`` is ``None`` for sequences restored from a cache, where
    no fit was performed.
    """

    coeffs: np.ndarray
    centers: np.ndarray
    diagnostics: FitDiagnostics | None


def condition_number(gram) -> float:
    """Ratio of the extreme eigenvalue magnitudes of a symmetric matrix."""
    g = np.asarray(gram, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("gram matrix must be square")
    eigs = np.abs(np.linalg.eigvalsh(g))
    smallest, largest = float(eigs.min()), float(eigs.max())
    if smallest == 0.0:
        return np.inf
    return largest / smallest


def shared_grid(lookback: int) -> np.ndarray:
    """Unit parameter grid shared by every window of one lookback length."""
    return np.linspace(0.0, 1.0, lookback)


def token_centers(knots: KnotVector, lookback: int) -> np.ndarray:
    """Support centers ``0.5 (tau_i + tau_{i+p+1})`` scaled to sample units."""
    p = knots.degree
    tau = knots.tau
    n = knots.basis_count
    return 0.5 * (tau[:n] + tau[p + 1 : p + 1 + n]) * (lookback - 1)


def _solve_window(y: np.ndarray, config: TokenizerConfig):
    """Unclipped coefficients with solver diagnostics (shared by fit + tuning)."""
    grid = shared_grid(config.lookback)
    knots = place_knots(grid, y, config.degree, config.budget, config.clip_factor)
    basis = basis_matrix(grid, knots).values
    gram = basis.T @ basis
    kappa = condition_number(gram)

    coeffs = None
    if kappa <= config.ridge_threshold:
        try:
            solution, *_ = scipy.linalg.lstsq(basis, y, lapack_driver="gelsy")
            if np.all(np.isfinite(solution)):
                coeffs = solution
        except np.linalg.LinAlgError:
            coeffs = None

    ridge_lambda = None
    used_ridge = coeffs is None
    if used_ridge:
        ridge_lambda = config.ridge_scale * float(np.trace(gram)) / config.budget
        regularized = gram + ridge_lambda * np.eye(config.budget)
        coeffs = scipy.linalg.solve(regularized, basis.T @ y, assume_a="pos")
        if not np.all(np.isfinite(coeffs)):
            raise ArithmeticError(
                "both the direct and the ridge-regularized solve produced "
                "non-finite coefficients"
            )
    return coeffs, knots, basis, kappa, used_ridge, ridge_lambda


def fit_window(y, config: TokenizerConfig) -> TokenSequence:
    """Tokenize one lookback window."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (config.lookback,):
        raise ValueError(f"expected a window of {config.lookback} samples, got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("window contains non-finite values")

    coeffs, knots, basis, kappa, used_ridge, ridge_lambda = _solve_window(y, config)
    cap = config.coeff_cap
    clipped_count = int(np.count_nonzero(np.abs(coeffs) > cap))
    coeffs = np.clip(coeffs, -cap, cap)
    # RMSE reflects the clipped coefficients the model will consume.
    fit_rmse = float(np.sqrt(np.mean((basis @ coeffs - y) ** 2)))
    return TokenSequence(
        coeffs=coeffs,
        centers=token_centers(knots, config.lookback),
        diagnostics=FitDiagnostics(
            used_ridge=used_ridge,
            condition_number=kappa,
            clipped_count=clipped_count,
            fit_rmse=fit_rmse,
            ridge_lambda=ridge_lambda,
        ),
    )


def window_starts(length: int, lookback: int, stride: int) -> np.ndarray:
    if length < lookback:
        raise ValueError(f"series of {length} samples is shorter than lookback {lookback}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return np.arange(0, length - lookback + 1, stride, dtype=np.int64)


def tune_clip_factor(
    train_series,
    lookback: int,
    budget: int,
    grid_lo: float = 0.10,
    grid_hi: float = 1.25,
    step: float = 0.01,
    stride: int = 100,
) -> float:
    """One-time clip-factor grid search minimizing the worst window RMSE.

    Degree-1 fits on sliding windows; ties break toward the larger factor.
    The search RMSE uses unclipped coefficients (clipping happens later in
    the pipeline).
    """
    g_star, _ = tune_clip_factor_curve(
        train_series, lookback, budget, grid_lo, grid_hi, step, stride
    )
    return g_star


def tune_clip_factor_curve(
    train_series,
    lookback: int,
    budget: int,
    grid_lo: float = 0.10,
    grid_hi: float = 1.25,
    step: float = 0.01,
    stride: int = 100,
):
    """Grid search returning ``(g_star, list[(g, max_rmse)])``."""
    series = np.asarray(train_series, dtype=np.float64)
    grid = np.round(np.arange(grid_lo, grid_hi + step / 2, step), 10)
    if grid.size == 0:
        raise ValueError("empty clip-factor grid")
    starts = window_starts(series.size, lookback, stride)

    curve = []
    best_g, best_rmse = None, np.inf
    # Matrices here are small; multithreaded BLAS only adds sync overhead.
    with threadpool_limits(limits=1):
        for g in grid:
            config = TokenizerConfig(
                lookback=lookback, budget=budget, degree=1, clip_factor=float(g)
            )
            worst = 0.0
            for start in starts:
                y = series[start : start + lookback]
                coeffs, _, basis, _, _, _ = _solve_window(y, config)
                rmse = float(np.sqrt(np.mean((basis @ coeffs - y) ** 2)))
                worst = max(worst, rmse)
            curve.append((float(g), worst))
            if worst <= best_rmse:
                best_g, best_rmse = float(g), worst
    return best_g, curve


def series_fingerprint(series: np.ndarray, config: TokenizerConfig) -> int:
    """64-bit hash of the raw series bytes together with (L, n, p, g)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(np.ascontiguousarray(series, dtype=np.float64).tobytes())
    h.update(
        struct.pack(
            "<IIId",
            config.lookback,
            config.budget,
            config.degree,
            config.clip_factor,
        )
    )
    return int.from_bytes(h.digest(), "little")


def write_cache(path, config: TokenizerConfig, fingerprint: int, starts, sequences) -> None:
    """Atomically write the token cache (little-endian binary)."""
    payload = bytearray()
    payload += CACHE_MAGIC
    payload += struct.pack(
        "<IIIIdQQ",
        CACHE_VERSION,
        config.lookback,
        config.budget,
        config.degree,
        config.clip_factor,
        fingerprint,
        len(sequences),
    )
    for start, seq in zip(starts, sequences):
        payload += struct.pack("<Q", int(start))
        payload += np.ascontiguousarray(seq.coeffs, dtype="<f8").tobytes()
        payload += np.ascontiguousarray(seq.centers, dtype="<f8").tobytes()
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(bytes(payload))
    os.replace(tmp, path)


def read_cache(path, config: TokenizerConfig, fingerprint: int):
    """Load cached tokens; returns ``(starts, sequences)`` or raises ValueError."""
    with open(path, "rb") as fh:
        blob = fh.read()
    header_size = len(CACHE_MAGIC) + struct.calcsize("<IIIIdQQ")
    if len(blob) < header_size or blob[:4] != CACHE_MAGIC:
        raise ValueError("not a token cache file")
    version, lookback, budget, degree, g, fp, count = struct.unpack_from(
        "<IIIIdQQ", blob, 4
    )
    if version != CACHE_VERSION:
        raise ValueError(f"unsupported cache version {version}")
    if (lookback, budget, degree) != (config.lookback, config.budget, config.degree):
        raise ValueError("cache header parameters do not match the tokenizer config")
    if g != config.clip_factor or fp != fingerprint:
        raise ValueError("cache fingerprint does not match the requested series/config")
    n = config.budget
    record = struct.calcsize("<Q") + 2 * n * 8
    if len(blob) != header_size + count * record:
        raise ValueError("cache file is truncated")
    starts, sequences = [], []
    offset = header_size
    for _ in range(count):
        (start,) = struct.unpack_from("<Q", blob, offset)
        offset += 8
        coeffs = np.frombuffer(blob, dtype="<f8", count=n, offset=offset).copy()
        offset += n * 8
        centers = np.frombuffer(blob, dtype="<f8", count=n, offset=offset).copy()
        offset += n * 8
        starts.append(start)
        sequences.append(TokenSequence(coeffs=coeffs, centers=centers, diagnostics=None))
    return np.asarray(starts, dtype=np.int64), sequences


def tokenize_dataset(
    series,
    config: TokenizerConfig,
    window_stride: int,
    cache_path=None,
) -> list[TokenSequence]:
    """Tokenize every sliding window of a series, optionally through a cache.

    A matching cache returns the stored tokens with zero fits performed
    (their ``diagnostics`` are ``None``); any mismatch is reported with a
    warning and the windows are refit and rewritten.
    """
    series = np.asarray(series, dtype=np.float64)
    starts = window_starts(series.size, config.lookback, window_stride)
    fingerprint = series_fingerprint(series, config)

    if cache_path is not None and os.path.exists(cache_path):
        try:
            cached_starts, sequences = read_cache(cache_path, config, fingerprint)
            if cached_starts.shape == starts.shape and np.array_equal(cached_starts, starts):
                return sequences
            raise ValueError("cached window starts do not match the requested stride")
        except ValueError as exc:
            warnings.warn(f"token cache rejected ({exc}); refitting", stacklevel=2)

    with threadpool_limits(limits=1):
        sequences = [fit_window(series[s : s + config.lookback], config) for s in starts]
    if cache_path is not None:
        write_cache(cache_path, config, fingerprint, starts, sequences)
    return sequences


def fits_performed(sequences) -> int:
    """Number of sequences that came from a fresh fit rather than the cache."""
    return sum(1 for seq in sequences if seq.diagnostics is not None)
