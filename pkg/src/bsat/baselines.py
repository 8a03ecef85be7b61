"""Comparison tokenizers at matched token budgets.

Uniform downsampling keeps every ``L/T``-th sample; patching slices
overlapping fixed-length segments with stride ``L/T`` and patch length
``2 L/T``, padding the final patch by repeating the last sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PatchConfig:
    lookback: int
    budget: int

    def __post_init__(self):
        if self.budget < 1 or self.lookback % self.budget != 0:
            raise ValueError(
                f"lookback {self.lookback} must be divisible by budget {self.budget}"
            )
        if self.patch_len > self.lookback:
            raise ValueError("patch length exceeds the lookback window")

    @property
    def stride(self) -> int:
        return self.lookback // self.budget

    @property
    def patch_len(self) -> int:
        return 2 * self.stride


def uds_tokens(y, budget: int) -> np.ndarray:
    """Every ``(L/T)``-th sample starting at offset 0; exactly ``T`` tokens."""
    y = np.asarray(y, dtype=np.float64)
    if budget < 1 or y.size % budget != 0:
        raise ValueError(f"window length {y.size} must be divisible by budget {budget}")
    return y[:: y.size // budget].copy()


def uds_positions(lookback: int, budget: int) -> np.ndarray:
    """Sample indices of the kept samples."""
    return np.arange(budget, dtype=np.float64) * (lookback // budget)


def patch_tokens(y, config: PatchConfig) -> np.ndarray:
    """Overlapping patches, shape ``(T, patch_len)``; last patch end-padded."""
    y = np.asarray(y, dtype=np.float64)
    if y.size != config.lookback:
        raise ValueError(f"expected a window of {config.lookback} samples, got {y.size}")
    padded = np.concatenate((y, np.full(config.patch_len - config.stride, y[-1])))
    out = np.empty((config.budget, config.patch_len))
    for i in range(config.budget):
        start = i * config.stride
        out[i] = padded[start : start + config.patch_len]
    return out


def patch_positions(config: PatchConfig) -> np.ndarray:
    """Left sample index of each patch."""
    return np.arange(config.budget, dtype=np.float64) * config.stride


def uds_reconstruction(tokens, lookback: int) -> np.ndarray:
    """Linear interpolation of the kept samples back onto the full window."""
    tokens = np.asarray(tokens, dtype=np.float64)
    anchors = uds_positions(lookback, tokens.size)
    return np.interp(np.arange(lookback, dtype=np.float64), anchors, tokens)


def patch_reconstruction(patches, config: PatchConfig) -> np.ndarray:
    """Average overlapping patch values back at their sample positions."""
    patches = np.asarray(patches, dtype=np.float64)
    total = np.zeros(config.lookback + config.patch_len - config.stride)
    hits = np.zeros_like(total)
    for i in range(config.budget):
        start = i * config.stride
        total[start : start + config.patch_len] += patches[i]
        hits[start : start + config.patch_len] += 1.0
    return (total / hits)[: config.lookback]
