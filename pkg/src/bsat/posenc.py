"""Positional-encoding kernels for non-uniform tokens.

Five modes are supported: a learned additive table (lpe), rotary embeddings
with a fixed base (f-rope) or a per-layer learnable base (l-rope), and the
two hybrids that apply both (f-rope-lpe, l-rope-lpe). Rotary rotations act
on interleaved coordinate pairs (dims 2i, 2i+1) and accept real-valued,
non-integer positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MODES = ("lpe", "f-rope", "l-rope", "f-rope-lpe", "l-rope-lpe")
DEFAULT_BASE = 10000.0


@dataclass(frozen=True)
class RotaryFrequencies:
    """Geometric frequency ladder ``f_i = base**(-2(i-1)/d_head)``."""

    base: float
    head_dim: int
    freqs: np.ndarray


@dataclass
class PosEncState:
    """Mode plus the learned positional parameters of a model."""

    mode: str
    lpe_table: np.ndarray | None = None
    phi: np.ndarray | None = None
    fixed_base: float = DEFAULT_BASE

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown positional mode {self.mode!r}; choose from {MODES}")

    @property
    def uses_lpe(self) -> bool:
        return "lpe" in self.mode

    @property
    def uses_rotary(self) -> bool:
        return "rope" in self.mode

    @property
    def learnable_base(self) -> bool:
        return self.mode.startswith("l-rope")


def rope_frequencies(head_dim: int, base: float) -> RotaryFrequencies:
    """Frequency ladder for one head; ``f_1 = 1`` exactly."""
    if head_dim < 2 or head_dim % 2 != 0:
        raise ValueError(f"head dimension must be even and >= 2, got {head_dim}")
    if base <= 0:
        raise ValueError("rotary base must be positive")
    exponents = -2.0 * np.arange(head_dim // 2, dtype=np.float64) / head_dim
    return RotaryFrequencies(base=float(base), head_dim=head_dim, freqs=base**exponents)


def rotary_angles(position: float, freqs: RotaryFrequencies) -> np.ndarray:
    return float(position) * freqs.freqs


def apply_rotary(vec, position: float, freqs: RotaryFrequencies) -> np.ndarray:
    """Rotate each interleaved pair of ``vec`` by ``position * f_i``."""
    v = np.asarray(vec, dtype=np.float64)
    if v.shape[-1] != freqs.head_dim:
        raise ValueError(f"vector has {v.shape[-1]} dims, frequencies expect {freqs.head_dim}")
    theta = rotary_angles(position, freqs)
    cos, sin = np.cos(theta), np.sin(theta)
    x1, x2 = v[..., 0::2], v[..., 1::2]
    out = np.empty_like(v)
    out[..., 0::2] = x1 * cos - x2 * sin
    out[..., 1::2] = x1 * sin + x2 * cos
    return out


def lpe_add(token_embedding, rank: int, state: PosEncState) -> np.ndarray:
    """Add the learned positional row for a token's left-to-right rank."""
    if state.lpe_table is None:
        raise ValueError("state carries no learned positional table")
    table = np.asarray(state.lpe_table)
    if not 0 <= rank < table.shape[0]:
        raise IndexError(f"token rank {rank} outside table of {table.shape[0]} rows")
    return np.asarray(token_embedding) + table[rank]


def layer_base(phi: float) -> float:
    """Strictly positive rotary base ``exp(phi)``."""
    return float(np.exp(phi))


def base_spread(phis) -> float:
    """Spread ``max - min`` of the per-layer bases."""
    phis = np.asarray(phis, dtype=np.float64)
    if phis.size == 0:
        raise ValueError("need at least one layer")
    bases = np.exp(phis)
    return float(bases.max() - bases.min())


def initial_phi(num_layers: int) -> np.ndarray:
    """Per-layer log-base parameters at their initialization value."""
    return np.full(num_layers, np.log(DEFAULT_BASE))
