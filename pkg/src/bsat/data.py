"""Dataset ingestion, chronological splitting, windowing, and run configs.

Series are split 60/20/20 chronologically; normalization statistics come
from the train range only and the whole series is stored normalized by
them. Windows never cross a split boundary.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, fields

import numpy as np

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class SeriesDataset:
    name: str
    values: np.ndarray  # normalized by train statistics
    train_end: int
    val_end: int
    train_mean: float
    train_std: float
    cadence: str = ""

    def split(self, name: str) -> np.ndarray:
        if name == "train":
            return self.values[: self.train_end]
        if name == "val":
            return self.values[self.train_end : self.val_end]
        if name == "test":
            return self.values[self.val_end :]
        raise KeyError(f"unknown split {name!r}")

    def split_sizes(self) -> tuple[int, int, int]:
        total = self.values.size
        return self.train_end, self.val_end - self.train_end, total - self.val_end

    def denormalize(self, values) -> np.ndarray:
        return np.asarray(values) * self.train_std + self.train_mean


def load_csv(path, target_column: str) -> np.ndarray:
    """Read one named column of a headered CSV as an ordered real series."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if target_column not in header:
            raise ValueError(
                f"{path}: column {target_column!r} not in header {header}"
            )
        col = header.index(target_column)
        values = []
        for row_number, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                values.append(float(row[col]))
            except (ValueError, IndexError):
                cell = row[col] if col < len(row) else "<missing>"
                raise ValueError(
                    f"{path}: row {row_number}: cannot parse {cell!r} as a number"
                ) from None
    if not values:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(values, dtype=np.float64)


def aggregate(series, factor: int, reducer: str = "mean") -> np.ndarray:
    """Reduce non-overlapping blocks of ``factor`` samples (trailing remainder dropped)."""
    x = np.asarray(series, dtype=np.float64)
    if factor < 1:
        raise ValueError("aggregation factor must be >= 1")
    if factor == 1:
        return x.copy()
    remainder = x.size % factor
    if remainder:
        warnings.warn(
            f"dropping {remainder} trailing samples not filling an aggregation block",
            stacklevel=2,
        )
        x = x[: x.size - remainder]
    blocks = x.reshape(-1, factor)
    if reducer == "mean":
        return blocks.mean(axis=1)
    if reducer == "sum":
        return blocks.sum(axis=1)
    raise ValueError(f"unknown reducer {reducer!r}")


def chronological_split(series, name: str = "", cadence: str = "") -> SeriesDataset:
    """60/20/20 chronological split; floor boundaries, remainder to test."""
    raw = np.asarray(series, dtype=np.float64)
    if raw.size < 5:
        raise ValueError(f"series of {raw.size} samples is too short to split")
    train_end = int(np.floor(0.6 * raw.size))
    val_end = int(np.floor(0.8 * raw.size))
    train_mean = float(raw[:train_end].mean())
    train_std = float(raw[:train_end].std())
    if train_std == 0.0:
        train_std = 1.0
    normalized = (raw - train_mean) / train_std
    return SeriesDataset(
        name=name,
        values=normalized,
        train_end=train_end,
        val_end=val_end,
        train_mean=train_mean,
        train_std=train_std,
        cadence=cadence,
    )


def split_windows(values: np.ndarray, lookback: int, horizon: int, stride: int):
    """(start, lookback, target) triples fully inside one split array."""
    values = np.asarray(values)
    if lookback + horizon > values.size:
        raise ValueError(
            f"lookback {lookback} + horizon {horizon} exceeds split length {values.size}"
        )
    if stride < 1:
        raise ValueError("stride must be >= 1")
    out = []
    for start in range(0, values.size - lookback - horizon + 1, stride):
        out.append(
            (start, values[start : start + lookback], values[start + lookback : start + lookback + horizon])
        )
    return out


def windows(dataset: SeriesDataset, lookback: int, horizon: int, stride: int) -> dict:
    """Per-split window/target pairs; no window spans a split boundary."""
    return {
        split: split_windows(dataset.split(split), lookback, horizon, stride)
        for split in SPLIT_NAMES
    }


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

TOKENIZERS = ("bsat", "uds", "patch")


@dataclass
class RunConfig:
    data_path: str = ""
    target_column: str = ""
    tokenizer: str = "bsat"
    lookback: int = 720
    budget: int = 45
    degree: int = 3
    clip_factor: float = 1.0
    coeff_cap: float = 10.0
    ridge_threshold: float = 1e8
    ridge_scale: float = 1e-6
    mode: str = "l-rope-lpe"
    layers: int = 2
    d_model: int = 32
    heads: int = 4
    ff_factor: int = 2
    dropout: float = 0.0
    fc_dropout: float = 0.0
    attn_dropout: float = 0.0
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 128
    max_epochs: int = 100
    horizon: int = 96
    seed: int = 2025
    window_stride: int = 1
    aggregate_factor: int = 1
    cache_dir: str = "cache"
    output_dir: str = "out"

    def __post_init__(self):
        if self.tokenizer not in TOKENIZERS:
            raise ValueError(f"unknown tokenizer {self.tokenizer!r}; choose from {TOKENIZERS}")


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {line_number}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def load_config(path) -> RunConfig:
    """Parse a config file; every key must be present and known."""
    with open(path, encoding="utf-8") as fh:
        raw = parse_config_text(fh.read())
    spec = {f.name: f.type for f in fields(RunConfig)}
    missing = sorted(set(spec) - set(raw))
    if missing:
        raise ValueError(f"config {path}: missing key {missing[0]!r}")
    unknown = sorted(set(raw) - set(spec))
    if unknown:
        raise ValueError(f"config {path}: unknown key {unknown[0]!r}")
    kwargs = {}
    for f in fields(RunConfig):
        text = raw[f.name]
        if f.type == "int":
            kwargs[f.name] = int(text)
        elif f.type == "float":
            kwargs[f.name] = float(text)
        else:
            kwargs[f.name] = text
    return RunConfig(**kwargs)


def config_text(config: RunConfig) -> str:
    """Serialize a config in the flat key = value format."""
    lines = [f"{f.name} = {getattr(config, f.name)}" for f in fields(RunConfig)]
    return "\n".join(lines) + "\n"
