"""Desk-scale transformer forecaster over tokenized windows.

Pipeline: per-window instance normalization of the value channels, min-max
center normalization, linear embedding, N encoder layers (multi-head
attention with the selected positional mode, residual attention carry,
batch normalization, GELU feed-forward), a flatten head, and inverse
scaling back to data units. Training uses AdamW, a warmup+cosine learning
rate schedule, global gradient clipping and early stopping on validation
RMSE. All gradients come from the reverse-mode engine in
:mod:`bsat.autodiff`.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import asdict, dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from . import autodiff as ad
from .baselines import PatchConfig, patch_positions, patch_tokens, uds_positions, uds_tokens
from .posenc import DEFAULT_BASE, MODES, PosEncState

REVIN_STD_FLOOR = 1e-8
BN_EPS = 1e-5
BN_MOMENTUM = 0.1
CHECKPOINT_MAGIC = b"BSATCKPT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 2
    d_model: int = 32
    heads: int = 4
    ff_factor: int = 2
    dropout: float = 0.0
    fc_dropout: float = 0.0
    attn_dropout: float = 0.0
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    seed: int = 2025
    horizon: int = 96
    mode: str = "l-rope-lpe"
    batch_size: int = 128
    max_epochs: int = 100
    warmup_epochs: int = 10
    decay_epochs: int = 40
    patience: int = 10
    grace_epochs: int = 10

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by {self.heads} heads")
        if (self.d_model // self.heads) % 2 != 0:
            raise ValueError("head dimension must be even for rotary encodings")
        if self.mode not in MODES:
            raise ValueError(f"unknown positional mode {self.mode!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    @property
    def d_head(self) -> int:
        return self.d_model // self.heads

    @property
    def d_ff(self) -> int:
        return self.d_model * self.ff_factor


# ---------------------------------------------------------------------------
# Instance normalization and token-batch assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RevinState:
    mean: np.ndarray
    std: np.ndarray


def revin_forward(coeffs) -> tuple[np.ndarray, RevinState]:
    """Standardize one window's value entries; keep the stats for inversion."""
    arr = np.asarray(coeffs, dtype=np.float64)
    if arr.size < 2:
        raise ValueError("instance normalization needs at least 2 tokens")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite values in token coefficients")
    mean = arr.mean()
    std = max(arr.std(), REVIN_STD_FLOOR)
    state = RevinState(mean=np.asarray(mean), std=np.asarray(std))
    return (arr - mean) / std, state


def revin_inverse(normalized, state: RevinState) -> np.ndarray:
    return np.asarray(normalized) * state.std + state.mean


def normalize_centers(centers, lookback: int) -> np.ndarray:
    """Min-max map of sample-unit centers onto [0, 1]."""
    c = np.asarray(centers, dtype=np.float64)
    if np.any(c < 0) or np.any(c > lookback - 1):
        raise ValueError(f"centers must lie within [0, {lookback - 1}]")
    return c / (lookback - 1)


@dataclass(frozen=True)
class TokenBatch:
    """Model input: raw value channels plus sample-unit token positions."""

    values: np.ndarray  # (B, n, C)
    centers: np.ndarray  # (B, n)
    lookback: int

    @property
    def n_tokens(self) -> int:
        return self.values.shape[1]

    @property
    def in_channels(self) -> int:
        return self.values.shape[2] + 1  # value channels + center channel


def batch_from_sequences(sequences, lookback: int) -> TokenBatch:
    coeffs = np.stack([seq.coeffs for seq in sequences])
    centers = np.stack([seq.centers for seq in sequences])
    return TokenBatch(values=coeffs[:, :, None], centers=centers, lookback=lookback)


def batch_from_uds(windows: np.ndarray, budget: int) -> TokenBatch:
    windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    lookback = windows.shape[1]
    values = np.stack([uds_tokens(w, budget) for w in windows])[:, :, None]
    centers = np.broadcast_to(
        uds_positions(lookback, budget), (windows.shape[0], budget)
    ).copy()
    return TokenBatch(values=values, centers=centers, lookback=lookback)


def batch_from_patches(windows: np.ndarray, config: PatchConfig) -> TokenBatch:
    windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    values = np.stack([patch_tokens(w, config) for w in windows])
    centers = np.broadcast_to(
        patch_positions(config), (windows.shape[0], config.budget)
    ).copy()
    return TokenBatch(values=values, centers=centers, lookback=config.lookback)


def _batch_revin(values: np.ndarray) -> tuple[np.ndarray, RevinState]:
    """Per-window standardization over all value channels of a batch."""
    mean = values.mean(axis=(1, 2), keepdims=True)
    std = np.maximum(values.std(axis=(1, 2), keepdims=True), REVIN_STD_FLOOR)
    return (values - mean) / std, RevinState(mean=mean[:, :, 0], std=std[:, :, 0])


# ---------------------------------------------------------------------------
# The model
# ---------------------------------------------------------------------------


class ForecastModel:
    """Encoder-only forecaster with additive/rotary positional options."""

    def __init__(self, config: ModelConfig, n_tokens: int, in_channels: int,
                 dtype=np.float32):
        self.config = config
        self.n_tokens = n_tokens
        self.in_channels = in_channels
        self.dtype = np.dtype(dtype)
        self.params: dict[str, ad.Tensor] = {}
        self.running: dict[str, np.ndarray] = {}
        rng = np.random.default_rng(config.seed)

        d, h, dh, dff = config.d_model, config.heads, config.d_head, config.d_ff
        self._param("embed.w", self._xavier(rng, in_channels, d))
        self._param("embed.b", np.zeros(d))
        # The table and the log-bases exist in every mode; modes that do not
        # use them simply leave them off the compute path.
        self._param("lpe.table", np.zeros((n_tokens, d)))
        for l in range(config.layers):
            self._param(f"layers.{l}.phi", np.asarray(np.log(DEFAULT_BASE)))
            for name in ("wq", "wk", "wv", "wo"):
                self._param(f"layers.{l}.{name}", self._xavier(rng, d, d))
                self._param(f"layers.{l}.b{name[1]}", np.zeros(d))
            for bn in ("bn1", "bn2"):
                self._param(f"layers.{l}.{bn}.gamma", np.ones(d))
                self._param(f"layers.{l}.{bn}.beta", np.zeros(d))
                self.running[f"layers.{l}.{bn}.mean"] = np.zeros(d)
                self.running[f"layers.{l}.{bn}.var"] = np.ones(d)
            self._param(f"layers.{l}.ffn.w1", self._xavier(rng, d, dff))
            self._param(f"layers.{l}.ffn.b1", np.zeros(dff))
            self._param(f"layers.{l}.ffn.w2", self._xavier(rng, dff, d))
            self._param(f"layers.{l}.ffn.b2", np.zeros(d))
        self._param("head.w", self._xavier(rng, n_tokens * d, config.horizon))
        self._param("head.b", np.zeros(config.horizon))

        half = dh // 2
        self._rope_slope = (-2.0 * np.arange(half) / dh).astype(self.dtype)
        self._fixed_freqs = (DEFAULT_BASE ** self._rope_slope.astype(np.float64)).astype(
            self.dtype
        )

    def _xavier(self, rng, fan_in: int, fan_out: int) -> np.ndarray:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    def _param(self, name: str, value: np.ndarray) -> None:
        self.params[name] = ad.Tensor(np.asarray(value, dtype=self.dtype), requires_grad=True)

    # -- introspection ------------------------------------------------------

    def phis(self) -> np.ndarray:
        return np.array(
            [float(self.params[f"layers.{l}.phi"].data) for l in range(self.config.layers)]
        )

    def posenc_state(self) -> PosEncState:
        return PosEncState(
            mode=self.config.mode,
            lpe_table=self.params["lpe.table"].data.copy(),
            phi=self.phis(),
        )

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays = {f"param.{k}": v.data for k, v in self.params.items()}
        arrays.update({f"running.{k}": v for k, v in self.running.items()})
        return arrays

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for k, v in arrays.items():
            kind, _, name = k.partition(".")
            if kind == "param":
                self.params[name].data = np.asarray(v, dtype=self.dtype)
            elif kind == "running":
                self.running[name] = np.asarray(v, dtype=np.float64)

    # -- forward ------------------------------------------------------------

    def _dropout(self, x: ad.Tensor, rate: float, training: bool, rng) -> ad.Tensor:
        if not training or rng is None or rate <= 0.0:
            return x
        mask = (rng.random(x.shape) >= rate).astype(self.dtype) / self.dtype.type(1.0 - rate)
        return x * ad.Tensor(mask)

    def _batch_norm(self, x: ad.Tensor, prefix: str, training: bool) -> ad.Tensor:
        gamma, beta = self.params[f"{prefix}.gamma"], self.params[f"{prefix}.beta"]
        if training:
            mean = x.mean(axis=(0, 1), keepdims=True)
            centered = x - mean
            var = (centered * centered).mean(axis=(0, 1), keepdims=True)
            m = BN_MOMENTUM
            self.running[f"{prefix}.mean"] = (1 - m) * self.running[
                f"{prefix}.mean"
            ] + m * mean.data.reshape(-1).astype(np.float64)
            self.running[f"{prefix}.var"] = (1 - m) * self.running[
                f"{prefix}.var"
            ] + m * var.data.reshape(-1).astype(np.float64)
            x_hat = centered * (1.0 / ad.sqrt(var + BN_EPS))
        else:
            mean = self.running[f"{prefix}.mean"].astype(self.dtype)
            inv = (1.0 / np.sqrt(self.running[f"{prefix}.var"] + BN_EPS)).astype(self.dtype)
            x_hat = (x - ad.Tensor(mean)) * ad.Tensor(inv)
        return x_hat * gamma + beta

    def _layer_freqs(self, layer: int):
        mode = self.config.mode
        if mode.startswith("l-rope"):
            return ad.exp(self.params[f"layers.{layer}.phi"] * ad.Tensor(self._rope_slope))
        return ad.Tensor(self._fixed_freqs)

    def forward(
        self,
        batch: TokenBatch,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[ad.Tensor, RevinState]:
        """Head output (RevIN space) plus the per-window stats to invert it."""
        cfg = self.config
        if batch.n_tokens != self.n_tokens or batch.in_channels != self.in_channels:
            raise ValueError(
                f"batch shape ({batch.n_tokens} tokens, {batch.in_channels} channels) does "
                f"not match model ({self.n_tokens} tokens, {self.in_channels} channels)"
            )
        values_norm, revin = _batch_revin(batch.values)
        centers_norm = normalize_centers(batch.centers, batch.lookback)
        x_in = np.concatenate([values_norm, centers_norm[:, :, None]], axis=2)
        x = ad.Tensor(x_in.astype(self.dtype))

        z = x @ self.params["embed.w"] + self.params["embed.b"]
        if "lpe" in cfg.mode:
            z = z + ad.take_rows(self.params["lpe.table"], np.arange(self.n_tokens))
        z = self._dropout(z, cfg.dropout, training, rng)

        B = batch.values.shape[0]
        n, h, dh = self.n_tokens, cfg.heads, cfg.d_head
        use_rope = "rope" in cfg.mode
        positions = None
        if use_rope:
            # Rotary positions are the raw sample-unit centers.
            positions = ad.Tensor(
                batch.centers.reshape(B, 1, n, 1).astype(self.dtype)
            )

        carried_logits = None
        for l in range(cfg.layers):
            q = z @ self.params[f"layers.{l}.wq"] + self.params[f"layers.{l}.bq"]
            k = z @ self.params[f"layers.{l}.wk"] + self.params[f"layers.{l}.bk"]
            v = z @ self.params[f"layers.{l}.wv"] + self.params[f"layers.{l}.bv"]
            q = q.reshape((B, n, h, dh)).transpose((0, 2, 1, 3))
            k = k.reshape((B, n, h, dh)).transpose((0, 2, 1, 3))
            v = v.reshape((B, n, h, dh)).transpose((0, 2, 1, 3))
            if use_rope:
                angles = positions * self._layer_freqs(l)  # (B, 1, n, dh/2)
                q = ad.rotary(q, angles)
                k = ad.rotary(k, angles)
            logits = (q @ k.transpose((0, 1, 3, 2))) * self.dtype.type(1.0 / np.sqrt(dh))
            if carried_logits is not None:
                logits = logits + carried_logits
            carried_logits = logits
            weights = ad.softmax(logits, axis=-1)
            weights = self._dropout(weights, cfg.attn_dropout, training, rng)
            attn = (weights @ v).transpose((0, 2, 1, 3)).reshape((B, n, h * dh))
            attn = attn @ self.params[f"layers.{l}.wo"] + self.params[f"layers.{l}.bo"]
            z = self._batch_norm(z + attn, f"layers.{l}.bn1", training)
            hidden = ad.gelu(z @ self.params[f"layers.{l}.ffn.w1"] + self.params[f"layers.{l}.ffn.b1"])
            hidden = self._dropout(hidden, cfg.fc_dropout, training, rng)
            ffn = hidden @ self.params[f"layers.{l}.ffn.w2"] + self.params[f"layers.{l}.ffn.b2"]
            z = self._batch_norm(z + ffn, f"layers.{l}.bn2", training)

        flat = z.reshape((B, n * cfg.d_model))
        return flat @ self.params["head.w"] + self.params["head.b"], revin


def predict(
    model: ForecastModel,
    batch: TokenBatch,
    train_mean: float = 0.0,
    train_std: float = 1.0,
    chunk_size: int = 512,
) -> np.ndarray:
    """Forecast in original data units.

    Head output -> per-window instance de-normalization -> global train-fold
    de-normalization.
    """
    outputs = []
    total = batch.values.shape[0]
    with threadpool_limits(limits=1):
        for lo in range(0, total, chunk_size):
            hi = min(lo + chunk_size, total)
            sub = TokenBatch(
                values=batch.values[lo:hi], centers=batch.centers[lo:hi],
                lookback=batch.lookback,
            )
            head, revin = model.forward(sub, training=False)
            normalized = head.data.astype(np.float64) * revin.std + revin.mean
            outputs.append(normalized * train_std + train_mean)
    return np.concatenate(outputs, axis=0)


# ---------------------------------------------------------------------------
# Optimization
# ---------------------------------------------------------------------------


class AdamW:
    """Adam with decoupled weight decay (applied to >=2-D tensors only)."""

    def __init__(self, params: dict[str, ad.Tensor], weight_decay: float = 0.0,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.weight_decay = weight_decay
        self.betas = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, lr: float) -> None:
        b1, b2 = self.betas
        self.t += 1
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * (g * g)
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + self.eps)
            if self.weight_decay > 0 and p.data.ndim >= 2:
                p.data = p.data - lr * self.weight_decay * p.data


def clip_gradients(params: dict[str, ad.Tensor], max_norm: float = 1.0) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``."""
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    norm = np.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad = p.grad * scale
    return float(norm)


def cosine_warmup_lr(epoch: int, peak: float, warmup_epochs: int = 10,
                     decay_epochs: int = 40) -> float:
    """5% -> 100% linear warmup, cosine decay to 1%, then constant 1%."""
    if epoch < warmup_epochs:
        frac = 0.05 + 0.95 * epoch / warmup_epochs
    elif epoch <= warmup_epochs + decay_epochs:
        progress = (epoch - warmup_epochs) / decay_epochs
        frac = 0.01 + 0.99 * 0.5 * (1.0 + np.cos(np.pi * progress))
    else:
        frac = 0.01
    return peak * frac


def mse_loss(head_out: ad.Tensor, revin: RevinState, targets: np.ndarray,
             dtype) -> ad.Tensor:
    """MSE against normalized-space targets, after instance de-normalization."""
    pred = head_out * ad.Tensor(revin.std.astype(dtype)) + ad.Tensor(revin.mean.astype(dtype))
    diff = pred - ad.Tensor(targets.astype(dtype))
    return (diff * diff).mean()


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    history: list[dict]
    best_val_rmse: float
    best_epoch: int
    epochs_run: int


def train(
    model: ForecastModel,
    train_batch: TokenBatch,
    train_targets: np.ndarray,
    val_batch: TokenBatch,
    val_targets: np.ndarray,
    optimizer: AdamW | None = None,
    train_mean: float = 0.0,
    train_std: float = 1.0,
    rng: np.random.Generator | None = None,
    log=None,
) -> TrainResult:
    """Fit the model; returns per-epoch history with the best weights restored.

    ``train_targets``/``val_targets`` are in normalized-series units;
    validation RMSE is reported in original units through
    ``train_mean``/``train_std``.
    """
    cfg = model.config
    if optimizer is None:
        optimizer = AdamW(model.params, weight_decay=cfg.weight_decay)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    num_windows = train_batch.values.shape[0]
    history: list[dict] = []
    best_val = np.inf
    best_epoch = -1
    best_state: dict[str, np.ndarray] | None = None
    patience_left = cfg.patience

    # Desk-scale matmuls; a single BLAS thread avoids sync overhead and keeps
    # runs deterministic.
    with threadpool_limits(limits=1):
        for epoch in range(cfg.max_epochs):
            lr = cosine_warmup_lr(epoch, cfg.learning_rate, cfg.warmup_epochs, cfg.decay_epochs)
            order = rng.permutation(num_windows)
            epoch_loss = 0.0
            for batch_index, lo in enumerate(range(0, num_windows, cfg.batch_size)):
                idx = order[lo : lo + cfg.batch_size]
                sub = TokenBatch(
                    values=train_batch.values[idx],
                    centers=train_batch.centers[idx],
                    lookback=train_batch.lookback,
                )
                model.zero_grad()
                head, revin = model.forward(sub, training=True, rng=rng)
                loss = mse_loss(head, revin, train_targets[idx], model.dtype)
                loss_value = float(loss.data)
                if not np.isfinite(loss_value):
                    raise RuntimeError(
                        f"training diverged: non-finite loss at epoch {epoch}, "
                        f"batch {batch_index}"
                    )
                loss.backward()
                clip_gradients(model.params, 1.0)
                optimizer.step(lr)
                epoch_loss += loss_value * idx.size
            epoch_loss /= num_windows

            val_pred = predict(model, val_batch, train_mean, train_std)
            val_true = val_targets * train_std + train_mean
            val_rmse = float(np.sqrt(np.mean((val_pred - val_true) ** 2)))
            spread = float(np.exp(model.phis()).max() - np.exp(model.phis()).min())
            record = {
                "epoch": epoch,
                "lr": lr,
                "train_loss": epoch_loss,
                "val_rmse": val_rmse,
                "base_spread": spread,
            }
            history.append(record)
            if log is not None:
                log(record)

            if val_rmse < best_val:
                best_val = val_rmse
                best_epoch = epoch
                best_state = {k: v.copy() for k, v in model.state_arrays().items()}
                patience_left = cfg.patience
            elif epoch >= cfg.grace_epochs:
                patience_left -= 1
                if patience_left <= 0:
                    break

    if best_state is not None:
        model.load_state_arrays(best_state)
    return TrainResult(
        history=history,
        best_val_rmse=best_val,
        best_epoch=best_epoch,
        epochs_run=len(history),
    )


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------


def grad_check(
    model: ForecastModel,
    batch: TokenBatch,
    targets: np.ndarray,
    epsilon: float = 1e-5,
    samples_per_param: int = 4,
    seed: int = 0,
) -> dict:
    """Central finite differences vs reverse-mode, sampled from every group.

    The model must be double precision; dropout is off (two FD evaluations
    need identical compute paths) while batch norm stays in training mode so
    the batch-statistics gradient path is exercised. Components where both
    sides are below the finite-difference cancellation noise (~1e-6 at
    eps=1e-5) are treated as agreeing zeros: batch norm makes the loss exactly
    invariant to some bias directions, and central differences cannot resolve
    a zero gradient below that floor.
    """
    if model.dtype != np.float64:
        raise ValueError("grad_check requires a float64 model")
    rng = np.random.default_rng(seed)

    def loss_value() -> float:
        head, revin = model.forward(batch, training=True, rng=None)
        return float(mse_loss(head, revin, targets, model.dtype).data)

    with threadpool_limits(limits=1):
        model.zero_grad()
        head, revin = model.forward(batch, training=True, rng=None)
        loss = mse_loss(head, revin, targets, model.dtype)
        loss.backward()

        per_param: dict[str, float] = {}
        worst = 0.0
        for name, p in model.params.items():
            analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
            flat_indices = rng.permutation(p.data.size)[:samples_per_param]
            err = 0.0
            for flat in flat_indices:
                idx = np.unravel_index(flat, p.data.shape)
                original = p.data[idx]
                p.data[idx] = original + epsilon
                up = loss_value()
                p.data[idx] = original - epsilon
                down = loss_value()
                p.data[idx] = original
                fd = (up - down) / (2 * epsilon)
                if max(abs(fd), abs(analytic[idx])) < 1e-6:
                    continue
                rel = abs(fd - analytic[idx]) / max(abs(fd), abs(analytic[idx]), 1e-8)
                err = max(err, rel)
            per_param[name] = err
            worst = max(worst, err)
    return {"max_rel_error": worst, "per_param": per_param}


# ---------------------------------------------------------------------------
# Checkpoint serialization
# ---------------------------------------------------------------------------


def save_checkpoint(
    path,
    model: ForecastModel,
    optimizer: AdamW | None = None,
    rng: np.random.Generator | None = None,
    norm_stats: dict | None = None,
    extra: dict | None = None,
) -> None:
    """Versioned binary checkpoint; value-exact and byte-deterministic."""
    arrays: dict[str, np.ndarray] = dict(model.state_arrays())
    opt_meta = None
    if optimizer is not None:
        opt_meta = {"t": optimizer.t, "weight_decay": optimizer.weight_decay,
                    "betas": list(optimizer.betas), "eps": optimizer.eps}
        for k, v in optimizer.m.items():
            arrays[f"opt.m.{k}"] = v
        for k, v in optimizer.v.items():
            arrays[f"opt.v.{k}"] = v
    names = sorted(arrays)
    header = {
        "config": asdict(model.config),
        "n_tokens": model.n_tokens,
        "in_channels": model.in_channels,
        "dtype": model.dtype.name,
        "arrays": [[k, list(arrays[k].shape), arrays[k].dtype.name] for k in names],
        "optimizer": opt_meta,
        "rng_state": rng.bit_generator.state if rng is not None else None,
        "norm_stats": norm_stats,
        "extra": extra,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<IQ", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for k in names:
            fh.write(np.ascontiguousarray(arrays[k]).tobytes())
    os.replace(tmp, path)


def load_checkpoint(path):
    """Load a checkpoint; returns ``(model, optimizer, rng, norm_stats, extra)``."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError("not a forecaster checkpoint")
        version, hlen = struct.unpack("<IQ", fh.read(12))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        header = json.loads(fh.read(hlen).decode("utf-8"))
        arrays = {}
        for name, shape, dtype in header["arrays"]:
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(
                fh.read(count * np.dtype(dtype).itemsize), dtype=dtype
            ).reshape(shape).copy()
            arrays[name] = data

    config = ModelConfig(**header["config"])
    model = ForecastModel(
        config, header["n_tokens"], header["in_channels"], dtype=header["dtype"]
    )
    model.load_state_arrays(
        {k: v for k, v in arrays.items() if k.startswith(("param.", "running."))}
    )
    optimizer = None
    if header["optimizer"] is not None:
        meta = header["optimizer"]
        optimizer = AdamW(
            model.params,
            weight_decay=meta["weight_decay"],
            betas=tuple(meta["betas"]),
            eps=meta["eps"],
        )
        optimizer.t = meta["t"]
        for k in model.params:
            optimizer.m[k] = arrays[f"opt.m.{k}"]
            optimizer.v[k] = arrays[f"opt.v.{k}"]
    rng = None
    if header["rng_state"] is not None:
        rng = np.random.default_rng()
        rng.bit_generator.state = header["rng_state"]
    return model, optimizer, rng, header["norm_stats"], header["extra"]
