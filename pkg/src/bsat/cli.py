"""Command-line surface tying the tokenization/training pipeline together.

Subcommands: tokenize, tune-clip, train, evaluate, analyze, compare, plot,
selftest. Every failure exits nonzero with a one-line reason; outputs are
byte-deterministic for fixed inputs and seed.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields, replace

import numpy as np
from threadpoolctl import threadpool_limits

from . import model as fm
from .baselines import PatchConfig, patch_reconstruction, patch_tokens, uds_reconstruction, uds_tokens
from .data import RunConfig, aggregate, chronological_split, load_config, load_csv, split_windows
from .metrics import bca_ci, forecast_metrics, l2_second_diff, permutation_entropy, total_variation, write_records
from .tokenize import (
    TokenizerConfig,
    fit_window,
    fits_performed,
    tokenize_dataset,
    tune_clip_factor_curve,
)

PAPER_BUDGETS = (45, 90, 180)


def _build_config(args) -> RunConfig:
    config = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    for name in ("budget", "lookback", "mode", "seed", "target", "tokenizer", "horizon"):
        value = getattr(args, name, None)
        if value is not None:
            overrides["target_column" if name == "target" else name] = value
    if getattr(args, "data", None):
        overrides["data_path"] = args.data
    if overrides:
        config = replace(config, **overrides)
    return config


def _tokenizer_config(config: RunConfig) -> TokenizerConfig:
    return TokenizerConfig(
        lookback=config.lookback,
        budget=config.budget,
        degree=config.degree,
        clip_factor=config.clip_factor,
        coeff_cap=config.coeff_cap,
        ridge_threshold=config.ridge_threshold,
        ridge_scale=config.ridge_scale,
    )


def _model_config(config: RunConfig) -> fm.ModelConfig:
    return fm.ModelConfig(
        layers=config.layers, d_model=config.d_model, heads=config.heads,
        ff_factor=config.ff_factor, dropout=config.dropout,
        fc_dropout=config.fc_dropout, attn_dropout=config.attn_dropout,
        learning_rate=config.learning_rate, weight_decay=config.weight_decay,
        seed=config.seed, horizon=config.horizon, mode=config.mode,
        batch_size=config.batch_size, max_epochs=config.max_epochs,
    )


def _load_dataset(config: RunConfig):
    if not config.data_path:
        raise ValueError("no dataset given: pass a CSV path or set data_path in the config")
    if not config.target_column:
        raise ValueError("no target column given: pass --target or set target_column")
    series = load_csv(config.data_path, config.target_column)
    if config.aggregate_factor > 1:
        series = aggregate(series, config.aggregate_factor)
    name = os.path.splitext(os.path.basename(config.data_path))[0]
    return chronological_split(series, name=name)


def _cache_path(config: RunConfig, split: str, suffix: str = "") -> str:
    os.makedirs(config.cache_dir, exist_ok=True)
    name = os.path.splitext(os.path.basename(config.data_path))[0]
    tag = (
        f"{name}_{split}_L{config.lookback}_n{config.budget}"
        f"_p{config.degree}_g{config.clip_factor}{suffix}"
    )
    return os.path.join(config.cache_dir, f"{tag}.tok")


def _tokenize_windows(config: RunConfig, windows: np.ndarray) -> fm.TokenBatch:
    if config.tokenizer == "bsat":
        tok = _tokenizer_config(config)
        with threadpool_limits(limits=1):
            seqs = [fit_window(w, tok) for w in windows]
        return fm.batch_from_sequences(seqs, config.lookback)
    if config.tokenizer == "uds":
        return fm.batch_from_uds(windows, config.budget)
    return fm.batch_from_patches(
        windows, PatchConfig(lookback=config.lookback, budget=config.budget)
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_tokenize(args) -> int:
    config = _build_config(args)
    dataset = _load_dataset(config)
    tok = _tokenizer_config(config)
    for split in ("train", "val", "test"):
        values = dataset.split(split)
        if values.size < config.lookback:
            print(f"{split}: split shorter than lookback, skipped")
            continue
        sequences = tokenize_dataset(
            values, tok, config.window_stride, cache_path=_cache_path(config, split)
        )
        fits = fits_performed(sequences)
        if fits == 0:
            print(f"{split}: cache hit, 0 fits ({len(sequences)} windows)")
            continue
        diags = [s.diagnostics for s in sequences if s.diagnostics is not None]
        ridge = sum(d.used_ridge for d in diags)
        clipped = sum(d.clipped_count for d in diags)
        median_rmse = float(np.median([d.fit_rmse for d in diags]))
        print(
            f"{split}: {len(sequences)} windows, {fits} fits, "
            f"ridge fallbacks {ridge}, clipped coefficients {clipped}, "
            f"median fit rmse {median_rmse:.6f}"
        )
    return 0


def cmd_tune_clip(args) -> int:
    config = _build_config(args)
    dataset = _load_dataset(config)
    train_values = dataset.split("train")
    g_star, curve = tune_clip_factor_curve(
        train_values, config.lookback, config.budget, stride=args.stride
    )
    print("g\tmax_window_rmse")
    for g, rmse in curve:
        print(f"{g:.2f}\t{rmse:.6f}")
    print(f"g_star={g_star:.2f}")
    return 0


def cmd_train(args) -> int:
    config = _build_config(args)
    dataset = _load_dataset(config)
    os.makedirs(config.output_dir, exist_ok=True)

    batches, targets = {}, {}
    for split in ("train", "val"):
        values = dataset.split(split)
        pairs = split_windows(values, config.lookback, config.horizon, config.window_stride)
        targets[split] = np.stack([p[2] for p in pairs])
        if config.tokenizer == "bsat":
            # Trimming the horizon off the tail makes tokenize_dataset emit
            # exactly the training window starts, so the cache is shared.
            sequences = tokenize_dataset(
                values[: values.size - config.horizon],
                _tokenizer_config(config),
                config.window_stride,
                cache_path=_cache_path(config, split, suffix=f"_H{config.horizon}"),
            )
            batches[split] = fm.batch_from_sequences(sequences, config.lookback)
            print(
                f"{split}: {len(pairs)} windows, {fits_performed(sequences)} fits "
                f"({config.tokenizer})"
            )
        else:
            wins = np.stack([p[1] for p in pairs])
            batches[split] = _tokenize_windows(config, wins)
            print(f"{split}: {len(pairs)} windows tokenized ({config.tokenizer})")

    model = fm.ForecastModel(
        _model_config(config),
        n_tokens=batches["train"].n_tokens,
        in_channels=batches["train"].in_channels,
    )
    rng = np.random.default_rng(config.seed)
    optimizer = fm.AdamW(model.params, weight_decay=config.weight_decay)
    result = fm.train(
        model, batches["train"], targets["train"], batches["val"], targets["val"],
        optimizer=optimizer, train_mean=dataset.train_mean, train_std=dataset.train_std,
        rng=rng,
        log=lambda r: print(
            f"epoch {r['epoch']:3d} lr {r['lr']:.2e} "
            f"train_loss {r['train_loss']:.6f} val_rmse {r['val_rmse']:.6f} "
            f"base_spread {r['base_spread']:.3f}"
        ),
    )

    ckpt = os.path.join(config.output_dir, "model.ckpt")
    fm.save_checkpoint(
        ckpt, model, optimizer=optimizer, rng=rng,
        norm_stats={"mean": dataset.train_mean, "std": dataset.train_std},
        extra={"run_config": {f.name: getattr(config, f.name) for f in fields(RunConfig)}},
    )
    history = {}
    for r in result.history:
        for key in ("lr", "train_loss", "val_rmse", "base_spread"):
            history[f"epoch{r['epoch']:03d}.{key}"] = float(r[key])
    history["best_epoch"] = result.best_epoch
    history["best_val_rmse"] = float(result.best_val_rmse)
    write_records(os.path.join(config.output_dir, "history.txt"), history)
    print(f"best epoch {result.best_epoch} val_rmse {result.best_val_rmse:.6f}")
    print(f"checkpoint written to {ckpt}")
    return 0


def cmd_evaluate(args) -> int:
    config = _build_config(args)
    model, _, _, norm_stats, extra = fm.load_checkpoint(args.checkpoint)
    if extra and "run_config" in extra and args.config is None:
        # No explicit config: evaluate with the settings the model was trained
        # under, keeping any dataset/target given on the command line.
        stored = dict(extra["run_config"])
        if args.data:
            stored["data_path"] = args.data
        if args.target:
            stored["target_column"] = args.target
        config = RunConfig(**stored)
    dataset = _load_dataset(config)
    os.makedirs(config.output_dir, exist_ok=True)

    pairs = split_windows(
        dataset.split("test"), config.lookback, model.config.horizon, config.window_stride
    )
    wins = np.stack([p[1] for p in pairs])
    true_norm = np.stack([p[2] for p in pairs])
    batch = _tokenize_windows(config, wins)
    pred = fm.predict(
        model, batch, train_mean=norm_stats["mean"], train_std=norm_stats["std"]
    )
    true = dataset.denormalize(true_norm)

    report = forecast_metrics(pred, true)
    records: dict = {
        "rmse": report.rmse, "mae": report.mae, "mse": report.mse,
        "smape": report.smape, "count": report.count,
    }
    per_window = {
        "rmse": np.sqrt(np.mean((pred - true) ** 2, axis=1)),
        "mae": np.mean(np.abs(pred - true), axis=1),
        "mse": np.mean((pred - true) ** 2, axis=1),
    }
    for name, samples in per_window.items():
        ci = bca_ci(samples, np.mean, resamples=args.resamples, seed=config.seed)
        records[f"{name}.ci_lower"] = ci.lower
        records[f"{name}.ci_upper"] = ci.upper
        print(f"{name}: mean {ci.estimate:.6f}  95% BCa [{ci.lower:.6f}, {ci.upper:.6f}]")
    print(f"smape: {report.smape:.6f}")
    write_records(os.path.join(config.output_dir, "metrics.txt"), records)
    return 0


def cmd_analyze(args) -> int:
    config = _build_config(args)
    series = load_csv(config.data_path, config.target_column)
    if config.aggregate_factor > 1:
        series = aggregate(series, config.aggregate_factor)
    tv = total_variation(series)
    l2 = l2_second_diff(series)
    pe = permutation_entropy(series, order=args.order, delay=args.delay)
    print(f"samples={series.size}")
    print(f"total_variation={tv:.6f}")
    print(f"l2_second_diff={l2:.6f}")
    print(f"permutation_entropy={pe:.6f}")
    if args.out:
        write_records(args.out, {
            "samples": series.size, "total_variation": tv,
            "l2_second_diff": l2, "permutation_entropy": pe,
        })
    return 0


def cmd_compare(args) -> int:
    config = _build_config(args)
    dataset = _load_dataset(config)
    values = dataset.split("train")
    if values.size < config.lookback:
        raise ValueError("train split shorter than the lookback window")
    stride = max(config.window_stride, args.stride)
    starts = range(0, values.size - config.lookback + 1, stride)
    windows = np.stack([values[s : s + config.lookback] for s in starts])

    tok = _tokenizer_config(config)
    patch_cfg = PatchConfig(lookback=config.lookback, budget=config.budget)
    rows: dict[str, list[float]] = {"bsat": [], "uds": [], "patch": []}
    with threadpool_limits(limits=1):
        for w in windows:
            seq = fit_window(w, tok)
            rows["bsat"].append(seq.diagnostics.fit_rmse)
            recon = uds_reconstruction(uds_tokens(w, config.budget), config.lookback)
            rows["uds"].append(float(np.sqrt(np.mean((recon - w) ** 2))))
            precon = patch_reconstruction(patch_tokens(w, patch_cfg), patch_cfg)
            rows["patch"].append(float(np.sqrt(np.mean((precon - w) ** 2))))

    print(f"reconstruction RMSE over {windows.shape[0]} windows at budget {config.budget}")
    print("tokenizer\tmedian\tmean\tmax")
    records: dict = {"windows": windows.shape[0], "budget": config.budget}
    for name in ("bsat", "uds", "patch"):
        arr = np.asarray(rows[name])
        print(f"{name}\t{np.median(arr):.6f}\t{arr.mean():.6f}\t{arr.max():.6f}")
        records[f"{name}.median"] = float(np.median(arr))
        records[f"{name}.mean"] = float(arr.mean())
        records[f"{name}.max"] = float(arr.max())
    if args.out:
        write_records(args.out, records)
    return 0


def cmd_plot(args) -> int:
    from .viz import render_decomposition

    config = _build_config(args)
    dataset = _load_dataset(config)
    values = dataset.split("train")
    start = args.window_start
    if start + config.lookback > values.size:
        raise ValueError("window start beyond the train split")
    window = values[start : start + config.lookback]
    render_decomposition(window, _tokenizer_config(config), args.out)
    print(f"figure written to {args.out}")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return run_selftest()


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bsat",
        description="Adaptive B-spline tokenization and transformer forecasting",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_data=True):
        if with_data:
            p.add_argument("data", nargs="?", default=None, help="CSV dataset path")
            p.add_argument("--target", default=None, help="target column name")
        p.add_argument("--budget", type=int, choices=PAPER_BUDGETS, default=None,
                       help="token budget (use a config file for other values)")
        p.add_argument("--lookback", type=int, default=None)
        p.add_argument("--mode", default=None,
                       choices=["lpe", "f-rope", "l-rope", "f-rope-lpe", "l-rope-lpe"])
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None, help="flat key = value config file")

    p = sub.add_parser("tokenize", help="tokenize a dataset into the window cache")
    add_common(p)
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("tune-clip", help="grid-search the mass clip factor")
    add_common(p)
    p.add_argument("--stride", type=int, default=100)
    p.set_defaults(func=cmd_tune_clip)

    p = sub.add_parser("train", help="train the forecaster")
    add_common(p)
    p.add_argument("--tokenizer", default=None, choices=["bsat", "uds", "patch"])
    p.add_argument("--horizon", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on the test split")
    add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--resamples", type=int, default=10000)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="series complexity statistics")
    add_common(p)
    p.add_argument("--order", type=int, default=3, help="permutation pattern length")
    p.add_argument("--delay", type=int, default=1)
    p.add_argument("--out", default=None, help="write a records file")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="reconstruction error of all tokenizers")
    add_common(p)
    p.add_argument("--stride", type=int, default=100)
    p.add_argument("--out", default=None, help="write a machine-readable records file")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", help="render the tokenization decomposition figure")
    add_common(p)
    p.add_argument("--out", default="decomposition.svg")
    p.add_argument("--window-start", type=int, default=0)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("selftest", help="run the built-in property checks")
    add_common(p, with_data=False)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # single-line failure contract
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
