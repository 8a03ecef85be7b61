"""Scikit-learn style wrappers around the tokenizers and the forecaster.

The transformers map ``(m, lookback)`` window matrices to flat token
matrices so they compose with ordinary sklearn pipelines; rich per-window
output stays available through the functional API (:mod:`bsat.tokenize`).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from threadpoolctl import threadpool_limits

from . import model as fm
from .baselines import PatchConfig, patch_tokens, uds_tokens
from .data import chronological_split, split_windows
from .tokenize import TokenizerConfig, fit_window, tune_clip_factor
from .validation import as_series, as_windows


class BsatTokenizer(TransformerMixin, BaseEstimator):
    """Adaptive B-spline tokenizer.

    ``fit`` tunes the clip factor on a training series when
    ``clip_factor="auto"``; otherwise it only freezes the configuration.
    ``transform`` maps ``(m, lookback)`` windows to ``(m, 2*budget)``
    matrices laid out as ``[coefficients | centers]``.
    """

    def __init__(self, lookback=720, budget=45, degree=3, clip_factor=1.0,
                 coeff_cap=10.0, ridge_threshold=1e8, ridge_scale=1e-6,
                 tune_stride=100):
        self.lookback = lookback
        self.budget = budget
        self.degree = degree
        self.clip_factor = clip_factor
        self.coeff_cap = coeff_cap
        self.ridge_threshold = ridge_threshold
        self.ridge_scale = ridge_scale
        self.tune_stride = tune_stride

    def fit(self, X, y=None):
        if self.clip_factor == "auto":
            series = as_series(X)
            self.clip_factor_ = tune_clip_factor(
                series, self.lookback, self.budget, stride=self.tune_stride
            )
        else:
            self.clip_factor_ = float(self.clip_factor)
        self.config_ = TokenizerConfig(
            lookback=self.lookback,
            budget=self.budget,
            degree=self.degree,
            clip_factor=self.clip_factor_,
            coeff_cap=self.coeff_cap,
            ridge_threshold=self.ridge_threshold,
            ridge_scale=self.ridge_scale,
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "config_"):
            raise NotFittedError("call fit() before transform()")

    def transform(self, X):
        self._check_fitted()
        windows = as_windows(X, self.lookback)
        out = np.empty((windows.shape[0], 2 * self.budget))
        with threadpool_limits(limits=1):
            for i, w in enumerate(windows):
                seq = fit_window(w, self.config_)
                out[i, : self.budget] = seq.coeffs
                out[i, self.budget :] = seq.centers
        return out

    def tokenize(self, window):
        """Full :class:`~bsat.tokenize.TokenSequence` for one window."""
        self._check_fitted()
        return fit_window(as_windows(window, self.lookback)[0], self.config_)


class UniformDownsampler(TransformerMixin, BaseEstimator):
    """Keep every ``lookback/budget``-th sample of each window."""

    def __init__(self, lookback=720, budget=45):
        self.lookback = lookback
        self.budget = budget

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        windows = as_windows(X, self.lookback)
        return np.stack([uds_tokens(w, self.budget) for w in windows])


class PatchTokenizer(TransformerMixin, BaseEstimator):
    """Overlapping fixed-length patches, flattened to ``(m, budget*patch_len)``."""

    def __init__(self, lookback=720, budget=45):
        self.lookback = lookback
        self.budget = budget

    def fit(self, X=None, y=None):
        self.config_ = PatchConfig(lookback=self.lookback, budget=self.budget)
        return self

    def transform(self, X):
        if not hasattr(self, "config_"):
            self.fit()
        windows = as_windows(X, self.lookback)
        return np.stack([patch_tokens(w, self.config_).ravel() for w in windows])


class SplineForecaster(BaseEstimator):
    """End-to-end estimator: tokenize a series, train the encoder, forecast.

    ``fit`` takes the raw (unnormalized) univariate series, splits it
    chronologically, tokenizes the train/val windows, and trains.
    ``predict`` maps ``(m, lookback)`` raw windows to ``(m, horizon)``
    forecasts in original units.
    """

    def __init__(self, tokenizer="bsat", lookback=720, budget=45, degree=3,
                 clip_factor=1.0, coeff_cap=10.0, mode="l-rope-lpe", layers=2,
                 d_model=32, heads=4, ff_factor=2, dropout=0.0, fc_dropout=0.0,
                 attn_dropout=0.0, learning_rate=1e-3, weight_decay=1e-4,
                 batch_size=128, max_epochs=100, horizon=96, seed=2025,
                 window_stride=1):
        self.tokenizer = tokenizer
        self.lookback = lookback
        self.budget = budget
        self.degree = degree
        self.clip_factor = clip_factor
        self.coeff_cap = coeff_cap
        self.mode = mode
        self.layers = layers
        self.d_model = d_model
        self.heads = heads
        self.ff_factor = ff_factor
        self.dropout = dropout
        self.fc_dropout = fc_dropout
        self.attn_dropout = attn_dropout
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.horizon = horizon
        self.seed = seed
        self.window_stride = window_stride

    def _model_config(self) -> fm.ModelConfig:
        return fm.ModelConfig(
            layers=self.layers, d_model=self.d_model, heads=self.heads,
            ff_factor=self.ff_factor, dropout=self.dropout,
            fc_dropout=self.fc_dropout, attn_dropout=self.attn_dropout,
            learning_rate=self.learning_rate, weight_decay=self.weight_decay,
            seed=self.seed, horizon=self.horizon, mode=self.mode,
            batch_size=self.batch_size, max_epochs=self.max_epochs,
        )

    def _tokenize_windows(self, windows: np.ndarray) -> fm.TokenBatch:
        if self.tokenizer == "bsat":
            with threadpool_limits(limits=1):
                seqs = [fit_window(w, self.tokenizer_config_) for w in windows]
            return fm.batch_from_sequences(seqs, self.lookback)
        if self.tokenizer == "uds":
            return fm.batch_from_uds(windows, self.budget)
        if self.tokenizer == "patch":
            return fm.batch_from_patches(windows, self.patch_config_)
        raise ValueError(f"unknown tokenizer {self.tokenizer!r}")

    def fit(self, X, y=None):
        series = as_series(X)
        self.dataset_ = chronological_split(series)
        if self.tokenizer == "bsat":
            self.tokenizer_config_ = TokenizerConfig(
                lookback=self.lookback, budget=self.budget, degree=self.degree,
                clip_factor=self.clip_factor, coeff_cap=self.coeff_cap,
            )
        elif self.tokenizer == "patch":
            self.patch_config_ = PatchConfig(lookback=self.lookback, budget=self.budget)

        batches, targets = {}, {}
        for split in ("train", "val"):
            pairs = split_windows(
                self.dataset_.split(split), self.lookback, self.horizon, self.window_stride
            )
            wins = np.stack([p[1] for p in pairs])
            targets[split] = np.stack([p[2] for p in pairs])
            batches[split] = self._tokenize_windows(wins)

        self.model_ = fm.ForecastModel(
            self._model_config(),
            n_tokens=batches["train"].n_tokens,
            in_channels=batches["train"].in_channels,
        )
        self.train_result_ = fm.train(
            self.model_,
            batches["train"], targets["train"],
            batches["val"], targets["val"],
            train_mean=self.dataset_.train_mean,
            train_std=self.dataset_.train_std,
        )
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit() before predict()")
        windows = as_windows(X, self.lookback)
        normalized = (windows - self.dataset_.train_mean) / self.dataset_.train_std
        batch = self._tokenize_windows(normalized)
        return fm.predict(
            self.model_, batch,
            train_mean=self.dataset_.train_mean,
            train_std=self.dataset_.train_std,
        )
