"""Adaptive B-spline tokenization (BSAT) and transformer forecasting.

A lookback window is fitted by a B-spline whose knots concentrate where the
signal bends; each basis function becomes one fixed-size token (coefficient,
support center). A small encoder-only transformer with hybrid
additive/rotary positional encodings forecasts from the token sequence.
"""

from .baselines import PatchConfig, patch_tokens, uds_tokens
from .estimators import BsatTokenizer, PatchTokenizer, SplineForecaster, UniformDownsampler
from .knots import MassProfile, clip_masses, feature_function, interval_masses, place_knots
from .metrics import (
    BcaInterval,
    MetricReport,
    bca_ci,
    forecast_metrics,
    l2_second_diff,
    permutation_entropy,
    total_variation,
)
from .model import ForecastModel, ModelConfig, RevinState, grad_check, normalize_centers, revin_forward, revin_inverse
from .posenc import PosEncState, RotaryFrequencies, apply_rotary, base_spread, layer_base, lpe_add, rope_frequencies
from .splines import BasisMatrix, KnotVector, basis_matrix, basis_value, eval_curve, support_interval
from .tokenize import (
    FitDiagnostics,
    TokenizerConfig,
    TokenSequence,
    condition_number,
    fit_window,
    tokenize_dataset,
    tune_clip_factor,
)

__version__ = "0.1.0"

__all__ = [
    "BasisMatrix",
    "BcaInterval",
    "BsatTokenizer",
    "FitDiagnostics",
    "ForecastModel",
    "KnotVector",
    "MassProfile",
    "MetricReport",
    "ModelConfig",
    "PatchConfig",
    "PatchTokenizer",
    "PosEncState",
    "RevinState",
    "RotaryFrequencies",
    "SplineForecaster",
    "TokenSequence",
    "TokenizerConfig",
    "UniformDownsampler",
    "apply_rotary",
    "base_spread",
    "basis_matrix",
    "basis_value",
    "bca_ci",
    "clip_masses",
    "condition_number",
    "eval_curve",
    "feature_function",
    "fit_window",
    "forecast_metrics",
    "grad_check",
    "interval_masses",
    "l2_second_diff",
    "layer_base",
    "lpe_add",
    "normalize_centers",
    "patch_tokens",
    "permutation_entropy",
    "place_knots",
    "revin_forward",
    "revin_inverse",
    "rope_frequencies",
    "support_interval",
    "tokenize_dataset",
    "total_variation",
    "tune_clip_factor",
    "uds_tokens",
]
