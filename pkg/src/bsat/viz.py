"""Static decomposition figure: signal, feature, CDF, knots, basis, tokens."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
# Content-hashed element ids instead of per-process random ones, so identical
# inputs produce byte-identical SVGs.
matplotlib.rcParams["svg.hashsalt"] = "bsat"

import matplotlib.pyplot as plt
import numpy as np

from .knots import mass_profile
from .splines import basis_matrix
from .tokenize import TokenizerConfig, fit_window, shared_grid, token_centers
from .knots import place_knots


def render_decomposition(y, config: TokenizerConfig, out_path) -> None:
    """Three stacked panels showing how one window becomes tokens (SVG)."""
    y = np.asarray(y, dtype=np.float64)
    grid = shared_grid(config.lookback)
    profile = mass_profile(grid, y, config.degree, config.budget, config.clip_factor)
    knots = place_knots(grid, y, config.degree, config.budget, config.clip_factor)
    seq = fit_window(y, config)
    basis = basis_matrix(grid, knots).values
    fitted = basis @ seq.coeffs
    samples = np.arange(config.lookback)
    knot_samples = knots.tau * (config.lookback - 1)
    interior = knot_samples[config.degree + 1 : -(config.degree + 1)]

    fig, axes = plt.subplots(3, 1, figsize=(8, 9), sharex=True)

    ax = axes[0]
    ax.plot(samples, y, color="black", lw=0.9, label="signal")
    twin = ax.twinx()
    twin.plot(samples, profile.feature, color="tab:red", lw=0.9, label="feature")
    twin.set_ylabel("feature", color="tab:red")
    ax.set_ylabel("value")
    ax.set_title("window and curvature feature")

    ax = axes[1]
    mid_samples = profile.midpoints * (config.lookback - 1)
    ax.plot(mid_samples, profile.cdf, color="tab:blue", lw=1.0)
    k_int = interior.size
    quantiles = np.linspace(0, 1, k_int + 2)[1:-1]
    ax.hlines(quantiles, 0, config.lookback - 1, colors="gray", lw=0.3)
    ax.plot(interior, np.zeros_like(interior), "v", color="tab:blue", ms=6, clip_on=False)
    ax.set_ylabel("cumulative mass")
    ax.set_title("mass CDF, equal-mass quantiles, knot positions")

    ax = axes[2]
    ax.plot(samples, y, color="black", lw=0.8, alpha=0.6, label="signal")
    ax.plot(samples, fitted, color="tab:green", lw=1.2, label="fitted spline")
    scale = max(np.abs(y).max(), 1e-12)
    for i in range(basis.shape[1]):
        ax.plot(samples, basis[:, i] * scale * 0.4, lw=0.5, alpha=0.5)
    centers = token_centers(knots, config.lookback)
    ax.plot(centers, seq.coeffs, "o", color="tab:orange", ms=4, label="tokens")
    ax.set_xlabel("sample")
    ax.set_ylabel("value")
    ax.set_title("basis functions and tokens")
    ax.legend(loc="upper right", fontsize=8)

    fig.tight_layout()
    # Omit the date so identical inputs give byte-identical SVGs.
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
