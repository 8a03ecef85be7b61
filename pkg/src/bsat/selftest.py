"""Built-in property checks behind the ``selftest`` CLI subcommand."""

from __future__ import annotations

import tempfile

import numpy as np

from . import autodiff as ad
from .knots import place_knots
from .model import revin_forward, revin_inverse
from .metrics import forecast_metrics
from .posenc import apply_rotary, rope_frequencies
from .splines import basis_matrix
from .tokenize import TokenizerConfig, fit_window, fits_performed, tokenize_dataset


def _check_partition_of_unity(rng) -> None:
    for _ in range(20):
        p = int(rng.integers(1, 6))
        n = int(rng.integers(p + 2, p + 12))
        y = rng.normal(size=n + p + 20).cumsum()
        grid = np.linspace(0.0, 1.0, y.size)
        knots = place_knots(grid, y, p, n, 1.0)
        pts = rng.uniform(0.0, 1.0, size=200)
        rows = basis_matrix(pts, knots).values
        assert np.max(np.abs(rows.sum(axis=1) - 1.0)) < 1e-10
        assert rows.min() >= 0.0


def _check_polynomial_reproduction(rng) -> None:
    for p in (1, 2, 3):
        config = TokenizerConfig(lookback=240, budget=24, degree=p, clip_factor=1.0,
                                 coeff_cap=1e9)
        x = np.linspace(-1, 1, 240)
        coeffs = rng.normal(size=p + 1)
        y = np.polyval(coeffs, x)
        seq = fit_window(y, config)
        assert seq.diagnostics.fit_rmse < 1e-8


def _check_rotary_identities(rng) -> None:
    freqs = rope_frequencies(8, 10000.0)
    for _ in range(50):
        q = rng.normal(size=8)
        k = rng.normal(size=8)
        a, b = rng.uniform(0, 500, size=2)
        qa, kb = apply_rotary(q, a, freqs), apply_rotary(k, b, freqs)
        assert abs(np.linalg.norm(qa) - np.linalg.norm(q)) < 1e-12
        relative = apply_rotary(q, a - b, freqs)
        assert abs(qa @ kb - relative @ k) < 1e-10


def _check_revin_roundtrip(rng) -> None:
    for _ in range(20):
        x = rng.normal(size=int(rng.integers(2, 40)))
        normalized, state = revin_forward(x)
        assert np.max(np.abs(revin_inverse(normalized, state) - x)) < 1e-10


def _check_metric_consistency(rng) -> None:
    pred, true = rng.normal(size=100), rng.normal(size=100)
    rep = forecast_metrics(pred, true)
    assert abs(rep.rmse**2 - rep.mse) <= 1e-9 * max(rep.mse, 1.0)
    assert rep.rmse >= rep.mae
    assert 0.0 <= rep.smape <= 200.0


def _check_cache_roundtrip(rng) -> None:
    series = np.sin(np.linspace(0, 20, 400)) + 0.1 * rng.normal(size=400)
    config = TokenizerConfig(lookback=120, budget=12, degree=2)
    with tempfile.TemporaryDirectory() as tmp:
        path = f"{tmp}/t.tok"
        first = tokenize_dataset(series, config, 40, cache_path=path)
        second = tokenize_dataset(series, config, 40, cache_path=path)
        assert fits_performed(second) == 0
        for a, b in zip(first, second):
            assert np.array_equal(a.coeffs, b.coeffs)
            assert np.array_equal(a.centers, b.centers)


def _check_gradient_engine(rng) -> None:
    w = ad.Tensor(rng.normal(size=(3, 3)), requires_grad=True)
    x = ad.Tensor(rng.normal(size=(4, 3)))
    loss = ad.gelu(ad.softmax(x @ w)).mean()
    loss.backward()
    eps = 1e-6
    idx = (1, 2)
    base = w.data[idx]
    w2 = lambda: float(ad.gelu(ad.softmax(x @ w)).mean().data)
    w.data[idx] = base + eps
    up = w2()
    w.data[idx] = base - eps
    down = w2()
    w.data[idx] = base
    fd = (up - down) / (2 * eps)
    assert abs(fd - w.grad[idx]) / max(abs(fd), 1e-8) < 1e-4


CHECKS = [
    ("partition of unity", _check_partition_of_unity),
    ("polynomial reproduction", _check_polynomial_reproduction),
    ("rotary identities", _check_rotary_identities),
    ("instance-normalization roundtrip", _check_revin_roundtrip),
    ("metric consistency", _check_metric_consistency),
    ("token cache roundtrip", _check_cache_roundtrip),
    ("gradient engine vs finite differences", _check_gradient_engine),
]


def run_selftest() -> int:
    rng = np.random.default_rng(12345)
    failures = 0
    for name, check in CHECKS:
        try:
            check(rng)
            print(f"PASS {name}")
        except AssertionError:
            failures += 1
            print(f"FAIL {name}")
    if failures:
        print(f"{failures} of {len(CHECKS)} checks failed")
        return 1
    print(f"all {len(CHECKS)} checks passed")
    return 0
