"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Criterion 11 needs the public datasets on disk (``$BSAT_DATA_DIR`` or
``./data``) and skips cleanly when they are absent.
"""

import os
import time

import numpy as np
import pytest
from scipy import stats as sps

import bsat
from bsat import model as fm
from bsat.baselines import uds_reconstruction, uds_tokens
from bsat.cli import main as cli_main
from bsat.data import RunConfig, chronological_split, config_text, load_csv, split_windows
from bsat.knots import place_knots
from bsat.metrics import bca_ci, l2_second_diff, percentile_ci, total_variation
from bsat.posenc import apply_rotary, rope_frequencies
from bsat.splines import basis_matrix
from bsat.tokenize import (
    TokenizerConfig,
    fit_window,
    fits_performed,
    shared_grid,
    tokenize_dataset,
    tune_clip_factor,
)

DATA_DIR = os.environ.get("BSAT_DATA_DIR", "data")


def report(number: int, name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    line = f"ACCEPTANCE {number:2d} {status} {name}"
    if detail:
        line += f" [{detail}]"
    print(line)
    assert ok, line


def random_clamped(rng, p: int, n: int):
    interior = np.sort(rng.uniform(0.02, 0.98, size=n - p - 1))
    interior = np.cumsum(np.diff(np.concatenate([[0.0], interior])) + 1e-3)
    interior = interior / (interior[-1] + 0.02)
    tau = np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)])
    return bsat.KnotVector(tau, p)


def band_limited(rng, length: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, length)
    out = np.zeros(length)
    for _ in range(4):
        out += rng.uniform(0.3, 1.0) * np.sin(
            2 * np.pi * (rng.uniform(1.0, 8.0) * t + rng.uniform())
        )
    return out


def test_criterion_1_partition_of_unity():
    start = time.time()
    rng = np.random.default_rng(100)
    worst = 0.0
    for _ in range(100):
        p = int(rng.integers(1, 7))
        n = p + 2 + int(rng.integers(1, 12))
        kv = random_clamped(rng, p, n)
        grid = rng.uniform(0.0, 1.0, size=1000)
        values = basis_matrix(grid, kv).values
        worst = max(worst, float(np.abs(values.sum(axis=1) - 1.0).max()))
        assert values.min() >= 0.0
    elapsed = time.time() - start
    report(1, "partition of unity", worst < 1e-10 and elapsed < 5.0,
           f"max dev {worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_polynomial_reproduction():
    start = time.time()
    rng = np.random.default_rng(200)
    worst = 0.0
    for p in (1, 2, 3, 4):
        config = TokenizerConfig(lookback=720, budget=45, degree=p, coeff_cap=1e9)
        x = np.linspace(-1.0, 1.0, 720)
        for _ in range(3):
            coef = rng.normal(size=p + 1)
            coef[0] = np.sign(coef[0] or 1.0) * rng.uniform(0.5, 2.0)
            y = np.polyval(coef, x)
            seq = fit_window(y, config)
            grid = shared_grid(720)
            knots = place_knots(grid, y, p, 45, config.clip_factor)
            recon = basis_matrix(grid, knots).values @ seq.coeffs
            worst = max(worst, float(np.abs(recon - y).max()))
    elapsed = time.time() - start
    report(2, "polynomial reproduction", worst < 1e-8 and elapsed < 5.0,
           f"max residual {worst:.2e}, {elapsed:.1f}s")


def test_criterion_3_knot_adaptivity():
    start = time.time()
    length = 100
    t = np.linspace(0.0, 1.0, length)
    y = np.zeros(length)
    mask = t >= 0.5
    s = t[mask] - 0.5
    f0, beta = 4.0, 40.0
    y[mask] = np.sin(2 * np.pi * (f0 * s + 0.5 * beta * s**2))

    kv = place_knots(t, y, 2, 12, 1.0)
    interior = kv.tau[3:-3]
    fraction = float(np.mean(interior > 0.5))

    # analytic-integration oracle: exact second derivative of the chirp,
    # integrated and inverted on a 1000x finer grid
    tt = np.linspace(0.0, 1.0, 100001)
    ss = np.clip(tt - 0.5, 0.0, None)
    phase = 2 * np.pi * (f0 * ss + 0.5 * beta * ss**2)
    rate = 2 * np.pi * (f0 + beta * ss)
    d2 = np.where(tt >= 0.5, -(rate**2) * np.sin(phase) + 2 * np.pi * beta * np.cos(phase), 0.0)
    feat = (np.abs(d2) + 1e-6 * np.mean(np.abs(d2))) ** 0.5
    masses = 0.5 * (feat[1:] + feat[:-1]) * np.diff(tt)
    k_int = 9
    clipped = np.minimum(masses, masses.sum() / k_int)
    cdf = np.concatenate([[0.0], np.cumsum(clipped)])
    cdf /= cdf[-1]
    mid = np.concatenate([[tt[0]], 0.5 * (tt[:-1] + tt[1:])])
    oracle = np.interp(np.linspace(0, 1, k_int + 2)[1:-1], cdf, mid)
    oracle_fraction = float(np.mean(oracle > 0.5))

    elapsed = time.time() - start
    ok = fraction >= 0.7 and oracle_fraction >= 0.7 and elapsed < 1.0
    report(3, "knot adaptivity on flat+chirp", ok,
           f"{fraction:.0%} in chirp half (oracle {oracle_fraction:.0%}), {elapsed:.2f}s")


def test_criterion_4_ridge_fallback():
    config = TokenizerConfig(lookback=720, budget=64, degree=3, clip_factor=1e6,
                             coeff_cap=10.0)
    y = np.zeros(720)
    y[0] = 1e6
    seq = fit_window(y, config)
    diag = seq.diagnostics

    grid = shared_grid(720)
    knots = place_knots(grid, y, 3, 64, config.clip_factor)
    basis = basis_matrix(grid, knots).values
    lam_expected = 1e-6 * np.trace(basis.T @ basis) / 64

    ok = (
        diag.condition_number > 1e8
        and diag.used_ridge
        and np.all(np.isfinite(seq.coeffs))
        and np.abs(seq.coeffs).max() <= 10.0
        and diag.ridge_lambda == pytest.approx(lam_expected, rel=1e-12)
    )
    report(4, "ridge fallback", ok,
           f"kappa {diag.condition_number:.2e}, lambda {diag.ridge_lambda:.3e}")


def test_criterion_5_rope_identities():
    rng = np.random.default_rng(500)
    freqs = rope_frequencies(16, 10000.0)
    worst_norm, worst_rel = 0.0, 0.0
    for _ in range(100):
        q, k = rng.normal(size=16), rng.normal(size=16)
        a, b = rng.uniform(0.0, 719.0, size=2)  # real, non-integer positions
        qa = apply_rotary(q, a, freqs)
        kb = apply_rotary(k, b, freqs)
        worst_norm = max(worst_norm, abs(np.linalg.norm(qa) - np.linalg.norm(q)))
        lhs = qa @ kb
        rhs = apply_rotary(q, a - b, freqs) @ k
        worst_rel = max(worst_rel, abs(lhs - rhs))
    ok = worst_norm < 1e-12 and worst_rel < 1e-10
    report(5, "rotary identities", ok,
           f"norm dev {worst_norm:.1e}, shift dev {worst_rel:.1e}")


def test_criterion_6_gradient_correctness():
    start = time.time()
    rng = np.random.default_rng(600)
    values = rng.normal(size=(4, 8, 1))
    centers = np.sort(rng.uniform(0, 63, size=(4, 8)), axis=1)
    batch = fm.TokenBatch(values=values, centers=centers, lookback=64)
    targets = rng.normal(size=(4, 4))

    worst = 0.0
    phi_ok = True
    for mode in ("l-rope-lpe", "l-rope", "f-rope-lpe", "f-rope", "lpe"):
        config = fm.ModelConfig(layers=2, d_model=16, heads=4, ff_factor=2,
                                seed=600, horizon=4, mode=mode)
        model = fm.ForecastModel(config, n_tokens=8, in_channels=2, dtype=np.float64)
        rep = fm.grad_check(model, batch, targets, samples_per_param=3)
        worst = max(worst, rep["max_rel_error"])
        phi_grads = [model.params[f"layers.{l}.phi"].grad for l in range(2)]
        if mode.startswith("l-rope"):
            phi_ok &= all(g is not None and abs(float(g)) > 0 for g in phi_grads)
        else:
            phi_ok &= all(g is None for g in phi_grads)
    elapsed = time.time() - start
    ok = worst < 1e-4 and phi_ok and elapsed < 30.0
    report(6, "gradient correctness", ok,
           f"max rel err {worst:.2e}, phi flow ok {phi_ok}, {elapsed:.1f}s")


def test_criterion_7_reconstruction_dominance():
    start = time.time()
    rng = np.random.default_rng(700)
    config = TokenizerConfig(lookback=720, budget=45, degree=3)
    spline_rmse, uds_rmse = [], []
    for _ in range(200):
        y = band_limited(rng, 720)
        spline_rmse.append(fit_window(y, config).diagnostics.fit_rmse)
        recon = uds_reconstruction(uds_tokens(y, 45), 720)
        uds_rmse.append(float(np.sqrt(np.mean((recon - y) ** 2))))
    med_spline = float(np.median(spline_rmse))
    med_uds = float(np.median(uds_rmse))
    elapsed = time.time() - start

    detail = f"median {med_spline:.4f} vs uds {med_uds:.4f}, {elapsed:.0f}s"
    etth1 = os.path.join(DATA_DIR, "ETTh1.csv")
    if os.path.exists(etth1):
        ds = chronological_split(load_csv(etth1, "OT"))
        train = ds.split("train")
        sp, ud = [], []
        for lo in range(0, train.size - 720 + 1, 400):
            w = train[lo : lo + 720]
            sp.append(fit_window(w, config).diagnostics.fit_rmse)
            ud.append(float(np.sqrt(np.mean(
                (uds_reconstruction(uds_tokens(w, 45), 720) - w) ** 2
            ))))
        detail += f"; ETTh1 median {np.median(sp):.4f} vs {np.median(ud):.4f}"
        ok_real = np.median(sp) < np.median(ud)
    else:
        ok_real = True
        detail += "; ETTh1 not on disk (synthetic only)"
    ok = med_spline < med_uds and ok_real and elapsed < 60.0
    report(7, "reconstruction dominance at budget 45", ok, detail)


def test_criterion_8_end_to_end_desk_training():
    start = time.time()
    t = np.arange(10000, dtype=np.float64)
    rng = np.random.default_rng(800)
    series = (np.sin(2 * np.pi * t / 24) + 0.6 * np.sin(2 * np.pi * t / 96)
              + 0.05 * rng.normal(size=t.size))
    ds = chronological_split(series, name="twotone")
    lookback, horizon, budget = 720, 96, 45
    tok = TokenizerConfig(lookback=lookback, budget=budget, degree=3)

    batches, targets = {}, {}
    for split, stride in (("train", 7), ("val", 11), ("test", 11)):
        pairs = split_windows(ds.split(split), lookback, horizon, stride)
        wins = np.stack([p[1] for p in pairs])
        targets[split] = np.stack([p[2] for p in pairs])
        seqs = [fit_window(w, tok) for w in wins]
        batches[split] = fm.batch_from_sequences(seqs, lookback)

    config = fm.ModelConfig(layers=2, d_model=32, heads=4, ff_factor=2,
                            learning_rate=2e-3, weight_decay=1e-4, seed=2025,
                            horizon=horizon, mode="l-rope-lpe", batch_size=128,
                            max_epochs=25)
    model = fm.ForecastModel(config, n_tokens=budget, in_channels=2)
    fm.train(model, batches["train"], targets["train"], batches["val"],
             targets["val"], train_mean=ds.train_mean, train_std=ds.train_std)

    test_true = ds.denormalize(targets["test"])
    pred = fm.predict(model, batches["test"], ds.train_mean, ds.train_std)
    rmse = float(np.sqrt(np.mean((pred - test_true) ** 2)))
    test_pairs = split_windows(ds.split("test"), lookback, horizon, 11)
    last_values = np.stack([p[1][-1] for p in test_pairs])
    naive = ds.denormalize(np.repeat(last_values[:, None], horizon, axis=1))
    naive_rmse = float(np.sqrt(np.mean((naive - test_true) ** 2)))
    improvement = 1.0 - rmse / naive_rmse
    spread = bsat.base_spread(model.phis())
    elapsed = time.time() - start

    ok = improvement >= 0.20 and spread > 0.0 and elapsed < 300.0
    report(8, "end-to-end desk training", ok,
           f"rmse {rmse:.4f} vs naive {naive_rmse:.4f} ({improvement:.0%} better), "
           f"base spread {spread:.1f}, {elapsed:.0f}s")


def test_criterion_9_bca_bootstrap():
    rng = np.random.default_rng(900)
    symmetric = rng.normal(size=200)
    bca = bca_ci(symmetric, np.mean, resamples=10000, seed=9)
    lo, hi = percentile_ci(symmetric, np.mean, resamples=10000, seed=9)
    width_ratio = abs((bca.upper - bca.lower) - (hi - lo)) / (hi - lo)

    skewed = rng.exponential(size=300)
    bca_skew = bca_ci(skewed, np.mean, resamples=10000, seed=10)
    sign_match = np.sign(bca_skew.bias) == np.sign(sps.skew(skewed))

    ok = width_ratio < 0.05 and bool(sign_match)
    report(9, "BCa bootstrap", ok,
           f"width gap {width_ratio:.1%}, z0 {bca_skew.bias:+.3f} matches skew {sign_match}")


def test_criterion_10_cache_and_determinism(tmp_path, capsys):
    rng = np.random.default_rng(1000)
    series = band_limited(rng, 1500)
    config = TokenizerConfig(lookback=240, budget=24, degree=2)
    path_a, path_b = tmp_path / "a.tok", tmp_path / "b.tok"
    first = tokenize_dataset(series, config, 120, cache_path=path_a)
    warm = tokenize_dataset(series, config, 120, cache_path=path_a)
    tokenize_dataset(series, config, 120, cache_path=path_b)
    cache_ok = (
        fits_performed(first) == len(first)
        and fits_performed(warm) == 0
        and path_a.read_bytes() == path_b.read_bytes()
    )

    # full pipeline determinism: train + evaluate twice, byte-compare outputs
    csv = tmp_path / "series.csv"
    with open(csv, "w") as fh:
        fh.write("date,OT\n")
        for i, v in enumerate(band_limited(rng, 2200)):
            fh.write(f"t{i},{float(v)!r}\n")
    digests = []
    for run in ("r1", "r2"):
        run_config = RunConfig(
            data_path=str(csv), target_column="OT", tokenizer="bsat",
            lookback=96, budget=16, degree=2, horizon=8, layers=1, d_model=16,
            heads=4, max_epochs=2, window_stride=8, seed=2025,
            cache_dir=str(tmp_path / run / "cache"),
            output_dir=str(tmp_path / run / "out"),
        )
        cfg_path = tmp_path / f"{run}.cfg"
        cfg_path.write_text(config_text(run_config))
        assert cli_main(["train", "--config", str(cfg_path)]) == 0
        assert cli_main([
            "evaluate", "--config", str(cfg_path),
            "--checkpoint", str(tmp_path / run / "out" / "model.ckpt"),
            "--resamples", "500",
        ]) == 0
        digests.append((
            (tmp_path / run / "out" / "metrics.txt").read_bytes(),
            (tmp_path / run / "out" / "history.txt").read_bytes(),
        ))
    capsys.readouterr()
    pipeline_ok = digests[0] == digests[1]
    report(10, "cache and determinism", cache_ok and pipeline_ok,
           f"cache ok {cache_ok}, pipeline byte-identical {pipeline_ok}")


@pytest.mark.skipif(
    not os.path.exists(os.path.join(DATA_DIR, "ETTh1.csv")),
    reason="public datasets not on disk",
)
def test_criterion_11_dataset_gated(capsys):
    etth1 = load_csv(os.path.join(DATA_DIR, "ETTh1.csv"), "OT")
    ds = chronological_split(etth1)
    sizes_ok = ds.split_sizes() == (10452, 3484, 3484)

    tv = total_variation(etth1)
    l2 = l2_second_diff(etth1)
    tv_ok = abs(tv - 10699) / 10699 < 0.01
    l2_ok = abs(l2 - 172) / 172 < 0.01

    raw_train = etth1[: ds.train_end]
    g_star = tune_clip_factor(raw_train, 720, 45, stride=2000)
    print(f"ETTh1 tuned clip factor {g_star:.2f} (reference point: 0.62)")

    ok = sizes_ok and tv_ok and l2_ok
    report(11, "dataset-gated statistics (ETTh1)", ok,
           f"splits {ds.split_sizes()}, TV {tv:.0f}, L2 {l2:.0f}, g* {g_star:.2f}")
