"""Uniform-downsampling and patch tokenizers at matched budgets."""

import numpy as np
import pytest

from bsat.baselines import (
    PatchConfig,
    patch_positions,
    patch_reconstruction,
    patch_tokens,
    uds_positions,
    uds_reconstruction,
    uds_tokens,
)


class TestUds:
    def test_paper_budget_stride(self):
        y = np.arange(720.0)
        tokens = uds_tokens(y, 45)
        assert tokens.size == 45
        assert np.array_equal(tokens, np.arange(0.0, 720.0, 16.0))

    def test_identity_budget(self):
        y = np.arange(64.0)
        assert np.array_equal(uds_tokens(y, 64), y)

    def test_subsequence_property(self):
        rng = np.random.default_rng(0)
        y = rng.normal(size=720)
        tokens = uds_tokens(y, 90)
        assert np.array_equal(tokens, y[::8])

    def test_positions(self):
        assert np.array_equal(uds_positions(720, 45), np.arange(45) * 16.0)

    def test_non_divisible(self):
        with pytest.raises(ValueError, match="divisible"):
            uds_tokens(np.ones(100), 45)

    def test_reconstruction_holds_edges(self):
        y = np.linspace(0.0, 10.0, 720)
        recon = uds_reconstruction(uds_tokens(y, 45), 720)
        # linear signal is reproduced exactly at and between anchors
        assert np.abs(recon[:705] - y[:705]).max() < 1e-12
        # beyond the last anchor the interpolation holds the last token value
        assert np.all(recon[704:] == y[704])


class TestPatch:
    def test_enumeration_oracle_720_45(self):
        # (720 - 32) / 16 + 1 = 44 full patches; one padded patch completes 45.
        config = PatchConfig(lookback=720, budget=45)
        assert config.stride == 16
        assert config.patch_len == 32
        y = np.arange(720.0)
        patches = patch_tokens(y, config)
        assert patches.shape == (45, 32)
        for i in range(44):
            assert np.array_equal(patches[i], y[i * 16 : i * 16 + 32])
        last = patches[44]
        assert np.array_equal(last[:16], y[704:])
        assert np.all(last[16:] == 719.0)

    def test_constant_signal(self):
        config = PatchConfig(lookback=64, budget=8)
        patches = patch_tokens(np.full(64, 3.3), config)
        assert np.all(patches == 3.3)

    def test_positions(self):
        config = PatchConfig(lookback=720, budget=45)
        assert np.array_equal(patch_positions(config), np.arange(45) * 16.0)

    def test_rows_are_contiguous_slices(self):
        rng = np.random.default_rng(1)
        y = rng.normal(size=240)
        config = PatchConfig(lookback=240, budget=30)
        padded = np.concatenate([y, np.full(config.patch_len - config.stride, y[-1])])
        patches = patch_tokens(y, config)
        for i in range(30):
            start = i * config.stride
            assert np.array_equal(patches[i], padded[start : start + config.patch_len])

    def test_invalid_budget(self):
        with pytest.raises(ValueError, match="divisible"):
            PatchConfig(lookback=720, budget=43)

    def test_patch_longer_than_window(self):
        with pytest.raises(ValueError, match="patch length"):
            PatchConfig(lookback=4, budget=1)

    def test_wrong_window_length(self):
        config = PatchConfig(lookback=720, budget=45)
        with pytest.raises(ValueError, match="720"):
            patch_tokens(np.ones(719), config)

    def test_reconstruction_near_lossless(self):
        rng = np.random.default_rng(2)
        y = rng.normal(size=240)
        config = PatchConfig(lookback=240, budget=30)
        recon = patch_reconstruction(patch_tokens(y, config), config)
        assert np.abs(recon - y).max() < 1e-12


def test_budget_parity_across_tokenizers():
    rng = np.random.default_rng(3)
    y = rng.normal(size=720)
    for budget in (45, 90, 180):
        assert uds_tokens(y, budget).shape[0] == budget
        assert patch_tokens(y, PatchConfig(lookback=720, budget=budget)).shape[0] == budget
