"""Checkpoint format: bit-exact round trips and validation."""

import struct

import numpy as np
import pytest

from pyrderain import AdamState, CheckpointError, ModelConfig, init_params, load_checkpoint, save_checkpoint
from pyrderain.checkpoint import MAGIC, count_checkpoint_parameters


class TestRoundTrip:
    def test_params_bitwise_equal(self, tmp_path):
        params = init_params(seed=12)
        path = tmp_path / "model.lpn"
        save_checkpoint(path, params)
        loaded, state = load_checkpoint(path)
        assert state is None
        assert loaded.config == params.config
        for (name_a, ta), (name_b, tb) in zip(params.named_tensors(), loaded.named_tensors()):
            assert name_a == name_b
            np.testing.assert_array_equal(ta.data, tb.data)

    def test_adam_state_round_trip(self, tmp_path):
        params = init_params(seed=3)
        state = AdamState.for_params(params)
        state.t = 41
        for name in state.m:
            state.m[name][...] = 0.25
            state.v[name][...] = 0.5
        path = tmp_path / "model.lpn"
        save_checkpoint(path, params, state)
        _, loaded_state = load_checkpoint(path)
        assert loaded_state.t == 41
        for name in state.m:
            np.testing.assert_array_equal(loaded_state.m[name], state.m[name])
            np.testing.assert_array_equal(loaded_state.v[name], state.v[name])

    def test_custom_architecture_round_trip(self, tmp_path):
        cfg = ModelConfig(levels=3, recursions=2, kernel_counts=(4, 2, 1), feature_kernel=1, output_kernel=3)
        params = init_params(cfg, seed=8)
        path = tmp_path / "model.lpn"
        save_checkpoint(path, params)
        loaded, _ = load_checkpoint(path)
        assert loaded.config == cfg

    def test_default_checkpoint_has_7548_parameter_scalars(self, tmp_path):
        path = tmp_path / "model.lpn"
        save_checkpoint(path, init_params(seed=0), AdamState.for_params(init_params(seed=0)))
        assert count_checkpoint_parameters(path) == 7548

    def test_float64_params_saved_as_float32(self, tmp_path):
        params = init_params(seed=5, precision="f64")
        path = tmp_path / "model.lpn"
        save_checkpoint(path, params)
        loaded, _ = load_checkpoint(path, precision="f64")
        assert loaded.dtype == np.float64
        for (_, ta), (_, tb) in zip(params.named_tensors(), loaded.named_tensors()):
            np.testing.assert_array_equal(ta.data.astype(np.float32), tb.data.astype(np.float32))


class TestValidation:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.lpn"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "bad.lpn"
        path.write_bytes(MAGIC + struct.pack("<I", 99) + struct.pack("<I", 0))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_truncation_returns_no_partial_params(self, tmp_path):
        params = init_params(seed=2)
        path = tmp_path / "model.lpn"
        save_checkpoint(path, params)
        blob = path.read_bytes()
        truncated = tmp_path / "cut.lpn"
        truncated.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(truncated)

    def test_trailing_garbage_rejected(self, tmp_path):
        params = init_params(seed=2)
        path = tmp_path / "model.lpn"
        save_checkpoint(path, params)
        path.write_bytes(path.read_bytes() + b"x")
        with pytest.raises(CheckpointError, match="trailing"):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "absent.lpn")

    def test_layout_starts_with_magic_and_version(self, tmp_path):
        path = tmp_path / "model.lpn"
        save_checkpoint(path, init_params(seed=0))
        blob = path.read_bytes()
        assert blob[:4] == b"LPN1"
        assert struct.unpack("<I", blob[4:8])[0] == 1
