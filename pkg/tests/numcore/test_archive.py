import numpy as np
import pytest
from safetensors.numpy import save_file

from food_vocab_seg.config import ARCHIVE_FORMAT_VERSION
from food_vocab_seg.errors import ArchiveError
from food_vocab_seg.numcore import RngState, load_archive, save_archive, strip_prefix, with_prefix


def test_archive_round_trip_is_bit_exact(tmp_path):
    state = {"block.0.weight": RngState(0).normal((3, 4)), "bias": np.array([1e-300, -0.0, 7.5])}
    path = tmp_path / "params.safetensors"
    save_archive(path, state, {"q_tokens": 32})
    arrays, header = load_archive(path)
    assert header["format_version"] == ARCHIVE_FORMAT_VERSION
    assert header["q_tokens"] == "32"
    for name, value in state.items():
        assert arrays[name].tobytes() == value.tobytes()


def test_missing_archive(tmp_path):
    with pytest.raises(ArchiveError):
        load_archive(tmp_path / "absent.safetensors")


def test_foreign_format_version(tmp_path):
    path = tmp_path / "old.safetensors"
    save_file({"w": np.zeros(2)}, str(path), metadata={"format_version": "0"})
    with pytest.raises(ArchiveError, match="format version"):
        load_archive(path)


def test_corrupt_file(tmp_path):
    path = tmp_path / "junk.safetensors"
    path.write_bytes(b"not an archive")
    with pytest.raises(ArchiveError):
        load_archive(path)


def test_prefix_helpers():
    state = {"a": np.zeros(1), "b.c": np.ones(1)}
    prefixed = with_prefix(state, "model")
    assert set(prefixed) == {"model.a", "model.b.c"}
    assert set(strip_prefix({**prefixed, "other.x": np.zeros(1)}, "model")) == {"a", "b.c"}
