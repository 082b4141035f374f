import numpy as np
import pytest

from evogene.errors import DataError, NumericError
from evogene.numcore import ParamStore
from evogene.persistence import (
    FORMAT_VERSION,
    load_checkpoint,
    restore_store,
    save_checkpoint,
)


def _store(seed=3):
    s = ParamStore(seed)
    s.matrix("w_in", 4, 8)
    s.bias("b", (1, 8))
    s.buffer("mean", np.array([[1.5, -2.0]]))
    s.matrix("w_out", 8, 2)
    return s


def test_round_trip_is_bit_identical(tmp_path):
    path = str(tmp_path / "model.ckpt")
    store = _store()
    save_checkpoint(store, {"k": 5, "seed": 3}, path)
    stores, config = load_checkpoint(path)
    assert config == {"k": 5, "seed": 3}
    original = store.state_arrays()
    assert set(stores["model"]) == set(original)
    for name, arr in original.items():
        loaded = stores["model"][name]
        assert loaded.shape == arr.shape
        assert loaded.tobytes() == arr.tobytes()


def test_round_trip_through_fresh_store(tmp_path):
    path = str(tmp_path / "model.ckpt")
    store = _store(seed=3)
    for t in store.tensors():
        t.data += 0.123  # move away from init
    save_checkpoint({"clf": store}, {}, path)
    stores, _ = load_checkpoint(path)
    fresh = restore_store(_store(seed=99), stores["clf"])
    for name, arr in store.state_arrays().items():
        assert fresh.state_arrays()[name].tobytes() == arr.tobytes()


def test_multi_store_manifest_order(tmp_path):
    path = str(tmp_path / "multi.ckpt")
    a, b = _store(1), _store(2)
    save_checkpoint({"enc": a, "dec": b}, {"task": "value"}, path)
    stores, config = load_checkpoint(path)
    assert list(stores) == ["enc", "dec"]
    assert list(stores["enc"]) == list(a.state_arrays())
    assert config["task"] == "value"


def test_identical_saves_are_byte_equal(tmp_path):
    p1, p2 = str(tmp_path / "a.ckpt"), str(tmp_path / "b.ckpt")
    save_checkpoint(_store(7), {"seed": 7}, p1)
    save_checkpoint(_store(7), {"seed": 7}, p2)
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_corrupted_payload_byte_detected(tmp_path):
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(_store(), {}, path)
    blob = bytearray(open(path, "rb").read())
    blob[-5] ^= 0xFF
    open(path, "wb").write(bytes(blob))
    with pytest.raises(DataError, match="checksum"):
        load_checkpoint(path)


def test_bad_magic_rejected(tmp_path):
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(_store(), {}, path)
    blob = bytearray(open(path, "rb").read())
    blob[:4] = b"NOPE"
    open(path, "wb").write(bytes(blob))
    with pytest.raises(DataError, match="magic"):
        load_checkpoint(path)


def test_future_version_rejected(tmp_path):
    import struct

    path = str(tmp_path / "model.ckpt")
    save_checkpoint(_store(), {}, path)
    blob = bytearray(open(path, "rb").read())
    blob[4:8] = struct.pack("<I", FORMAT_VERSION + 1)
    open(path, "wb").write(bytes(blob))
    with pytest.raises(DataError, match="version"):
        load_checkpoint(path)


def test_truncated_file_rejected(tmp_path):
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(_store(), {}, path)
    blob = open(path, "rb").read()
    open(path, "wb").write(blob[: len(blob) // 2])
    with pytest.raises(DataError, match="truncated|payload"):
        load_checkpoint(path)


def test_nonfinite_parameters_refuse_to_save(tmp_path):
    store = _store()
    store["w_in"].data[0, 0] = np.nan
    with pytest.raises(NumericError):
        save_checkpoint(store, {}, str(tmp_path / "bad.ckpt"))


def test_missing_file_is_data_error(tmp_path):
    with pytest.raises(DataError):
        load_checkpoint(str(tmp_path / "absent.ckpt"))


def test_load_rejects_garbage_header(tmp_path):
    import struct

    path = str(tmp_path / "garbage.ckpt")
    header = b"\x00\x01not json"
    blob = b"GENE" + struct.pack("<I", FORMAT_VERSION) + struct.pack("<Q", len(header)) + header
    open(path, "wb").write(blob)
    with pytest.raises(DataError, match="JSON"):
        load_checkpoint(path)
