import numpy as np
import pytest

from seqtune.datagen import MsoSpec, gen_mso
from seqtune.errors import MissingArtifactError, ValidationError
from seqtune.lstm import GridLstm, LstmParams, SequenceLstm
from seqtune.storage import (config_hash, load_dataset, load_model,
                             read_container, read_header, save_dataset,
                             save_model, write_container)


def test_container_roundtrip(tmp_path):
    path = tmp_path / "blob.stc"
    arrays = {"a": np.arange(6, dtype=np.float64).reshape(2, 3),
              "b": np.full((4,), 0.5, dtype=np.float32)}
    write_container(path, {"kind": "test", "note": 7}, arrays)
    header, out = read_container(path)
    assert header["note"] == 7
    assert [seg["name"] for seg in header["arrays"]] == ["a", "b"]
    assert np.array_equal(out["a"], arrays["a"])
    assert out["b"].dtype == np.dtype("<f4")


def test_model_roundtrip_contains_exactly_three_tensors(tmp_path):
    rng = np.random.default_rng(0)
    model = SequenceLstm(LstmParams.init_random(rng, 32, 1, 1))
    path = tmp_path / "model.stc"
    save_model(path, model)
    header, arrays = read_container(path)
    # no bias vectors anywhere in the file
    assert sorted(arrays) == ["input_weights", "output_weights",
                              "recurrent_weights"]
    assert header["hidden"] == 32 and header["precision"] == "float64"
    loaded = load_model(path)
    assert np.array_equal(loaded.params.input_weights,
                          model.params.input_weights)


def test_grid_model_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    model = GridLstm(LstmParams.init_random(rng, 4, 17, 1), (8, 8))
    save_model(tmp_path / "grid.stc", model)
    loaded = load_model(tmp_path / "grid.stc")
    assert isinstance(loaded, GridLstm)
    assert loaded.extents == (8, 8)


def test_dataset_roundtrip(tmp_path):
    ds = gen_mso(MsoSpec(length=20, seed=0), 3)
    save_dataset(tmp_path / "d.stc", ds)
    loaded = load_dataset(tmp_path / "d.stc")
    assert loaded.experiment == "mso"
    assert np.array_equal(loaded.clean, ds.clean)
    assert np.array_equal(loaded.noisy, ds.noisy)
    assert loaded.meta["generator"] == "mso"


def test_missing_file_and_bad_magic(tmp_path):
    with pytest.raises(MissingArtifactError):
        read_header(tmp_path / "nope.stc")
    bad = tmp_path / "bad.stc"
    bad.write_bytes(b"JUNKJUNKJUNK")
    with pytest.raises(ValidationError):
        read_header(bad)


def test_config_hash_is_stable_and_order_free():
    a = config_hash({"x": 1, "y": [1, 2]})
    b = config_hash({"y": [1, 2], "x": 1})
    assert a == b and len(a) == 16
    assert config_hash({"x": 2}) != a
