import numpy as np
import pytest

from seqtune.datagen import MsoSpec, WaveSpec, gen_mso, gen_wave
from seqtune.errors import ContractViolation, ValidationError
from seqtune.lstm import GridLstm, SequenceLstm
from seqtune.training import (DEFAULT_EPOCHS, TrainConfig, evaluate_open_loop,
                              predict_open_loop, rmse, train_expert)


def tiny_mso(count=12, length=30, seed=0):
    return gen_mso(MsoSpec(length=length, seed=seed), count)


def test_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(model_kind="gru")
    with pytest.raises(ValidationError):
        TrainConfig(noise_ratio=0.3)  # off the published noise grid
    with pytest.raises(ValidationError):
        TrainConfig(epochs=0)
    with pytest.raises(ValidationError):
        TrainConfig(batch_size=0)


def test_default_epochs_per_experiment():
    assert DEFAULT_EPOCHS == {"mso": 100, "pendulum": 100, "wave": 200}


def test_training_reduces_loss():
    cfg = TrainConfig(epochs=8, batch_size=4, hidden_size=8, seed=1)
    model, history = train_expert(cfg, tiny_mso())
    assert isinstance(model, SequenceLstm)
    assert len(history) == 8
    assert history[-1] < history[0]


def test_training_is_deterministic():
    cfg = TrainConfig(epochs=2, batch_size=4, hidden_size=8, seed=3)
    ds = tiny_mso()
    m1, h1 = train_expert(cfg, ds)
    m2, h2 = train_expert(cfg, ds)
    assert h1 == h2
    for a, b in zip(m1.params.arrays().values(), m2.params.arrays().values()):
        assert np.array_equal(a, b)


def test_seed_changes_result():
    ds = tiny_mso()
    _, h1 = train_expert(TrainConfig(epochs=1, batch_size=4, hidden_size=8,
                                     seed=0), ds)
    _, h2 = train_expert(TrainConfig(epochs=1, batch_size=4, hidden_size=8,
                                     seed=1), ds)
    assert h1 != h2


def test_wave_needs_grid_model():
    ds = gen_wave(WaveSpec(rows=4, cols=4, length=10, seed=0), 3)
    with pytest.raises(ValidationError):
        train_expert(TrainConfig(model_kind="lstm", epochs=1), ds)
    with pytest.raises(ContractViolation):
        train_expert(TrainConfig(model_kind="grid_lstm", epochs=1,
                                 hidden_size=2, grid_extents=(8, 8)), ds)


def test_grid_training_runs():
    ds = gen_wave(WaveSpec(rows=4, cols=4, length=12, seed=0), 4)
    cfg = TrainConfig(model_kind="grid_lstm", epochs=3, batch_size=2,
                      hidden_size=2, grid_extents=(4, 4), seed=0)
    model, history = train_expert(cfg, ds)
    assert isinstance(model, GridLstm)
    assert history[-1] < history[0]


def test_rmse_known_value():
    # constant per-sample error e gives per-sample rmse |e|, mean over samples
    preds = np.zeros((2, 5, 3))
    target = np.zeros((2, 5, 3))
    target[0] += 2.0
    target[1] += 1.0
    assert rmse(preds, target) == pytest.approx(1.5, abs=1e-15)


def test_rmse_shape_mismatch():
    with pytest.raises(ContractViolation):
        rmse(np.zeros((2, 3)), np.zeros((3, 2)))


def test_predict_open_loop_alignment():
    ds = tiny_mso(count=3, length=20)
    cfg = TrainConfig(epochs=1, batch_size=4, hidden_size=8)
    model, _ = train_expert(cfg, ds)
    preds = predict_open_loop(model, ds.clean)
    assert preds.shape == (3, 19, 1)
    # feeding one step fewer drops exactly the last prediction
    short = predict_open_loop(model, ds.clean[:, :-1])
    assert np.array_equal(short, preds[:, :-1])


def test_evaluate_open_loop_noise_hurts():
    from seqtune.datagen import NoiseSpec
    ds = tiny_mso(count=8, length=40)
    cfg = TrainConfig(epochs=10, batch_size=4, hidden_size=8)
    model, _ = train_expert(cfg, ds)
    clean = evaluate_open_loop(model, ds)
    noisy = evaluate_open_loop(model, ds, NoiseSpec("gaussian", 1.0, seed=5))
    assert noisy > clean
