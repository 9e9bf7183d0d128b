import numpy as np
import pytest

from seqtune.bench import BenchPlan, CellResult, ResultGrid, emit_report, run_bench
from seqtune.errors import ValidationError
from seqtune.storage import read_container


def tiny_plan(**overrides):
    base = dict(experiment="mso", train_sequences=6, test_sequences=2,
                train_length=30, test_length=30,
                training_noises=(0.0,), signal_noises=(0.0, 0.5),
                tuning_training_noises=(0.0,), model_seeds=1, epochs=1,
                batch_size=4, hidden_size=8)
    base.update(overrides)
    return BenchPlan(**base)


def test_plan_validation():
    with pytest.raises(ValidationError):
        tiny_plan(experiment="lorenz")
    with pytest.raises(ValidationError):
        tiny_plan(model_seeds=0)
    with pytest.raises(ValidationError):
        tiny_plan(signal_noises=(0.3,))  # no published tuning preset


def test_expected_keys_cover_grid():
    grid = ResultGrid(tiny_plan())
    keys = grid.expected_keys()
    assert (0.0, 0.0, "regular") in keys
    assert (0.0, 0.5, "regular") in keys
    assert (0.0, 0.5, "tuning") in keys
    assert (0.0, 0.0, "tuning") not in keys  # no tuning on clean signal
    assert len(keys) == 3


def test_run_bench_fills_grid_and_caches(tmp_path):
    plan = tiny_plan()
    grid = run_bench(plan, tmp_path)
    assert set(grid.cells) == set(grid.expected_keys())
    for cell in grid.cells.values():
        assert np.isfinite(cell.rmse_mean)
        assert cell.seeds == 1
    assert "mso_tn0.0_sn0.5" in grid.traces

    # cached artifacts exist and a rerun reuses them with identical scores
    cache = tmp_path / "cache"
    assert list(cache.glob("model_*.stc"))
    assert list(cache.glob("data_*_train_*.stc"))
    again = run_bench(plan, tmp_path)
    for key, cell in grid.cells.items():
        assert again.cells[key].rmse_mean == cell.rmse_mean
        assert again.cells[key].rmse_std == cell.rmse_std


def test_emit_report_round_trip(tmp_path):
    plan = tiny_plan()
    grid = run_bench(plan, tmp_path / "work")

    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    p1 = emit_report(grid, out1, timing=False)
    p2 = emit_report(grid, out2, timing=False)
    body = p1.read_bytes()
    assert body == p2.read_bytes()
    lines = body.decode().strip().splitlines()
    assert lines[0] == ("experiment,training_noise,signal_noise,mode,"
                        "rmse_mean,rmse_std,seeds,wall_seconds")
    assert len(lines) == 1 + len(grid.cells)
    assert all(line.endswith(",0.000") for line in lines[1:])

    header, arrays = read_container(out1 / "trace_mso_tn0.0_sn0.5.stc")
    assert header["kind"] == "trace"
    assert {"ground_truth", "noisy", "regular", "tuned"} <= set(arrays)


def test_emit_report_rejects_incomplete_grid(tmp_path):
    grid = ResultGrid(tiny_plan())
    with pytest.raises(ValidationError):
        emit_report(grid, tmp_path)
    grid.cells[(0.0, 0.0, "regular")] = CellResult(0.1, 0.0, 1, 0.0)
    with pytest.raises(ValidationError):
        emit_report(grid, tmp_path)


def test_parallel_workers_match_serial(tmp_path):
    plan = tiny_plan()
    serial = run_bench(plan, tmp_path / "a")
    parallel = run_bench(plan, tmp_path / "b", workers=2)
    for key, cell in serial.cells.items():
        assert parallel.cells[key].rmse_mean == cell.rmse_mean
