"""Benchmark harness: RMSE grids of denoising experts, regular inference vs
retrospective state tuning, averaged over model seeds.

Every (training noise, signal noise, mode) cell is an independent job; models
and datasets are cached on disk keyed by config hash so reruns are cheap.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import presets
from .datagen import (Dataset, MsoSpec, NoiseSpec, PendulumSpec, WaveSpec,
                      add_noise, gen_mso, gen_pendulum, gen_wave)
from .errors import ValidationError
from .storage import config_hash, load_dataset, load_model, save_dataset, save_model
from .training import TrainConfig, evaluate_open_loop, predict_open_loop, rmse, train_expert
from .tuning import TuningConfig, filter_dataset
from .adam import AdamConfig

BASELINE_NOISES = (0.0, 0.1, 0.2, 0.5, 1.0)
SIGNAL_NOISES = (0.0, 0.1, 0.2, 0.5, 1.0)
TUNING_TRAIN_NOISES = (0.0, 0.05)


@dataclass(frozen=True)
class BenchPlan:
    experiment: str = "mso"
    train_sequences: int = 500
    test_sequences: int = 50
    train_length: int = 400
    test_length: int = 400
    training_noises: tuple[float, ...] = BASELINE_NOISES
    signal_noises: tuple[float, ...] = SIGNAL_NOISES
    tuning_training_noises: tuple[float, ...] = TUNING_TRAIN_NOISES
    model_seeds: int = 3
    epochs: int = 20
    batch_size: int = 4
    hidden_size: int = 32
    grid_extents: tuple[int, int] = (16, 16)
    data_seed: int = 100

    def __post_init__(self):
        if self.experiment not in ("mso", "pendulum", "wave"):
            raise ValidationError(f"unknown experiment {self.experiment!r}")
        if self.model_seeds < 1:
            raise ValidationError("need at least one model seed")
        for tn in self.tuning_training_noises:
            for sn in self.signal_noises:
                if sn > 0:
                    presets.resolve(self.experiment, tn, sn)  # raises if absent


@dataclass
class CellResult:
    rmse_mean: float
    rmse_std: float
    seeds: int
    wall_seconds: float


@dataclass
class ResultGrid:
    plan: BenchPlan
    cells: dict[tuple[float, float, str], CellResult] = field(default_factory=dict)
    traces: dict[str, dict] = field(default_factory=dict)

    def expected_keys(self) -> list[tuple[float, float, str]]:
        keys = [(tn, sn, "regular")
                for tn in self.plan.training_noises
                for sn in self.plan.signal_noises]
        keys += [(tn, sn, "tuning")
                 for tn in self.plan.tuning_training_noises
                 for sn in self.plan.signal_noises if sn > 0.0]
        return keys


def _generate(plan: BenchPlan, count: int, length: int, seed: int) -> Dataset:
    if plan.experiment == "mso":
        return gen_mso(MsoSpec(length=length, seed=seed), count)
    if plan.experiment == "pendulum":
        return gen_pendulum(PendulumSpec(length=length, seed=seed), count)
    rows, cols = plan.grid_extents
    return gen_wave(WaveSpec(rows=rows, cols=cols, length=length, seed=seed),
                    count)


def _cached_dataset(plan: BenchPlan, cache: Path, split: str) -> Dataset:
    count = plan.train_sequences if split == "train" else plan.test_sequences
    length = plan.train_length if split == "train" else plan.test_length
    seed = plan.data_seed + (0 if split == "train" else 1)
    key = config_hash({"experiment": plan.experiment, "count": count,
                       "length": length, "seed": seed,
                       "extents": list(plan.grid_extents)})
    path = cache / f"data_{plan.experiment}_{split}_{key}.stc"
    if path.exists():
        return load_dataset(path)
    ds = _generate(plan, count, length, seed)
    save_dataset(path, ds, extra={"config_hash": key})
    return ds


def _train_config(plan: BenchPlan, noise: float, seed: int) -> TrainConfig:
    kind = "grid_lstm" if plan.experiment == "wave" else "lstm"
    hidden = 4 if plan.experiment == "wave" else plan.hidden_size
    return TrainConfig(model_kind=kind, noise_ratio=noise, epochs=plan.epochs,
                       batch_size=plan.batch_size, hidden_size=hidden,
                       optimizer=AdamConfig(), seed=seed,
                       grid_extents=plan.grid_extents)


def _cached_model(plan: BenchPlan, cache: Path, train_set: Dataset,
                  noise: float, seed: int):
    cfg = _train_config(plan, noise, seed)
    key = config_hash({"train": asdict(cfg), "experiment": plan.experiment,
                       "sequences": plan.train_sequences,
                       "length": plan.train_length,
                       "data_seed": plan.data_seed})
    path = cache / f"model_{plan.experiment}_n{noise}_s{seed}_{key}.stc"
    if path.exists():
        return load_model(path)
    model, history = train_expert(cfg, train_set)
    save_model(path, model, extra={
        "config_hash": key, "final_loss": history[-1],
        "training_noise": noise, "model_seed": seed})
    csv_path = path.with_suffix(".loss.csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "mse"])
        for i, loss in enumerate(history):
            w.writerow([i, f"{loss:.10g}"])
    return model


def _tuned_outputs(plan: BenchPlan, model, test_set: Dataset,
                   training_noise: float, signal_noise: float,
                   seed: int) -> tuple[np.ndarray, np.ndarray]:
    preset = presets.resolve(plan.experiment, training_noise, signal_noise)
    cfg = TuningConfig(horizon=preset.horizon, cycles=preset.cycles,
                       optimizer=AdamConfig(rate=preset.rate,
                                            beta1=preset.beta1,
                                            beta2=preset.beta2))
    noisy = add_noise(test_set, NoiseSpec("gaussian", signal_noise,
                                          seed=plan.data_seed + 7)).noisy
    rng = np.random.default_rng(plan.data_seed + 1000 * seed + 13)
    return filter_dataset(model, cfg, noisy, rng), noisy


def run_baseline_cell(model, test_set: Dataset, signal_noise: float,
                      noise_seed: int) -> float:
    """Teacher-forced RMSE of one model at one signal-noise level."""
    return evaluate_open_loop(
        model, test_set, NoiseSpec("gaussian", signal_noise, seed=noise_seed))


def run_tuning_cell(plan: BenchPlan, model, test_set: Dataset,
                    training_noise: float, signal_noise: float,
                    seed: int) -> float:
    """Streamed filtering RMSE; all time steps count, including warm-up."""
    tuned, _ = _tuned_outputs(plan, model, test_set, training_noise,
                              signal_noise, seed)
    return rmse(tuned, test_set.clean)


def run_bench(plan: BenchPlan, workdir: str | Path, *,
              workers: int = 1) -> ResultGrid:
    workdir = Path(workdir)
    cache = workdir / "cache"
    cache.mkdir(parents=True, exist_ok=True)

    train_set = _cached_dataset(plan, cache, "train")
    test_set = _cached_dataset(plan, cache, "test")

    noises = sorted(set(plan.training_noises) | set(plan.tuning_training_noises))
    models = {
        (tn, s): _cached_model(plan, cache, train_set, tn, s)
        for tn in noises for s in range(plan.model_seeds)
    }

    grid = ResultGrid(plan)

    def baseline_job(key):
        tn, sn = key
        t0 = time.perf_counter()
        scores = [run_baseline_cell(models[(tn, s)], test_set, sn,
                                    plan.data_seed + 7)
                  for s in range(plan.model_seeds)]
        return (tn, sn, "regular"), scores, time.perf_counter() - t0

    def tuning_job(key):
        tn, sn = key
        t0 = time.perf_counter()
        scores = [run_tuning_cell(plan, models[(tn, s)], test_set, tn, sn, s)
                  for s in range(plan.model_seeds)]
        return (tn, sn, "tuning"), scores, time.perf_counter() - t0

    jobs = [(baseline_job, (tn, sn))
            for tn in plan.training_noises for sn in plan.signal_noises]
    jobs += [(tuning_job, (tn, sn))
             for tn in plan.tuning_training_noises
             for sn in plan.signal_noises if sn > 0.0]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: j[0](j[1]), jobs))
    else:
        results = [fn(key) for fn, key in jobs]
    for key, scores, wall in results:
        grid.cells[key] = CellResult(float(np.mean(scores)),
                                     float(np.std(scores)),
                                     plan.model_seeds, wall)

    _collect_traces(plan, grid, models, test_set)
    return grid


def _collect_traces(plan: BenchPlan, grid: ResultGrid, models,
                    test_set: Dataset) -> None:
    """Exemplar per-sequence traces for redrawing the qualitative figures."""
    tn = plan.tuning_training_noises[-1]
    model = models[(tn, 0)]
    for sn in plan.signal_noises:
        if sn == 0.0:
            continue
        tuned, noisy = _tuned_outputs(plan, model, test_set, tn, sn, 0)
        baseline = predict_open_loop(model, noisy)
        name = f"{plan.experiment}_tn{tn}_sn{sn}"
        channels = {
            "ground_truth": test_set.clean[0],
            "noisy": noisy[0],
            "regular": baseline[0],
            "tuned": tuned[0],
        }
        if plan.experiment == "wave":
            r, c = plan.grid_extents[0] // 2, plan.grid_extents[1] // 2
            channels.update({
                "center_ground_truth": test_set.clean[0, :, r, c],
                "center_noisy": noisy[0, :, r, c],
                "center_regular": baseline[0, :, r, c],
                "center_tuned": tuned[0, :, r, c],
            })
        grid.traces[name] = {
            "header": {"kind": "trace", "experiment": plan.experiment,
                       "training_noise": tn, "signal_noise": sn,
                       "channels": sorted(channels)},
            "channels": channels,
        }


def emit_report(grid: ResultGrid, outdir: str | Path, *,
                timing: bool = True) -> Path:
    """Write results.csv and the trace bundles.  Returns the CSV path.

    ``timing=False`` zeroes the wall_seconds column so byte-identical
    reports can be compared across runs.
    """
    missing = [k for k in grid.expected_keys() if k not in grid.cells]
    if missing:
        raise ValidationError(f"result grid incomplete, missing cells: {missing}")
    if not grid.cells:
        raise ValidationError("empty result grid")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "results.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["experiment", "training_noise", "signal_noise", "mode",
                    "rmse_mean", "rmse_std", "seeds", "wall_seconds"])
        for key in sorted(grid.cells):
            tn, sn, mode = key
            cell = grid.cells[key]
            wall = f"{cell.wall_seconds:.3f}" if timing else "0.000"
            w.writerow([grid.plan.experiment, tn, sn, mode,
                        f"{cell.rmse_mean:.6f}", f"{cell.rmse_std:.6f}",
                        cell.seeds, wall])
    from .storage import write_container
    for name, bundle in grid.traces.items():
        write_container(outdir / f"trace_{name}.stc", bundle["header"],
                        bundle["channels"])
    return csv_path
