"""seqtune: LSTM sequence predictors with retrospective hidden-state tuning.

Train small bias-free LSTMs as one-step-ahead denoising predictors on three
synthetic dynamical systems (superimposed sines, chaotic double pendulum,
2-D wave field), then filter noisy streams at inference time by optimizing
the model's past seed state against recent observations via BPTT.
"""

from .adam import AdamConfig, AdamState, adam_step
from .datagen import (Dataset, MsoSpec, NoiseSpec, PendulumSpec, WaveSpec,
                      add_noise, gen_mso, gen_pendulum, gen_wave)
from .lstm import ForwardTrace, GridLstm, HiddenState, LstmParams, SequenceLstm
from .training import TrainConfig, evaluate_open_loop, rmse, train_expert
from .tuning import TuningConfig, TuningStream, filter_dataset, filter_stream
from .bench import BenchPlan, ResultGrid, emit_report, run_bench

__all__ = [
    "AdamConfig", "AdamState", "adam_step",
    "Dataset", "MsoSpec", "NoiseSpec", "PendulumSpec", "WaveSpec",
    "add_noise", "gen_mso", "gen_pendulum", "gen_wave",
    "ForwardTrace", "GridLstm", "HiddenState", "LstmParams", "SequenceLstm",
    "TrainConfig", "evaluate_open_loop", "rmse", "train_expert",
    "TuningConfig", "TuningStream", "filter_dataset", "filter_stream",
    "BenchPlan", "ResultGrid", "emit_report", "run_bench",
]

__version__ = "0.1.0"
