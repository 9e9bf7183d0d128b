"""Training of denoising-expert predictors.

Experts see the (potentially noisy) signal as teacher-forced input and must
predict the *clean* signal one step ahead; MSE is minimized with Adam over
full-sequence BPTT, gradients averaged over minibatches of sequences.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .adam import AdamConfig, AdamOptimizer
from .datagen import Dataset, NoiseSpec, TRAINING_NOISE_GRID, add_noise
from .errors import ContractViolation, NumericError, ValidationError
from .lstm import GridLstm, LstmParams, SequenceLstm

DEFAULT_EPOCHS = {"mso": 100, "pendulum": 100, "wave": 200}


@dataclass(frozen=True)
class TrainConfig:
    model_kind: str = "lstm"            # "lstm" or "grid_lstm"
    noise_ratio: float = 0.0
    epochs: int = 100
    batch_size: int = 32
    hidden_size: int = 32               # 4 for the grid model
    optimizer: AdamConfig = field(default_factory=AdamConfig)
    seed: int = 0
    grid_extents: tuple[int, int] = (16, 16)

    def __post_init__(self):
        if self.model_kind not in ("lstm", "grid_lstm"):
            raise ValidationError(f"unknown model kind {self.model_kind!r}")
        if self.noise_ratio not in TRAINING_NOISE_GRID:
            raise ValidationError(
                f"training noise {self.noise_ratio} not in grid "
                f"{TRAINING_NOISE_GRID}")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValidationError("batch size must be >= 1")


def build_model(cfg: TrainConfig, channels: int, rng: np.random.Generator):
    if cfg.model_kind == "grid_lstm":
        d = 1 + 4 * cfg.hidden_size
        params = LstmParams.init_random(rng, cfg.hidden_size, d, 1)
        return GridLstm(params, cfg.grid_extents)
    params = LstmParams.init_random(rng, cfg.hidden_size, channels, channels)
    return SequenceLstm(params)


def _batches(model, noisy: np.ndarray, clean: np.ndarray, order: np.ndarray,
             batch_size: int):
    """Yield (inputs (T-1, B, ...), targets (T-1, B, ...)) per minibatch."""
    for start in range(0, len(order), batch_size):
        pick = order[start:start + batch_size]
        # time-major, input at t predicts clean value at t+1
        ins = np.moveaxis(noisy[pick, :-1], 0, 1)
        tgt = np.moveaxis(clean[pick, 1:], 0, 1)
        yield ins, tgt


def _loss_and_grads(model, inputs: np.ndarray, targets: np.ndarray):
    if isinstance(model, GridLstm):
        state = model.zero_state(inputs.shape[1])
    else:
        state = model.zero_state(inputs.shape[1])
    trace, outputs = model.rollout(state, inputs)
    err = outputs - targets
    loss = float(np.mean(err ** 2))
    grads, _, _ = model.backward(trace, 2.0 * err / err.size)
    return loss, grads


def train_expert(cfg: TrainConfig, dataset: Dataset
                 ) -> tuple[object, list[float]]:
    """Train one denoising expert; returns (model, per-epoch mean loss)."""
    rng = np.random.default_rng(cfg.seed)
    if dataset.experiment == "wave":
        channels = 1
        if cfg.model_kind != "grid_lstm":
            raise ValidationError("wave datasets require the grid model")
        if dataset.clean.shape[2:] != cfg.grid_extents:
            raise ContractViolation(
                f"dataset grid {dataset.clean.shape[2:]} != model extents "
                f"{cfg.grid_extents}")
    else:
        channels = dataset.clean.shape[-1]
    model = build_model(cfg, channels, rng)

    noise = NoiseSpec("gaussian", cfg.noise_ratio,
                      seed=int(rng.integers(2 ** 31)))
    noisy = add_noise(dataset, noise).noisy
    clean = dataset.clean

    opt = AdamOptimizer(cfg.optimizer, model.params.arrays())
    history: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(dataset.samples)
        losses = []
        for ins, tgt in _batches(model, noisy, clean, order, cfg.batch_size):
            loss, grads = _loss_and_grads(model, ins, tgt)
            if not np.isfinite(loss):
                raise NumericError(
                    f"training diverged at epoch {epoch} (loss={loss})")
            new = opt.step(model.params.arrays(), grads)
            params = LstmParams(new["input_weights"],
                                new["recurrent_weights"],
                                new["output_weights"])
            if isinstance(model, GridLstm):
                model = GridLstm(params, cfg.grid_extents)
            else:
                model = SequenceLstm(params)
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return model, history


def rmse(predictions: np.ndarray, targets: np.ndarray) -> float:
    """Mean over samples of the per-sample root-mean-square error.

    Arrays are (samples, T, ...); the square mean runs over time and
    channels within each sample.
    """
    if predictions.shape != targets.shape:
        raise ContractViolation(
            f"shape mismatch {predictions.shape} vs {targets.shape}")
    per_sample = np.sqrt(np.mean(
        (predictions - targets) ** 2,
        axis=tuple(range(1, predictions.ndim))))
    return float(np.mean(per_sample))


def predict_open_loop(model, noisy: np.ndarray) -> np.ndarray:
    """Teacher-forced predictions; input t produces the estimate for t+1.

    ``noisy``: (samples, T, ...).  Returns (samples, T-1, ...) aligned with
    clean[:, 1:].
    """
    inputs = np.moveaxis(noisy[:, :-1], 0, 1)
    state = model.zero_state(noisy.shape[0])
    _, outputs = model.rollout(state, inputs)
    return np.moveaxis(outputs, 0, 1)


def evaluate_open_loop(model, dataset: Dataset,
                       noise: NoiseSpec | None = None) -> float:
    """RMSE of teacher-forced predictions against clean shifted targets."""
    data = add_noise(dataset, noise) if noise is not None else dataset
    preds = predict_open_loop(model, data.noisy)
    return rmse(preds, data.clean[:, 1:])
