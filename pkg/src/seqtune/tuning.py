"""Retrospective hidden-state tuning for online signal filtering.

The model runs permanently in closed-loop mode; observations never drive the
forward pass.  Instead, per world time step the seed state at the left edge
of a sliding R-step window is optimized with Adam so that the closed-loop
rollout from that seed explains the recently observed signal: rollout,
window MSE, BPTT to the seed, one update, re-rollout -- repeated C times.
Advancing to the next step promotes the rollout's state one position in and
shifts the window.

A ``TuningStream`` can carry many independent streams at once (leading batch
axis); per-stream results are identical to running each stream alone because
the window loss gradient separates over streams and Adam normalizes per
coordinate.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .adam import AdamConfig, AdamState, adam_step
from .errors import ContractViolation, ValidationError
from .lstm import ForwardTrace, GridLstm, HiddenState

TARGET_H = "h"
TARGET_H_AND_C = "h_and_c"


@dataclass(frozen=True)
class TuningConfig:
    horizon: int = 8                 # R
    cycles: int = 10                 # C; 0 degenerates to plain closed loop
    optimizer: AdamConfig = field(
        default_factory=lambda: AdamConfig(rate=0.005, beta1=0.9, beta2=0.99))
    target: str = TARGET_H           # which state parts receive updates
    init_std: float = 0.1            # std of the random seed state
    tune_seed_input: bool = False
    # "prediction": the window's first input is the model's own retained
    # prediction (fully closed loop).  "observation": the oldest observation
    # is fed instead -- one direct signal contact per window.
    seed_input_mode: str = "prediction"
    carry_moments: bool = False      # keep Adam moments across world steps

    def __post_init__(self):
        if self.horizon < 1:
            raise ValidationError("tuning horizon must be >= 1")
        if self.cycles < 0:
            raise ValidationError("tuning cycles must be >= 0")
        if self.target not in (TARGET_H, TARGET_H_AND_C):
            raise ValidationError(f"unknown tuning target {self.target!r}")
        if self.init_std < 0:
            raise ValidationError("init std must be >= 0")
        if self.seed_input_mode not in ("prediction", "observation"):
            raise ValidationError(
                f"unknown seed input mode {self.seed_input_mode!r}")


class TuningStream:
    """Sliding-window state tuner over one (batched) observation stream."""

    def __init__(self, model, cfg: TuningConfig, rng: np.random.Generator,
                 batch: int = 1):
        self.model = model
        self.cfg = cfg
        self.seed_state = model.random_state(rng, cfg.init_std, batch)
        self.seed_input: np.ndarray | None = None
        self.buffer: deque[np.ndarray] = deque()
        self.steps_seen = 0
        self._adam: dict[str, AdamState] = {}
        self._trace: ForwardTrace | None = None
        self._preds: np.ndarray | None = None
        self._next_seed: HiddenState | None = None
        self._next_seed_input: np.ndarray | None = None
        self.last_cycle_losses: list[float] = []

    # -- bookkeeping --------------------------------------------------------

    def __len__(self) -> int:
        return len(self.buffer)

    def _obs_array(self, obs) -> np.ndarray:
        obs = np.asarray(obs, dtype=self.model.params.dtype)
        if isinstance(self.model, GridLstm):
            if obs.ndim == 2:
                obs = obs[None]
        elif obs.ndim == 1:
            obs = obs[None]
        return obs

    def _state_at(self, trace: ForwardTrace, k: int) -> HiddenState:
        rec = trace.steps[k]
        if isinstance(self.model, GridLstm):
            s = trace.sample_count
            return HiddenState(rec.h_new.reshape(s, self.model.cells, -1).copy(),
                               rec.c_new.reshape(s, self.model.cells, -1).copy())
        return HiddenState(rec.h_new.copy(), rec.c_new.copy())

    def _rollout(self) -> tuple[ForwardTrace, np.ndarray]:
        trace, outputs = self.model.rollout(
            self.seed_state, first_input=self.seed_input,
            steps=len(self.buffer), closed_loop=True)
        if isinstance(self.model, GridLstm):
            preds = outputs  # (L, S, R, C)
        else:
            preds = outputs  # (L, B, D)
        return trace, preds

    def window_loss(self) -> float:
        if self._preds is None:
            raise ContractViolation("no rollout yet; feed an observation first")
        target = np.stack(self.buffer)
        return float(np.mean((self._preds - target) ** 2))

    # -- the tuning procedure ----------------------------------------------

    def _tuning_cycle(self) -> float:
        """One rollout + backward + seed update.  Returns the pre-update loss."""
        trace, preds = self._rollout()
        target = np.stack(self.buffer)
        err = preds - target
        loss = float(np.mean(err ** 2))
        _, state_grad, input_grads = self.model.backward(
            trace, 2.0 * err / err.size)

        self.seed_state = HiddenState(
            self._update("h", self.seed_state.h, state_grad.h),
            self._update("c", self.seed_state.c, state_grad.c)
            if self.cfg.target == TARGET_H_AND_C else self.seed_state.c,
        )
        if self.cfg.tune_seed_input:
            self.seed_input = self._update("input", self.seed_input,
                                           input_grads[0])
        return loss

    def _update(self, name: str, var: np.ndarray,
                grad: np.ndarray) -> np.ndarray:
        if name not in self._adam:
            self._adam[name] = AdamState.for_variable(var)
        new, self._adam[name] = adam_step(self._adam[name], self.cfg.optimizer,
                                          var, grad)
        return new

    def step(self, observation) -> tuple[np.ndarray, HiddenState]:
        """Advance one world time step.

        Appends the observation, runs C tuning cycles, refreshes the window
        rollout and returns (current filtered output, current model state).
        """
        obs = self._obs_array(observation)
        self.buffer.append(obs)
        if len(self.buffer) > self.cfg.horizon:
            # window saturated: promote the state one position in
            self.seed_state = self._next_seed
            dropped = self.buffer.popleft()
            if self.cfg.seed_input_mode == "observation":
                self.seed_input = dropped
            else:
                self.seed_input = self._next_seed_input
        if self.seed_input is None:
            # stream start: the first observation seeds the first rollout
            self.seed_input = obs

        if not self.cfg.carry_moments:
            self._adam = {}
        self.last_cycle_losses = [self._tuning_cycle()
                                  for _ in range(self.cfg.cycles)]
        self._trace, self._preds = self._rollout()
        self.last_cycle_losses.append(self.window_loss())

        self._next_seed = self._state_at(self._trace, 0)
        self._next_seed_input = self._preds[0].copy()
        self.steps_seen += 1
        return self._preds[-1].copy(), self._state_at(self._trace, -1)

    def forecast(self, steps: int) -> np.ndarray:
        """Closed-loop future rollout from the current state; pure."""
        if self._trace is None:
            raise ContractViolation("stream has not seen any observation")
        if steps == 0:
            first = self._preds[-1]
            return np.empty((0,) + first.shape, dtype=first.dtype)
        state = self._state_at(self._trace, -1)
        _, outputs = self.model.rollout(state, first_input=self._preds[-1],
                                        steps=steps, closed_loop=True)
        return outputs


def filter_stream(model, cfg: TuningConfig, observations: np.ndarray,
                  rng: np.random.Generator) -> np.ndarray:
    """Run a whole observation stream; returns one filtered output per step.

    ``observations``: (T, B, D) for signal models, (T, S, rows, cols) for the
    grid model (batch axes optional).
    """
    observations = np.asarray(observations)
    batch = 1
    if isinstance(model, GridLstm):
        if observations.ndim == 3:
            observations = observations[:, None]
        batch = observations.shape[1]
    else:
        if observations.ndim == 2:
            observations = observations[:, None]
        batch = observations.shape[1]
    stream = TuningStream(model, cfg, rng, batch)
    outputs = np.empty_like(observations, dtype=model.params.dtype)
    for t in range(observations.shape[0]):
        outputs[t], _ = stream.step(observations[t])
    return outputs


def filter_dataset(model, cfg: TuningConfig, noisy: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
    """Filter every sequence of a dataset; (samples, T, ...) in and out.

    All sequences stream in parallel as one batch; results match per-sequence
    runs because streams are independent.
    """
    obs = np.moveaxis(noisy, 0, 1)  # time major
    out = filter_stream(model, cfg, obs, rng)
    return np.moveaxis(out, 0, 1)
