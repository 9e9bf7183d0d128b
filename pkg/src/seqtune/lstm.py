"""LSTM sequence models with exact backpropagation through time.

Two model flavours share one gate implementation:

* ``SequenceLstm`` -- a single bias-free LSTM cell plus linear readout,
  operating on (batch, channels) rows.  Used for the 1-D and 2-D signal
  experiments.
* ``GridLstm`` -- the same cell replicated over a 2-D grid with shared
  weights; every position consumes its local scalar plus the previous-step
  hidden outputs of its 4-neighbourhood (zero padded at borders).

Rollouts record everything the backward pass needs (``ForwardTrace``), so
``backward`` returns exact gradients with respect to the weights, the seed
state and the inputs, both in open-loop (teacher forced) and closed-loop
(self-feeding) mode.  In closed-loop mode gradients also flow through the
prediction -> next-input feedback edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ContractViolation, NumericError

GATE_COUNT = 4  # input, forget, candidate, output (stacked in this order)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # numerically stable split form
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _require_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {what}")


@dataclass(frozen=True)
class LstmParams:
    """Bias-free LSTM weights plus linear readout.

    input_weights:     (4H, D) gate-stacked input projection
    recurrent_weights: (4H, H) gate-stacked recurrent projection
    output_weights:    (O, H) linear readout
    """

    input_weights: np.ndarray
    recurrent_weights: np.ndarray
    output_weights: np.ndarray

    def __post_init__(self):
        wx, wh, wo = self.input_weights, self.recurrent_weights, self.output_weights
        if wx.ndim != 2 or wh.ndim != 2 or wo.ndim != 2:
            raise ContractViolation("weight tensors must be 2-D")
        if wx.shape[0] != wh.shape[0] or wx.shape[0] % GATE_COUNT:
            raise ContractViolation(
                f"gate-stacked dims disagree: {wx.shape} vs {wh.shape}")
        h = wh.shape[1]
        if wh.shape[0] != GATE_COUNT * h:
            raise ContractViolation(
                f"recurrent weights {wh.shape} not (4H, H)")
        if wo.shape[1] != h:
            raise ContractViolation(
                f"output weights {wo.shape} inconsistent with H={h}")
        for name in ("input_weights", "recurrent_weights", "output_weights"):
            _require_finite(getattr(self, name), name)

    @property
    def hidden_size(self) -> int:
        return self.recurrent_weights.shape[1]

    @property
    def input_size(self) -> int:
        return self.input_weights.shape[1]

    @property
    def output_size(self) -> int:
        return self.output_weights.shape[0]

    @property
    def dtype(self) -> np.dtype:
        return self.input_weights.dtype

    @classmethod
    def zeros(cls, hidden: int, inputs: int, outputs: int,
              dtype=np.float64) -> "LstmParams":
        return cls(
            np.zeros((GATE_COUNT * hidden, inputs), dtype=dtype),
            np.zeros((GATE_COUNT * hidden, hidden), dtype=dtype),
            np.zeros((outputs, hidden), dtype=dtype),
        )

    @classmethod
    def init_random(cls, rng: np.random.Generator, hidden: int, inputs: int,
                    outputs: int, dtype=np.float64) -> "LstmParams":
        # uniform in +-1/sqrt(H); trains reliably at H=32 without biases
        bound = 1.0 / np.sqrt(hidden)
        return cls(
            rng.uniform(-bound, bound, (GATE_COUNT * hidden, inputs)).astype(dtype),
            rng.uniform(-bound, bound, (GATE_COUNT * hidden, hidden)).astype(dtype),
            rng.uniform(-bound, bound, (outputs, hidden)).astype(dtype),
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "input_weights": self.input_weights,
            "recurrent_weights": self.recurrent_weights,
            "output_weights": self.output_weights,
        }


@dataclass
class HiddenState:
    """Paired recurrent state: hidden outputs ``h`` and cell states ``c``.

    Leading axes are free (batch / grid cells); the trailing axis is H.
    """

    h: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        if self.h.shape != self.c.shape:
            raise ContractViolation(
                f"h {self.h.shape} and c {self.c.shape} differ in shape")
        _require_finite(self.h, "hidden state h")
        _require_finite(self.c, "hidden state c")

    def copy(self) -> "HiddenState":
        return HiddenState(self.h.copy(), self.c.copy())


@dataclass
class StepRecord:
    """Everything one cell step needs for its backward pass."""

    x: np.ndarray        # (B, D) cell input rows
    h_prev: np.ndarray   # (B, H)
    c_prev: np.ndarray   # (B, H)
    gates: np.ndarray    # (B, 4H) post-activation [i, f, g, o]
    c_new: np.ndarray    # (B, H)
    tanh_c: np.ndarray   # (B, H)
    h_new: np.ndarray    # (B, H)
    y: np.ndarray        # (B, O)


@dataclass
class ForwardTrace:
    """Unfolded forward computation of a rollout."""

    params: LstmParams
    closed_loop: bool
    steps: list[StepRecord] = field(default_factory=list)
    # populated by GridLstm rollouts only
    grid_shape: Optional[tuple[int, int]] = None
    sample_count: Optional[int] = None

    def __len__(self) -> int:
        return len(self.steps)


def _cell_forward(p: LstmParams, x: np.ndarray, h: np.ndarray,
                  c: np.ndarray) -> StepRecord:
    hdim = p.hidden_size
    z = x @ p.input_weights.T + h @ p.recurrent_weights.T
    i = _sigmoid(z[:, :hdim])
    f = _sigmoid(z[:, hdim:2 * hdim])
    g = np.tanh(z[:, 2 * hdim:3 * hdim])
    o = _sigmoid(z[:, 3 * hdim:])
    c_new = f * c + i * g
    tanh_c = np.tanh(c_new)
    h_new = o * tanh_c
    y = h_new @ p.output_weights.T
    return StepRecord(x, h, c, np.concatenate([i, f, g, o], axis=1),
                      c_new, tanh_c, h_new, y)


def _cell_backward(p: LstmParams, rec: StepRecord, dy: np.ndarray,
                   dh_next: np.ndarray, dc_next: np.ndarray,
                   grads: dict[str, np.ndarray]):
    """One reverse cell step.  Accumulates weight grads, returns (dx, dh, dc)."""
    hdim = p.hidden_size
    i = rec.gates[:, :hdim]
    f = rec.gates[:, hdim:2 * hdim]
    g = rec.gates[:, 2 * hdim:3 * hdim]
    o = rec.gates[:, 3 * hdim:]

    grads["output_weights"] += dy.T @ rec.h_new
    dh = dh_next + dy @ p.output_weights
    do = dh * rec.tanh_c
    dc = dc_next + dh * o * (1.0 - rec.tanh_c ** 2)
    di = dc * g
    df = dc * rec.c_prev
    dg = dc * i
    dc_prev = dc * f

    dz = np.concatenate([
        di * i * (1.0 - i),
        df * f * (1.0 - f),
        dg * (1.0 - g ** 2),
        do * o * (1.0 - o),
    ], axis=1)
    grads["input_weights"] += dz.T @ rec.x
    grads["recurrent_weights"] += dz.T @ rec.h_prev
    dx = dz @ p.input_weights
    dh_prev = dz @ p.recurrent_weights
    return dx, dh_prev, dc_prev


class SequenceLstm:
    """Bias-free LSTM + linear readout over batched signal rows."""

    def __init__(self, params: LstmParams):
        self.params = params

    @property
    def input_size(self) -> int:
        return self.params.input_size

    @property
    def output_size(self) -> int:
        return self.params.output_size

    @property
    def hidden_size(self) -> int:
        return self.params.hidden_size

    def zero_state(self, batch: int = 1) -> HiddenState:
        h = np.zeros((batch, self.hidden_size), dtype=self.params.dtype)
        return HiddenState(h, h.copy())

    def random_state(self, rng: np.random.Generator, std: float,
                     batch: int = 1) -> HiddenState:
        shape = (batch, self.hidden_size)
        return HiddenState(
            (rng.normal(0.0, 1.0, shape) * std).astype(self.params.dtype),
            (rng.normal(0.0, 1.0, shape) * std).astype(self.params.dtype),
        )

    def forward_step(self, state: HiddenState,
                     x: np.ndarray) -> tuple[HiddenState, np.ndarray, StepRecord]:
        x = np.atleast_2d(np.asarray(x, dtype=self.params.dtype))
        self._check_input(x, state)
        rec = _cell_forward(self.params, x, state.h, state.c)
        _require_finite(rec.h_new, "forward_step activations")
        return HiddenState(rec.h_new, rec.c_new), rec.y, rec

    def rollout(self, state: HiddenState, inputs: Optional[np.ndarray] = None,
                *, first_input: Optional[np.ndarray] = None,
                steps: Optional[int] = None,
                closed_loop: bool = False) -> tuple[ForwardTrace, np.ndarray]:
        """Unrolled forward pass.

        Open loop: ``inputs`` is (T, B, D) and each step is teacher forced.
        Closed loop: ``first_input`` (B, D) seeds step 0, afterwards each
        prediction is fed back (requires D == O).  Returns outputs (T, B, O).
        """
        p = self.params
        if closed_loop:
            if p.input_size != p.output_size:
                raise ContractViolation(
                    f"closed loop needs D == O, got {p.input_size} != {p.output_size}")
            if first_input is None or steps is None:
                raise ContractViolation("closed loop needs first_input and steps")
            if steps < 1:
                raise ContractViolation("rollout needs at least one step")
            x = np.atleast_2d(np.asarray(first_input, dtype=p.dtype))
            total = steps
        else:
            if inputs is None:
                raise ContractViolation("open loop needs inputs")
            inputs = np.asarray(inputs, dtype=p.dtype)
            if inputs.ndim == 2:  # (T, D) convenience form
                inputs = inputs[:, None, :]
            if inputs.ndim != 3 or inputs.shape[0] < 1:
                raise ContractViolation(f"inputs must be (T, B, D), got {inputs.shape}")
            total = inputs.shape[0]
            x = inputs[0]
        self._check_input(x, state)

        trace = ForwardTrace(p, closed_loop)
        h, c = state.h, state.c
        for t in range(total):
            if t > 0:
                x = trace.steps[-1].y if closed_loop else inputs[t]
            rec = _cell_forward(p, x, h, c)
            if not np.all(np.isfinite(rec.h_new)):
                raise NumericError(f"non-finite activation at rollout step {t}")
            trace.steps.append(rec)
            h, c = rec.h_new, rec.c_new
        outputs = np.stack([rec.y for rec in trace.steps])
        return trace, outputs

    def backward(self, trace: ForwardTrace, output_grads: np.ndarray
                 ) -> tuple[dict[str, np.ndarray], HiddenState, np.ndarray]:
        """Exact BPTT through a recorded rollout.

        ``output_grads`` is (T, B, O), the loss gradient at every output.
        Returns (weight grads, seed-state grad, input grads (T, B, D)).
        In closed-loop traces only input_grads[0] (the seed input) is a free
        variable; later entries are reported with the feedback edge already
        folded into the outputs.
        """
        p = self.params
        output_grads = np.asarray(output_grads, dtype=p.dtype)
        if output_grads.ndim == 2:
            output_grads = output_grads[:, None, :]
        if len(trace) != output_grads.shape[0]:
            raise ContractViolation(
                f"trace length {len(trace)} != grads {output_grads.shape[0]}")

        grads = {k: np.zeros_like(v) for k, v in p.arrays().items()}
        batch = trace.steps[0].x.shape[0]
        dh = np.zeros((batch, p.hidden_size), dtype=p.dtype)
        dc = np.zeros_like(dh)
        input_grads = np.zeros((len(trace), batch, p.input_size), dtype=p.dtype)
        dx_feedback = None
        for t in reversed(range(len(trace))):
            dy = output_grads[t].copy()
            if trace.closed_loop and dx_feedback is not None:
                dy += dx_feedback  # y_t fed step t+1 as input
            dx, dh, dc = _cell_backward(p, trace.steps[t], dy, dh, dc, grads)
            input_grads[t] = dx
            dx_feedback = dx if trace.closed_loop else None
        return grads, HiddenState(dh, dc), input_grads

    def _check_input(self, x: np.ndarray, state: HiddenState) -> None:
        if x.shape[1] != self.input_size:
            raise ContractViolation(
                f"input has {x.shape[1]} channels, model expects {self.input_size}")
        if state.h.shape != (x.shape[0], self.hidden_size):
            raise ContractViolation(
                f"state shape {state.h.shape} does not match "
                f"(batch={x.shape[0]}, H={self.hidden_size})")


class GridLstm:
    """One shared LSTM cell replicated over a rows x cols grid.

    Per position the cell sees [local pixel, h of up/down/left/right
    neighbours from the previous step] and emits one scalar, so the shared
    cell has D = 1 + 4H and O = 1.  Borders receive zeros for missing
    neighbours.  States and fields carry a leading sample axis S; internally
    cell rows are flattened to (S * N, .).
    """

    LATERAL_NEIGHBOURS = 4

    def __init__(self, params: LstmParams, extents: tuple[int, int] = (16, 16)):
        rows, cols = extents
        expected_d = 1 + self.LATERAL_NEIGHBOURS * params.hidden_size
        if params.input_size != expected_d:
            raise ContractViolation(
                f"grid cell needs D={expected_d} (1 local + 4 lateral x H), "
                f"got {params.input_size}")
        if params.output_size != 1:
            raise ContractViolation("grid cell emits one scalar per position")
        self.params = params
        self.rows, self.cols = rows, cols
        self.cells = rows * cols
        self._neighbours = self._neighbour_index(rows, cols)

    @staticmethod
    def _neighbour_index(rows: int, cols: int) -> np.ndarray:
        """(N, 4) neighbour cell ids, out-of-grid marked with index N."""
        pad = rows * cols
        idx = np.full((rows * cols, 4), pad, dtype=np.intp)
        for r in range(rows):
            for c in range(cols):
                n = r * cols + c
                if r > 0:
                    idx[n, 0] = (r - 1) * cols + c
                if r < rows - 1:
                    idx[n, 1] = (r + 1) * cols + c
                if c > 0:
                    idx[n, 2] = r * cols + (c - 1)
                if c < cols - 1:
                    idx[n, 3] = r * cols + (c + 1)
        return idx

    @property
    def hidden_size(self) -> int:
        return self.params.hidden_size

    @property
    def extents(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def zero_state(self, samples: int = 1) -> HiddenState:
        h = np.zeros((samples, self.cells, self.hidden_size),
                     dtype=self.params.dtype)
        return HiddenState(h, h.copy())

    def random_state(self, rng: np.random.Generator, std: float,
                     samples: int = 1) -> HiddenState:
        shape = (samples, self.cells, self.hidden_size)
        return HiddenState(
            (rng.normal(0.0, 1.0, shape) * std).astype(self.params.dtype),
            (rng.normal(0.0, 1.0, shape) * std).astype(self.params.dtype),
        )

    def _gather_inputs(self, f: np.ndarray, h: np.ndarray) -> np.ndarray:
        """Assemble (S*N, 1+4H) cell rows from field (S,R,C) and h (S,N,H)."""
        s = f.shape[0]
        hpad = np.concatenate(
            [h, np.zeros((s, 1, self.hidden_size), dtype=h.dtype)], axis=1)
        lateral = hpad[:, self._neighbours, :]            # (S, N, 4, H)
        local = f.reshape(s, self.cells, 1)
        x = np.concatenate(
            [local, lateral.reshape(s, self.cells, -1)], axis=2)
        return x.reshape(s * self.cells, -1)

    def forward_step(self, state: HiddenState, field_input: np.ndarray
                     ) -> tuple[HiddenState, np.ndarray, StepRecord]:
        f = self._check_field(field_input)
        s = f.shape[0]
        self._check_state(state, s)
        x = self._gather_inputs(f, state.h)
        rec = _cell_forward(self.params,
                            x,
                            state.h.reshape(s * self.cells, -1),
                            state.c.reshape(s * self.cells, -1))
        _require_finite(rec.h_new, "grid forward activations")
        new = HiddenState(rec.h_new.reshape(s, self.cells, -1),
                          rec.c_new.reshape(s, self.cells, -1))
        return new, rec.y.reshape(s, self.rows, self.cols), rec

    def rollout(self, state: HiddenState, inputs: Optional[np.ndarray] = None,
                *, first_input: Optional[np.ndarray] = None,
                steps: Optional[int] = None,
                closed_loop: bool = False) -> tuple[ForwardTrace, np.ndarray]:
        """Field rollout.  inputs: (T, S, R, C); outputs (T, S, R, C)."""
        if closed_loop:
            if first_input is None or steps is None:
                raise ContractViolation("closed loop needs first_input and steps")
            if steps < 1:
                raise ContractViolation("rollout needs at least one step")
            f = self._check_field(first_input)
            total = steps
        else:
            if inputs is None:
                raise ContractViolation("open loop needs inputs")
            inputs = np.asarray(inputs, dtype=self.params.dtype)
            if inputs.ndim == 3:
                inputs = inputs[:, None, :, :]
            total = inputs.shape[0]
            f = self._check_field(inputs[0])
        s = f.shape[0]
        self._check_state(state, s)

        trace = ForwardTrace(self.params, closed_loop,
                             grid_shape=(self.rows, self.cols), sample_count=s)
        h = state.h.reshape(s * self.cells, -1)
        c = state.c.reshape(s * self.cells, -1)
        outputs = np.empty((total, s, self.rows, self.cols),
                           dtype=self.params.dtype)
        for t in range(total):
            if t > 0:
                f = outputs[t - 1] if closed_loop else self._check_field(inputs[t])
            x = self._gather_inputs(
                f, h.reshape(s, self.cells, -1))
            rec = _cell_forward(self.params, x, h, c)
            if not np.all(np.isfinite(rec.h_new)):
                raise NumericError(f"non-finite activation at grid step {t}")
            trace.steps.append(rec)
            h, c = rec.h_new, rec.c_new
            outputs[t] = rec.y.reshape(s, self.rows, self.cols)
        return trace, outputs

    def backward(self, trace: ForwardTrace, output_grads: np.ndarray
                 ) -> tuple[dict[str, np.ndarray], HiddenState, np.ndarray]:
        """BPTT through a grid rollout.

        ``output_grads``: (T, S, R, C).  Returns (weight grads, seed-state
        grad (S, N, H), field input grads (T, S, R, C)).
        """
        p = self.params
        s = trace.sample_count
        output_grads = np.asarray(output_grads, dtype=p.dtype)
        if output_grads.ndim == 3:
            output_grads = output_grads[:, None, :, :]
        if len(trace) != output_grads.shape[0]:
            raise ContractViolation(
                f"trace length {len(trace)} != grads {output_grads.shape[0]}")

        grads = {k: np.zeros_like(v) for k, v in p.arrays().items()}
        b = s * self.cells
        dh = np.zeros((b, p.hidden_size), dtype=p.dtype)
        dc = np.zeros_like(dh)
        field_grads = np.zeros((len(trace), s, self.rows, self.cols), dtype=p.dtype)
        dfield_feedback = None
        for t in reversed(range(len(trace))):
            dy = output_grads[t].reshape(b, 1).copy()
            if trace.closed_loop and dfield_feedback is not None:
                dy += dfield_feedback.reshape(b, 1)
            dx, dh_rec, dc = _cell_backward(p, trace.steps[t], dy, dh, dc, grads)
            # route cell-input grads: local channel -> field, lateral -> h_prev
            field_grads[t] = dx[:, 0].reshape(s, self.rows, self.cols)
            dlat = dx[:, 1:].reshape(s, self.cells, 4, p.hidden_size)
            dh_pad = np.zeros((self.cells + 1, s, p.hidden_size), dtype=p.dtype)
            for k in range(4):
                np.add.at(dh_pad, self._neighbours[:, k],
                          dlat[:, :, k, :].transpose(1, 0, 2))
            dh = dh_rec + dh_pad[:self.cells].transpose(1, 0, 2).reshape(b, -1)
            dfield_feedback = field_grads[t] if trace.closed_loop else None
        seed_grad = HiddenState(dh.reshape(s, self.cells, -1),
                                dc.reshape(s, self.cells, -1))
        return grads, seed_grad, field_grads

    def _check_field(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=self.params.dtype)
        if f.ndim == 2:
            f = f[None, :, :]
        if f.shape[1:] != (self.rows, self.cols):
            raise ContractViolation(
                f"field shape {f.shape[1:]} != grid {(self.rows, self.cols)}")
        return f

    def _check_state(self, state: HiddenState, samples: int) -> None:
        if state.h.shape != (samples, self.cells, self.hidden_size):
            raise ContractViolation(
                f"grid state shape {state.h.shape} != "
                f"{(samples, self.cells, self.hidden_size)}")
