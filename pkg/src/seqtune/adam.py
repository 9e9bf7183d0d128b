"""Adam with bias correction, shared by weight training and state tuning."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, NumericError, ValidationError


@dataclass(frozen=True)
class AdamConfig:
    rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.rate > 0:
            raise ValidationError(f"rate must be positive, got {self.rate}")
        if not 0.0 <= self.beta1 < 1.0:
            raise ValidationError(f"beta1 must be in [0, 1), got {self.beta1}")
        if not 0.0 <= self.beta2 < 1.0:
            raise ValidationError(f"beta2 must be in [0, 1), got {self.beta2}")
        if not self.eps > 0:
            raise ValidationError(f"eps must be positive, got {self.eps}")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def for_variable(cls, variable: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(variable), np.zeros_like(variable))


def adam_step(state: AdamState, cfg: AdamConfig, variable: np.ndarray,
              grad: np.ndarray) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns (new variable, new state)."""
    if variable.shape != grad.shape or state.m.shape != variable.shape:
        raise ContractViolation(
            f"shape mismatch: var {variable.shape}, grad {grad.shape}, "
            f"m {state.m.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient passed to adam_step")
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad ** 2
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    new_var = variable - cfg.rate * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return new_var, AdamState(m, v, t)


class AdamOptimizer:
    """Keeps one AdamState per named variable; steps are in sequence."""

    def __init__(self, cfg: AdamConfig, variables: dict[str, np.ndarray]):
        self.cfg = cfg
        self.states = {k: AdamState.for_variable(v) for k, v in variables.items()}

    def step(self, variables: dict[str, np.ndarray],
             grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        out = {}
        for name, var in variables.items():
            out[name], self.states[name] = adam_step(
                self.states[name], self.cfg, var, grads[name])
        return out
