"""Built-in state-tuning hyperparameter presets.

Keyed by (experiment, training noise ratio, signal noise ratio).  These are
the settings used to produce the published benchmark grids; `resolve` is the
single lookup point for the CLI and the bench harness.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class TuningPreset:
    horizon: int     # R: steps of history the error is projected back over
    cycles: int      # C: optimization cycles per world time step
    rate: float      # Adam step size for the seed state
    beta1: float
    beta2: float


_TABLE: dict[tuple[str, float, float], TuningPreset] = {}


def _register(experiment: str, rows: list[tuple[float, float, int, int, float, float, float]]):
    for train, signal, r, c, eta, b1, b2 in rows:
        _TABLE[(experiment, train, signal)] = TuningPreset(r, c, eta, b1, b2)


_register("mso", [
    # train, signal,  R,  C,  rate,  beta1, beta2
    (0.0,  0.1,  8, 10, 0.005, 0.9, 0.99),
    (0.0,  0.2,  8, 10, 0.005, 0.9, 0.99),
    (0.0,  0.5, 14, 10, 0.006, 0.9, 0.99),
    (0.0,  1.0, 16, 10, 0.004, 0.5, 0.99),
    (0.05, 0.1,  8, 10, 0.008, 0.9, 0.99),
    (0.05, 0.2,  8, 12, 0.005, 0.5, 0.999),
    (0.05, 0.5, 14, 10, 0.007, 0.9, 0.99),
    (0.05, 1.0, 16, 10, 0.006, 0.5, 0.9),
])

_register("pendulum", [
    (0.0,  0.1,  8, 10, 0.005, 0.9, 0.99),
    (0.0,  0.2,  8, 10, 0.005, 0.9, 0.99),
    (0.0,  0.5,  8, 10, 0.004, 0.5, 0.99),
    (0.0,  1.0, 12, 10, 0.004, 0.5, 0.9),
    (0.05, 0.1,  8, 10, 0.008, 0.9, 0.99),
    (0.05, 0.2,  8, 10, 0.005, 0.5, 0.99),
    (0.05, 0.5,  8, 10, 0.004, 0.5, 0.99),
    (0.05, 1.0, 12, 10, 0.005, 0.5, 0.9),
])

_register("wave", [
    (0.0,  0.1, 7, 10, 0.01,  0.9, 0.999),
    (0.0,  0.2, 5, 17, 6e-5,  0.0, 0.999),
    (0.0,  0.5, 4, 20, 8e-5,  0.0, 0.999),
    (0.0,  1.0, 7, 30, 4e-5,  0.0, 0.999),
    (0.05, 0.1, 8, 12, 0.012, 0.9, 0.999),
    (0.05, 0.2, 5, 17, 1e-4,  0.0, 0.999),
    (0.05, 0.5, 4, 20, 1e-4,  0.0, 0.999),
    (0.05, 1.0, 7, 30, 5e-5,  0.0, 0.999),
])


def resolve(experiment: str, training_noise: float,
            signal_noise: float) -> TuningPreset:
    key = (experiment, training_noise, signal_noise)
    if key not in _TABLE:
        known = sorted({k[0] for k in _TABLE})
        raise ValidationError(
            f"no tuning preset for {key}; experiments: {known}, presets exist "
            f"for training noise 0.0/0.05 and signal noise 0.1/0.2/0.5/1.0")
    return _TABLE[key]


def available() -> list[tuple[str, float, float]]:
    return sorted(_TABLE)
