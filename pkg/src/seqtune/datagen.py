"""Seeded generators for the three benchmark systems plus noise injection.

All generators are pure functions of (spec, seed): same inputs, bit-identical
datasets.  Clean and noisy channels live side by side in a ``Dataset``;
"noise ratio r" always means additive Gaussian noise whose standard deviation
is r times the standard deviation of the clean values of the whole split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractViolation, NumericError, ValidationError

TRAINING_NOISE_GRID = (0.0, 0.05, 0.1, 0.2, 0.5, 1.0)

MSO_DEFAULT_FREQUENCIES = (0.2, 0.311, 0.42, 0.51, 0.63)


@dataclass
class Dataset:
    """Aligned clean/noisy sequence arrays plus generator metadata.

    clean/noisy: (samples, T, channels) for signal experiments,
    (samples, T, rows, cols) for the wave field.
    """

    experiment: str
    clean: np.ndarray
    noisy: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.clean.shape != self.noisy.shape:
            raise ContractViolation(
                f"clean {self.clean.shape} and noisy {self.noisy.shape} differ")

    @property
    def samples(self) -> int:
        return self.clean.shape[0]

    @property
    def length(self) -> int:
        return self.clean.shape[1]


# ---------------------------------------------------------------------------
# multi-superimposed oscillator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MsoSpec:
    frequencies: tuple[float, ...] = MSO_DEFAULT_FREQUENCIES
    amplitudes: Optional[tuple[float, ...]] = None  # None: U[0,1] per sample
    phases: Optional[tuple[float, ...]] = None      # None: U[0,2pi) per sample
    length: int = 400
    seed: int = 0

    def __post_init__(self):
        n = len(self.frequencies)
        for name in ("amplitudes", "phases"):
            vals = getattr(self, name)
            if vals is not None and len(vals) != n:
                raise ValidationError(
                    f"{name} has {len(vals)} entries for {n} waves")
        if self.length < 1:
            raise ValidationError("length must be >= 1")


def mso_signal(t: np.ndarray, amplitudes: np.ndarray, frequencies: np.ndarray,
               phases: np.ndarray) -> np.ndarray:
    """sum_i a_i * sin(f_i * t + phi_i), evaluated at the given steps."""
    return np.sin(np.multiply.outer(t, frequencies) + phases) @ amplitudes


def gen_mso(spec: MsoSpec, count: int) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    n = len(spec.frequencies)
    freqs = np.asarray(spec.frequencies, dtype=np.float64)
    t = np.arange(spec.length, dtype=np.float64)
    clean = np.empty((count, spec.length, 1))
    for s in range(count):
        amps = (np.asarray(spec.amplitudes, dtype=np.float64)
                if spec.amplitudes is not None else rng.uniform(0.0, 1.0, n))
        phis = (np.asarray(spec.phases, dtype=np.float64)
                if spec.phases is not None else rng.uniform(0.0, 2.0 * np.pi, n))
        clean[s, :, 0] = mso_signal(t, amps, freqs, phis)
    meta = {"generator": "mso", "frequencies": list(spec.frequencies),
            "length": spec.length, "seed": spec.seed, "channels": 1}
    return Dataset("mso", clean, clean.copy(), meta)


# ---------------------------------------------------------------------------
# chaotic double pendulum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PendulumSpec:
    l1: float = 1.0
    l2: float = 1.0
    m1: float = 1.0
    m2: float = 1.0
    gravity: float = 9.81
    step: float = 0.01
    length: int = 400
    seed: int = 0
    channels: str = "end_effector"  # or "angles"
    zero_momentum_every: int = 10   # every k-th sample starts at rest

    def __post_init__(self):
        if min(self.l1, self.l2, self.m1, self.m2) <= 0:
            raise ValidationError("masses and lengths must be positive")
        if self.step <= 0:
            raise ValidationError("integration step must be positive")
        if self.channels not in ("end_effector", "angles"):
            raise ValidationError(f"unknown channel mode {self.channels!r}")

    # derived quantities, recomputed on access so they can never go stale
    @property
    def length_ratio(self) -> float:
        return self.l1 / self.l2

    @property
    def g1(self) -> float:
        return self.gravity / self.l1

    @property
    def g2(self) -> float:
        return self.gravity / self.l2

    @property
    def mass_fraction(self) -> float:
        return self.m2 / (self.m1 + self.m2)


def pendulum_accelerations(state: np.ndarray, spec: PendulumSpec) -> np.ndarray:
    """Angular accelerations (th1'', th2'') of the double pendulum.

    ``state`` is (..., 4) rows of (th1, th2, th1', th2').  Vectorized over
    leading axes.
    """
    state = np.asarray(state, dtype=np.float64)
    if not np.all(np.isfinite(state)):
        raise NumericError("non-finite pendulum state")
    th1, th2, w1, w2 = (state[..., i] for i in range(4))
    mu, lam = spec.mass_fraction, spec.length_ratio
    g1, g2 = spec.g1, spec.g2
    d = th2 - th1
    sd, cd = np.sin(d), np.cos(d)
    den = 1.0 - mu * cd ** 2
    a1 = (mu * g1 * np.sin(th2) * cd + mu * w1 ** 2 * sd * cd
          - g1 * np.sin(th1) + (mu / lam) * w2 ** 2 * sd) / den
    a2 = (g2 * np.sin(th1) * cd - mu * w2 ** 2 * sd * cd
          - g2 * np.sin(th2) - lam * w1 ** 2 * sd) / den
    return np.stack([a1, a2], axis=-1)


def _pendulum_derivative(state: np.ndarray, spec: PendulumSpec) -> np.ndarray:
    acc = pendulum_accelerations(state, spec)
    return np.concatenate([state[..., 2:4], acc], axis=-1)


def rk4_step(state: np.ndarray, spec: PendulumSpec, h: float) -> np.ndarray:
    """Classical RK4 on the first-order system (th, th')."""
    if h <= 0:
        raise ValidationError("step size must be positive")
    k1 = _pendulum_derivative(state, spec)
    k2 = _pendulum_derivative(state + 0.5 * h * k1, spec)
    k3 = _pendulum_derivative(state + 0.5 * h * k2, spec)
    k4 = _pendulum_derivative(state + h * k3, spec)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def pendulum_energy(state: np.ndarray, spec: PendulumSpec) -> np.ndarray:
    """Total mechanical energy (angles measured from the hanging position)."""
    th1, th2, w1, w2 = (state[..., i] for i in range(4))
    l1, l2, m1, m2, g = spec.l1, spec.l2, spec.m1, spec.m2, spec.gravity
    kinetic = (0.5 * (m1 + m2) * l1 ** 2 * w1 ** 2
               + 0.5 * m2 * l2 ** 2 * w2 ** 2
               + m2 * l1 * l2 * w1 * w2 * np.cos(th1 - th2))
    potential = (-(m1 + m2) * g * l1 * np.cos(th1)
                 - m2 * g * l2 * np.cos(th2))
    return kinetic + potential


def end_effector(th1: np.ndarray, th2: np.ndarray,
                 spec: PendulumSpec) -> np.ndarray:
    x = spec.l1 * np.sin(th1) + spec.l2 * np.sin(th2)
    y = -spec.l1 * np.cos(th1) - spec.l2 * np.cos(th2)
    return np.stack([x, y], axis=-1)


def gen_pendulum(spec: PendulumSpec, count: int) -> Dataset:
    """Simulated trajectories, one RK4 step per recorded time step.

    Start angles: th1 ~ U[90deg, 270deg], th2 ~ th1 +- 30deg.  Every k-th
    sample starts at rest; the others draw angular velocities U[-1, 1].
    """
    rng = np.random.default_rng(spec.seed)
    th1 = rng.uniform(np.deg2rad(90.0), np.deg2rad(270.0), count)
    th2 = th1 + rng.uniform(-np.deg2rad(30.0), np.deg2rad(30.0), count)
    vel = rng.uniform(-1.0, 1.0, (count, 2))
    vel[::spec.zero_momentum_every] = 0.0
    state = np.concatenate([np.stack([th1, th2], axis=1), vel], axis=1)

    angles = np.empty((count, spec.length, 2))
    for t in range(spec.length):
        angles[:, t, 0] = state[:, 0]
        angles[:, t, 1] = state[:, 1]
        state = rk4_step(state, spec, spec.step)
    if spec.channels == "end_effector":
        clean = end_effector(angles[..., 0], angles[..., 1], spec)
    else:
        clean = angles
    meta = {"generator": "pendulum", "channels": spec.channels,
            "length": spec.length, "seed": spec.seed, "step": spec.step,
            "reach": spec.l1 + spec.l2,
            "value_min": float(clean.min()), "value_max": float(clean.max())}
    return Dataset("pendulum", clean, clean.copy(), meta)


# ---------------------------------------------------------------------------
# 2-D wave field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WaveSpec:
    rows: int = 16
    cols: int = 16
    speed: float = 3.0
    h_t: float = 0.1
    h_x: float = 1.0
    h_y: float = 1.0
    length: int = 80
    seed: int = 0
    amplitude_range: tuple[float, float] = (0.5, 1.5)
    width_range: tuple[float, float] = (1.0, 3.0)

    def __post_init__(self):
        courant = self.speed * self.h_t * math.sqrt(
            1.0 / self.h_x ** 2 + 1.0 / self.h_y ** 2)
        if courant > 1.0:
            raise ValidationError(
                f"unstable discretization: c*h_t*sqrt(1/hx^2+1/hy^2) = "
                f"{courant:.3f} > 1")


def wave_step(u_prev: np.ndarray, u_curr: np.ndarray,
              spec: WaveSpec) -> np.ndarray:
    """One central-difference update; out-of-grid neighbours contribute 0,
    which makes waves reflect at the borders."""
    if u_prev.shape != u_curr.shape or u_curr.shape[-2:] != (spec.rows, spec.cols):
        raise ContractViolation(
            f"field shapes {u_prev.shape}/{u_curr.shape} do not match grid "
            f"{(spec.rows, spec.cols)}")
    lap = np.zeros_like(u_curr)
    lap[..., 1:, :] += u_curr[..., :-1, :]
    lap[..., :-1, :] += u_curr[..., 1:, :]
    lap -= 2.0 * u_curr
    lap /= spec.h_x ** 2
    lap_y = np.zeros_like(u_curr)
    lap_y[..., :, 1:] += u_curr[..., :, :-1]
    lap_y[..., :, :-1] += u_curr[..., :, 1:]
    lap_y -= 2.0 * u_curr
    lap_y /= spec.h_y ** 2
    return (spec.speed ** 2 * spec.h_t ** 2) * (lap + lap_y) \
        + 2.0 * u_curr - u_prev


def wave_laplacian(u: np.ndarray, spec: WaveSpec) -> np.ndarray:
    """Discrete Laplacian with zero ghost cells (as used by wave_step)."""
    return (wave_step(np.zeros_like(u), u, spec) - 2.0 * u) \
        / (spec.speed ** 2 * spec.h_t ** 2)


def wave_energy(u_prev: np.ndarray, u_curr: np.ndarray,
                spec: WaveSpec) -> float:
    """Discrete energy of the leapfrog scheme (exactly conserved)."""
    v = (u_curr - u_prev) / spec.h_t
    kinetic = 0.5 * float(np.sum(v ** 2))
    potential = -0.5 * spec.speed ** 2 * float(
        np.sum(u_curr * wave_laplacian(u_prev, spec)))
    return kinetic + potential


def gen_wave(spec: WaveSpec, count: int) -> Dataset:
    """Wave fields started from one Gaussian bump with zero initial velocity."""
    rng = np.random.default_rng(spec.seed)
    yy, xx = np.mgrid[0:spec.rows, 0:spec.cols].astype(np.float64)
    clean = np.empty((count, spec.length, spec.rows, spec.cols))
    for s in range(count):
        cy = rng.uniform(0, spec.rows - 1)
        cx = rng.uniform(0, spec.cols - 1)
        amp = rng.uniform(*spec.amplitude_range)
        width = rng.uniform(*spec.width_range)
        u = amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * width ** 2))
        u_prev = u.copy()
        for t in range(spec.length):
            clean[s, t] = u
            u, u_prev = wave_step(u_prev, u, spec), u
    meta = {"generator": "wave", "rows": spec.rows, "cols": spec.cols,
            "length": spec.length, "seed": spec.seed, "speed": spec.speed,
            "h_t": spec.h_t}
    return Dataset("wave", clean, clean.copy(), meta)


# ---------------------------------------------------------------------------
# noise injection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "gaussian"  # or "salt_and_pepper"
    ratio: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "salt_and_pepper"):
            raise ValidationError(f"unknown noise kind {self.kind!r}")
        if self.ratio < 0:
            raise ValidationError(f"noise ratio must be >= 0, got {self.ratio}")


def noisy_channel(clean: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """Noisy copy of ``clean``; statistics are taken over the whole array."""
    if spec.ratio == 0.0:
        return clean.copy()
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "gaussian":
        std = spec.ratio * float(np.std(clean))
        return clean + rng.normal(0.0, std, clean.shape)
    # salt & pepper: ratio/2 of the values each to the dataset min / max
    noisy = clean.copy()
    u = rng.random(clean.shape)
    noisy[u < spec.ratio / 2.0] = float(clean.min())
    noisy[u > 1.0 - spec.ratio / 2.0] = float(clean.max())
    return noisy


def add_noise(dataset: Dataset, spec: NoiseSpec) -> Dataset:
    """New dataset with the noisy channel filled per ``spec``."""
    noisy = noisy_channel(dataset.clean, spec)
    meta = dict(dataset.meta)
    meta["noise"] = {"kind": spec.kind, "ratio": spec.ratio, "seed": spec.seed}
    return Dataset(dataset.experiment, dataset.clean, noisy, meta)


GENERATORS = {"mso": gen_mso, "pendulum": gen_pendulum, "wave": gen_wave}
