"""Rate coding of ECG samples into Bernoulli-per-step Poisson spike trains."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RATE_CEILING = 1.2  # upper clamp, as a multiple of F_poisson


@dataclass(frozen=True)
class EncoderConfig:
    F_poisson: float = 150.0
    T_bin: float = 150e-3
    n_input: int = 100

    def __post_init__(self):
        if not (self.F_poisson > 0 and self.T_bin > 0):
            raise ValueError("F_poisson and T_bin must be positive")


def ecg_to_rate(E_input, F_poisson: float):
    """Affine mV -> Hz map: -2 mV gives 0 Hz, +0.5 mV gives F_poisson.

    Clamped to [0, 1.2 F_poisson].  Works on scalars and arrays.
    """
    rate = F_poisson * (4.0 + 2.0 * np.asarray(E_input, dtype=float)) / 5.0
    rate = np.clip(rate, 0.0, RATE_CEILING * F_poisson)
    return float(rate) if rate.ndim == 0 else rate


def check_rate(rate: float, dt: float) -> None:
    if rate < 0:
        raise ValueError(f"negative rate {rate}")
    if rate * dt >= 1.0:
        raise ValueError(f"rate*dt = {rate * dt:.3g} >= 1; decrease dt")


def generate_poisson_bin(rate: float, T_bin: float, dt: float, rng: np.random.Generator,
                         n: int | None = None) -> np.ndarray:
    """Per-step spike flags, each step firing with probability ``rate * dt``.

    With ``n`` given, returns an ``(n_steps, n)`` array of independent trains.
    """
    check_rate(rate, dt)
    n_steps = steps_per_bin(T_bin, dt)
    shape = (n_steps,) if n is None else (n_steps, n)
    return rng.random(shape) < rate * dt


def steps_per_bin(T_bin: float, dt: float) -> int:
    n = T_bin / dt
    k = int(round(n))
    if k < 1 or abs(n - k) > 1e-6:
        raise ValueError(f"dt = {dt} does not divide T_bin = {T_bin}")
    return k


def measure_rate(spike_count, T_bin: float):
    if not T_bin > 0:
        raise ValueError("T_bin must be positive")
    return np.asarray(spike_count) / T_bin if np.ndim(spike_count) else spike_count / T_bin
