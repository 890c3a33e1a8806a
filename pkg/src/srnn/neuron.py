"""LIF neuron dynamics with a calcium activity trace and event-driven stepwise IP.

The membrane obeys ``C dV/dt = I_in - V/R`` and is advanced with exponential
Euler, which is exact for input current held constant over a step.  Excitatory
neurons adapt their firing threshold in fixed steps when they fire, and the two
SDSP learning thresholds move with it by half a step so that
``V_Lthr_down <= V_Lthr_up < V_thr`` is preserved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class NeuronParams:
    R: float = 400e6  # ohm
    C: float = 10e-12  # farad
    V_reset: float = 0.0
    t_ref: float = 2e-3
    tau_ip: float = 100e-3
    is_excitatory: bool = True

    def __post_init__(self):
        if not (self.R > 0 and self.C > 0 and self.tau_ip > 0 and self.t_ref >= 0):
            raise ValueError("need R > 0, C > 0, tau_ip > 0 and t_ref >= 0")
        if not math.isfinite(self.R * self.C):
            raise ValueError("membrane time constant must be finite")

    @property
    def tau_mem(self) -> float:
        return self.R * self.C


@dataclass(frozen=True)
class IpConfig:
    """Stepwise threshold control.

    ``lthr_step`` defaults to half of ``thr_step``, which keeps both learning
    thresholds pinned at ``V_thr / 2``.  With ``threshold_sync`` off the
    learning thresholds never move, reproducing the unsynchronized rule.
    """

    thr_step: float = 0.05
    lthr_step: float | None = None
    C_ip: float = 6.0
    sigma: float = 0.3
    V_thr_min: float = 0.1
    V_thr_max: float = 0.4
    ip_enabled: bool = True
    threshold_sync: bool = True
    use_post_increment: bool = True

    def __post_init__(self):
        if not 0 < self.sigma < 2:
            raise ValueError("sigma must lie in (0, 2)")
        if not self.V_thr_min < self.V_thr_max:
            raise ValueError("V_thr_min must be below V_thr_max")
        if self.thr_step <= 0:
            raise ValueError("thr_step must be positive")
        n = (self.V_thr_max - self.V_thr_min) / self.thr_step
        if abs(n - round(n)) > 1e-9:
            raise ValueError(
                f"thr_step {self.thr_step} does not divide [{self.V_thr_min}, {self.V_thr_max}]")

    @property
    def learning_step(self) -> float:
        return self.thr_step / 2 if self.lthr_step is None else self.lthr_step

    @property
    def n_levels(self) -> int:
        return int(round((self.V_thr_max - self.V_thr_min) / self.thr_step))

    @property
    def upper_band(self) -> float:
        return (1 + self.sigma / 2) * self.C_ip

    @property
    def lower_band(self) -> float:
        return (1 - self.sigma / 2) * self.C_ip


@dataclass(frozen=True)
class NeuronState:
    V_mem: float = 0.0
    V_thr: float = 0.2
    V_lthr_up: float = 0.1
    V_lthr_down: float = 0.1
    C_fire: float = 0.0
    refractory: float = 0.0

    @classmethod
    def initial(cls, V_thr: float = 0.2, V_reset: float = 0.0) -> NeuronState:
        return cls(V_mem=V_reset, V_thr=V_thr, V_lthr_up=V_thr / 2, V_lthr_down=V_thr / 2)


def _check_dt(dt: float) -> None:
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be finite and positive, got {dt}")


def step_membrane(state: NeuronState, params: NeuronParams, I_in: float, dt: float) -> NeuronState:
    _check_dt(dt)
    if not math.isfinite(I_in):
        raise ValueError(f"input current must be finite, got {I_in}")
    if state.refractory > 0:
        remaining = state.refractory - dt
        # counting down in float leaves ~1e-19 residue after t_ref/dt steps
        if remaining < dt * 1e-6:
            remaining = 0.0
        return replace(state, V_mem=params.V_reset, refractory=remaining)
    decay = math.exp(-dt / params.tau_mem)
    V = state.V_mem * decay + I_in * params.R * (1.0 - decay)
    return replace(state, V_mem=V)


def check_fire(state: NeuronState, params: NeuronParams) -> tuple[NeuronState, bool]:
    if state.refractory > 0 or not state.V_mem > state.V_thr:
        return state, False
    return replace(state, V_mem=params.V_reset, refractory=params.t_ref), True


def update_calcium(state: NeuronState, params: NeuronParams, fired: bool, dt: float) -> NeuronState:
    _check_dt(dt)
    C = state.C_fire * math.exp(-dt / params.tau_ip)
    if fired:
        C += 1.0
    return replace(state, C_fire=C)


def ip_direction(C_fire: float, ip: IpConfig) -> int:
    """+1 above the healthy band, -1 below it, 0 inside."""
    if C_fire > ip.upper_band:
        return 1
    if C_fire < ip.lower_band:
        return -1
    return 0


def apply_ip(state: NeuronState, ip: IpConfig) -> NeuronState:
    """Threshold update for a neuron that has just fired."""
    direction = ip_direction(state.C_fire, ip)
    if direction == 0:
        return state
    level = math.floor((state.V_thr - ip.V_thr_min) / ip.thr_step + 0.5)
    new_level = min(max(level + direction, 0), ip.n_levels)
    on_grid = abs(state.V_thr - (ip.V_thr_min + level * ip.thr_step)) < 1e-12
    if new_level == level and on_grid:
        return state
    V_thr = ip.V_thr_min + new_level * ip.thr_step
    if not ip.threshold_sync:
        return replace(state, V_thr=V_thr)
    # an off-grid start (0.2 V on the binary grid) snaps by less than a full step
    steps = new_level - level if on_grid else (V_thr - state.V_thr) / ip.thr_step
    shift = steps * ip.learning_step
    return replace(state, V_thr=V_thr,
                   V_lthr_up=state.V_lthr_up + shift,
                   V_lthr_down=state.V_lthr_down + shift)
