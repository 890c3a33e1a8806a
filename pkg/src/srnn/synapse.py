"""Exponential synaptic current and the spike-driven plasticity (SDSP) rule."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

EXCITATORY = 1
INHIBITORY = -1


@dataclass(frozen=True)
class SynapseParams:
    tau_syn: float = 5e-3
    alpha: float = 6e-11  # ampere per unit weight
    W_max: float = 2.0
    lr_sdsp: float = 0.1
    sdsp_enabled: bool = True

    def __post_init__(self):
        if not (self.tau_syn > 0 and self.alpha > 0 and self.W_max > 0):
            raise ValueError("tau_syn, alpha and W_max must be positive")
        if not 0 < self.lr_sdsp <= self.W_max:
            raise ValueError("lr_sdsp must lie in (0, W_max]")
        n = self.W_max / self.lr_sdsp
        if abs(n - round(n)) > 1e-9:
            raise ValueError(f"lr_sdsp {self.lr_sdsp} does not divide W_max {self.W_max}")

    @property
    def n_levels(self) -> int:
        return int(round(self.W_max / self.lr_sdsp))


@dataclass(frozen=True)
class EdgeWeight:
    W: float = 1.0
    plastic: bool = False
    sign: int = EXCITATORY

    def __post_init__(self):
        if self.W < 0:
            raise ValueError("weights are stored non-negative; use sign for inhibition")
        if self.plastic and self.sign != EXCITATORY:
            raise ValueError("only excitatory edges can be plastic")


def decay_current(I_syn: float, params: SynapseParams, dt: float) -> float:
    if not dt > 0:
        raise ValueError("dt must be positive")
    return I_syn * math.exp(-dt / params.tau_syn)


def inject_spike(I_syn: float, edge: EdgeWeight, params: SynapseParams) -> float:
    return I_syn + edge.sign * params.alpha * edge.W


def sdsp_weight(W: float, V_post: float, V_lthr_up: float, V_lthr_down: float,
                lr: float, W_max: float) -> float:
    """Bare SDSP update on a weight value.

    On-grid weights are stepped by integer level so repeated updates never
    drift off ``n * lr``.  An off-grid start (1.0 under lr = 2.0) takes the
    literal clamped step, which lands on the grid.
    """
    if V_post > V_lthr_up:
        step = 1
    elif V_post < V_lthr_down:
        step = -1
    else:
        return W
    level = W / lr
    n = math.floor(level + 0.5)
    if abs(level - n) > 1e-9:
        return min(W + lr, W_max) if step > 0 else max(W - lr, 0.0)
    return min(max(n + step, 0), math.floor(W_max / lr + 0.5)) * lr


def apply_sdsp(edge: EdgeWeight, V_post: float, V_lthr_up: float, V_lthr_down: float,
               params: SynapseParams) -> EdgeWeight:
    if not edge.plastic:
        return edge
    W = sdsp_weight(edge.W, V_post, V_lthr_up, V_lthr_down, params.lr_sdsp, params.W_max)
    return edge if W == edge.W else replace(edge, W=W)
