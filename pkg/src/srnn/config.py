"""Simulation configuration and its ``key = value`` text form.

Nested configs flatten to dotted keys (``synapse.alpha = 5e-11``).  Unknown
keys are rejected so a typo never silently falls back to a default.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, replace
from typing import Any

from .encoding import EncoderConfig
from .neuron import IpConfig, NeuronParams
from .synapse import SynapseParams
from .topology import TopologyConfig

D_METRIC_INPUTS = ("target", "realized")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-4
    exc: NeuronParams = field(default_factory=NeuronParams)
    inh: NeuronParams = field(default_factory=lambda: NeuronParams(is_excitatory=False))
    synapse: SynapseParams = field(default_factory=SynapseParams)
    ip: IpConfig = field(default_factory=IpConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    V_thr_init: float = 0.2
    train_passes: int = 3
    ridge: float = 2e-3
    guard: int = 2
    d_metric_input: str = "target"
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.encoder.n_input != self.topology.n_input:
            raise ValueError(
                f"encoder.n_input ({self.encoder.n_input}) != topology.n_input "
                f"({self.topology.n_input})")
        if self.d_metric_input not in D_METRIC_INPUTS:
            raise ValueError(f"d_metric_input must be one of {D_METRIC_INPUTS}")
        if self.train_passes < 0 or self.guard < 0 or self.ridge < 0:
            raise ValueError("train_passes, guard and ridge must be non-negative")
        if not self.ip.V_thr_min <= self.V_thr_init <= self.ip.V_thr_max:
            raise ValueError("V_thr_init outside the IP range")

    def with_plasticity(self, sdsp: bool, ip: bool) -> SimConfig:
        return replace(self, synapse=replace(self.synapse, sdsp_enabled=sdsp),
                       ip=replace(self.ip, ip_enabled=ip))

    def with_n_input(self, n: int) -> SimConfig:
        return replace(self, encoder=replace(self.encoder, n_input=n),
                       topology=replace(self.topology, n_input=n))


def to_flat(cfg) -> dict[str, Any]:
    flat = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            for k, v in to_flat(value).items():
                flat[f"{f.name}.{k}"] = v
        else:
            flat[f.name] = value
    return flat


def _parse_scalar(text: str, current: Any, key: str) -> Any:
    text = text.strip()
    if isinstance(current, bool) or current is None and text in ("true", "false", "True", "False"):
        if text.lower() not in ("true", "false", "1", "0", "yes", "no", "on", "off"):
            raise ValueError(f"{key}: expected a boolean, got {text!r}")
        return text.lower() in ("true", "1", "yes", "on")
    if current is None:
        return None if text in ("", "none", "None") else float(text)
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    return text


def update_flat(cfg, overrides: dict[str, Any]):
    """Return a copy of ``cfg`` with dotted-key overrides applied.

    String values are parsed against the type of the current value.
    """
    known = to_flat(cfg)
    for key in overrides:
        if key not in known:
            raise KeyError(f"unknown config key {key!r}")
    return _apply(cfg, overrides, "")


def _apply(cfg, overrides, prefix):
    changes = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        key = prefix + f.name
        if dataclasses.is_dataclass(value):
            sub = {k: v for k, v in overrides.items() if k.startswith(key + ".")}
            if sub:
                changes[f.name] = _apply(value, sub, key + ".")
        elif key in overrides:
            new = overrides[key]
            if isinstance(new, str):
                new = _parse_scalar(new, value, key)
            changes[f.name] = new
    return replace(cfg, **changes) if changes else cfg


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def dumps_kv(flat: dict[str, Any]) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in flat.items())


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def load_sim_config(text: str, base: SimConfig | None = None) -> SimConfig:
    return update_flat(base or SimConfig(), parse_kv(text))
