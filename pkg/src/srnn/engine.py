"""Clock-driven simulation of the recurrent middle layer.

Within one ``dt`` the order is fixed:

  a. decay every synaptic current
  b. deliver the spikes emitted one step earlier (recurrent and input alike);
     plastic E->E deliveries run SDSP against the target's pre-integration V_mem
  c. integrate membranes (refractory neurons are clamped at V_reset)
  d. fire, reset and start the refractory period
  e. decay calcium traces, add one per spike
  f. stepwise IP for every excitatory neuron that fired

Neuron state is carried across bins and phases and is never reset.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .config import SimConfig, to_flat, update_flat
from .anomaly import deviation
from .encoding import ecg_to_rate, generate_poisson_bin, steps_per_bin
from .neuron import NeuronState
from .readout import ReadoutModel, predict
from .topology import Topology, build_network

log = logging.getLogger(__name__)


@dataclass
class BinRecord:
    k: int
    E_input: float
    F_in: float
    counts: np.ndarray  # spikes per excitatory neuron in this bin
    inh_counts: np.ndarray
    input_count: int = 0  # total input-layer spikes in this bin
    F_out: float | None = None
    D: float | None = None

    def rates(self, T_bin: float) -> np.ndarray:
        return self.counts / T_bin


@dataclass
class Network:
    """Mutable state of one simulation instance.

    Middle-layer arrays are indexed E first, then I.
    """

    cfg: SimConfig
    topology: Topology
    V: np.ndarray
    I: np.ndarray
    refr: np.ndarray
    C: np.ndarray
    thr: np.ndarray
    lup: np.ndarray
    ldown: np.ndarray
    pending: np.ndarray
    pending_in: np.ndarray
    # recurrent CSR, ordered by source
    rec_ptr: np.ndarray
    rec_dst: np.ndarray
    rec_w: np.ndarray
    rec_sign: np.ndarray
    rec_plastic: np.ndarray
    rec_order: np.ndarray  # rec position -> (class offset) index into concatenated EE|EI|IE
    in_ptr: np.ndarray
    in_dst: np.ndarray
    in_w: np.ndarray
    rng: np.random.Generator
    steps: int = 0
    consts: dict = field(default_factory=dict)

    @property
    def n_exc(self) -> int:
        return self.topology.config.n_exc

    @classmethod
    def create(cls, cfg: SimConfig, topology: Topology | None = None) -> Network:
        topo = topology if topology is not None else build_network(cfg.topology)
        if topo.config.n_input != cfg.encoder.n_input:
            raise ValueError("topology and encoder disagree on n_input")
        tc = topo.config
        n_e, n_i = tc.n_exc, tc.n_inh
        N = n_e + n_i
        ee, ei, ie = topo.edges["EE"], topo.edges["EI"], topo.edges["IE"]
        src = np.concatenate([ee.src, ei.src, n_e + ie.src])
        dst = np.concatenate([ee.dst, n_e + ei.dst, ie.dst])
        w = np.concatenate([ee.weight, ei.weight, ie.weight]).astype(float)
        sign = np.concatenate([np.ones(len(ee) + len(ei)), -np.ones(len(ie))])
        plastic = np.concatenate([np.ones(len(ee), bool), np.zeros(len(ei) + len(ie), bool)])
        order = np.argsort(src, kind="stable")
        rec_ptr = np.zeros(N + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=N), out=rec_ptr[1:])
        ine = topo.edges["in_E"]
        in_order = np.argsort(ine.src, kind="stable")
        in_ptr = np.zeros(tc.n_input + 1, dtype=np.int64)
        np.cumsum(np.bincount(ine.src, minlength=tc.n_input), out=in_ptr[1:])

        thr0 = cfg.V_thr_init
        net = cls(
            cfg=cfg, topology=topo,
            V=np.full(N, 0.0), I=np.zeros(N), refr=np.zeros(N, dtype=np.int64),
            C=np.zeros(N), thr=np.full(N, thr0), lup=np.full(N, thr0 / 2),
            ldown=np.full(N, thr0 / 2),
            pending=np.zeros(N, dtype=bool), pending_in=np.zeros(tc.n_input, dtype=bool),
            rec_ptr=rec_ptr, rec_dst=dst[order].astype(np.int64), rec_w=w[order],
            rec_sign=sign[order], rec_plastic=plastic[order], rec_order=order,
            in_ptr=in_ptr, in_dst=ine.dst[in_order].astype(np.int64),
            in_w=ine.weight[in_order].astype(float),
            rng=np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x5eed])),
        )
        net.V[:n_e] = cfg.exc.V_reset
        net.V[n_e:] = cfg.inh.V_reset
        net._build_consts()
        return net

    def _build_consts(self) -> None:
        cfg = self.cfg
        n_e = self.n_exc
        N = len(self.V)
        dt = cfg.dt
        per = [cfg.exc] * n_e + [cfg.inh] * (N - n_e)
        ref_steps = []
        for p in per:
            r = p.t_ref / dt
            if abs(r - round(r)) > 1e-6:
                raise ValueError(f"dt = {dt} does not divide t_ref = {p.t_ref}")
            ref_steps.append(int(round(r)))
        self.consts = dict(
            decay_mem=np.array([math.exp(-dt / p.tau_mem) for p in per]),
            R=np.array([p.R for p in per]),
            V_reset=np.array([p.V_reset for p in per]),
            ref_steps=np.array(ref_steps, dtype=np.int64),
            decay_ca=np.array([math.exp(-dt / p.tau_ip) for p in per]),
            is_exc=np.array([p.is_excitatory for p in per], dtype=bool),
        )

    # --- views -----------------------------------------------------------

    def class_weights(self) -> dict[str, np.ndarray]:
        """Current recurrent weights per class, in topology edge order."""
        flat = np.empty_like(self.rec_w)
        flat[self.rec_order] = self.rec_w
        e = self.topology.edges
        a, b = len(e["EE"]), len(e["EE"]) + len(e["EI"])
        return {"EE": flat[:a], "EI": flat[a:b], "IE": flat[b:]}

    def neuron_state(self, i: int) -> NeuronState:
        return NeuronState(V_mem=float(self.V[i]), V_thr=float(self.thr[i]),
                           V_lthr_up=float(self.lup[i]), V_lthr_down=float(self.ldown[i]),
                           C_fire=float(self.C[i]),
                           refractory=float(self.refr[i]) * self.cfg.dt)

    def plastic_digest(self) -> str:
        """Hash of everything plasticity may change (weights and thresholds)."""
        h = hashlib.sha256()
        for a in (self.rec_w, self.thr, self.lup, self.ldown):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()

    # --- stepping --------------------------------------------------------

    def run_steps(self, input_spikes: np.ndarray, plastic: bool) -> np.ndarray:
        """Advance ``len(input_spikes)`` steps; return per-neuron spike counts."""
        cfg = self.cfg
        syn, ip = cfg.synapse, cfg.ip
        counts = np.zeros(len(self.V), dtype=np.int64)
        spikes = np.ascontiguousarray(input_spikes, dtype=bool)
        if spikes.ndim != 2 or spikes.shape[1] != len(self.pending_in):
            raise ValueError("input spikes must have shape (n_steps, n_input)")
        c = self.consts
        _kernel.run_steps(
            spikes,
            self.V, self.I, self.refr, self.C, self.thr, self.lup, self.ldown,
            self.pending, self.pending_in, counts,
            self.rec_ptr, self.rec_dst, self.rec_w, self.rec_sign, self.rec_plastic,
            self.in_ptr, self.in_dst, self.in_w,
            c["decay_mem"], c["R"], c["V_reset"], c["ref_steps"], c["decay_ca"], c["is_exc"],
            math.exp(-cfg.dt / syn.tau_syn), syn.alpha, syn.lr_sdsp, syn.W_max,
            bool(plastic and syn.sdsp_enabled),
            bool(plastic and ip.ip_enabled), ip.thr_step, ip.V_thr_min, float(ip.n_levels),
            ip.learning_step, ip.threshold_sync, ip.upper_band, ip.lower_band,
            ip.use_post_increment,
        )
        self.steps += len(spikes)
        return counts

    def step(self, input_spikes: np.ndarray, plastic: bool = False) -> np.ndarray:
        """One ``dt``; returns the indices of neurons that fired."""
        counts = self.run_steps(np.asarray(input_spikes, dtype=bool).reshape(1, -1), plastic)
        return np.flatnonzero(counts)

    def run_bin(self, E_input: float, k: int = 0, plastic: bool = False) -> BinRecord:
        cfg = self.cfg
        enc = cfg.encoder
        rate = ecg_to_rate(E_input, enc.F_poisson)
        if rate * cfg.dt > 0.1:
            log.warning("rate*dt = %.3g exceeds 0.1; Bernoulli thinning is coarse", rate * cfg.dt)
        spikes = generate_poisson_bin(rate, enc.T_bin, cfg.dt, self.rng, n=enc.n_input)
        counts = self.run_steps(spikes, plastic)
        n_e = self.n_exc
        return BinRecord(k=k, E_input=float(E_input), F_in=rate, counts=counts[:n_e],
                         inh_counts=counts[n_e:], input_count=int(spikes.sum()))

    def run_waveform(self, samples, plastic: bool = False) -> list[BinRecord]:
        steps_per_bin(self.cfg.encoder.T_bin, self.cfg.dt)
        return [self.run_bin(x, k, plastic) for k, x in enumerate(samples)]

    # --- checkpoint ------------------------------------------------------

    def dumps(self) -> str:
        state = {
            "format": "srnn-checkpoint-1",
            "config": to_flat(self.cfg),
            "steps": self.steps,
            "rng": self.rng.bit_generator.state,
        }
        for name in ("V", "I", "refr", "C", "thr", "lup", "ldown", "pending", "pending_in",
                     "rec_w"):
            state[name] = getattr(self, name).tolist()
        state["in_w"] = self.in_w.tolist()
        return json.dumps(state, indent=None, separators=(",", ":")) + "\n"

    @classmethod
    def loads(cls, text: str, topology: Topology | None = None) -> Network:
        state = json.loads(text)
        if state.get("format") != "srnn-checkpoint-1":
            raise ValueError("not an srnn checkpoint")
        cfg = update_flat(SimConfig(), state["config"])
        net = cls.create(cfg, topology)
        for name in ("V", "I", "C", "thr", "lup", "ldown", "rec_w", "in_w"):
            arr = np.array(state[name], dtype=float)
            if arr.shape != getattr(net, name).shape:
                raise ValueError(f"checkpoint field {name} has the wrong shape")
            setattr(net, name, arr)
        net.refr = np.array(state["refr"], dtype=np.int64)
        net.pending = np.array(state["pending"], dtype=bool)
        net.pending_in = np.array(state["pending_in"], dtype=bool)
        net.rng.bit_generator.state = state["rng"]
        net.steps = int(state["steps"])
        return net


# --- phases --------------------------------------------------------------

def run_phase1(net: Network, samples, passes: int | None = None) -> list[BinRecord]:
    """Unsupervised reconstruction: SDSP and IP as enabled in the config."""
    passes = net.cfg.train_passes if passes is None else passes
    records = []
    for _ in range(passes):
        records.extend(net.run_waveform(samples, plastic=True))
    return records


def run_frozen(net: Network, samples) -> list[BinRecord]:
    return net.run_waveform(samples, plastic=False)


def readout_dataset(records: list[BinRecord], T_bin: float) -> tuple[np.ndarray, np.ndarray]:
    """Rows pair bin-k excitatory rates with the next bin's input rate."""
    if len(records) < 2:
        raise ValueError("need at least two bins")
    X = np.array([r.rates(T_bin) for r in records[:-1]])
    y = np.array([r.F_in for r in records[1:]])
    return X, y


def run_phase3(net: Network, samples, model: ReadoutModel,
               d_metric_input: str | None = None) -> list[BinRecord]:
    """Frozen test pass; fills ``F_out`` and ``D``.

    ``D`` of bin k+1 compares the prediction made from bin k with the input
    rate of bin k+1.  Bin 0 has no prediction and keeps ``D = None``.
    """
    if len(samples) < 2:
        raise ValueError("test waveform needs at least 2 samples")
    mode = d_metric_input or net.cfg.d_metric_input
    T_bin = net.cfg.encoder.T_bin
    records = run_frozen(net, samples)
    for prev, cur in zip(records[:-1], records[1:]):
        prev.F_out = predict(model, prev.rates(T_bin))
        if mode == "target":
            f_in = cur.F_in
        else:
            f_in = cur.input_count / (net.cfg.encoder.n_input * T_bin)
        cur.D = deviation(prev.F_out, f_in)
    records[-1].F_out = predict(model, records[-1].rates(T_bin))
    return records
