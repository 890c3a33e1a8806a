"""Three-phase experiment and parameter sweeps.

Phase 1 reconstructs the network without supervision on the training
waveform, phase 2 fits the linear readout on a frozen pass over the same
waveform, and phase 3 scores the test waveform.
"""
from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import readout as readout_io
from . import topology as topology_io
from .anomaly import AnnotatedSeries, MarginResult, annotate, margin
from .config import SimConfig, dumps_kv, to_flat
from .engine import BinRecord, Network, readout_dataset, run_frozen, run_phase1, run_phase3
from .ingestion import AnnotationSet, EcgSeries, make_synthetic_ecg, write_annotations, write_ecg_csv
from .readout import ReadoutModel, fit_readout, relative_lambda

log = logging.getLogger(__name__)

ABLATIONS = ("none", "sdsp_only", "sdsp_plus_ip")
S_LR = (0.1, 0.2, 0.5, 1.0, 2.0)
P_THR = (0.025, 0.05, 0.1, 0.3)
SWEEP_COLUMNS = ("lr_sdsp", "lr_thr", "t_bin", "n_input", "f_poisson", "seed",
                 "w_thr", "d_no_max", "d_ab_min", "error")


@dataclass
class Dataset:
    train: EcgSeries
    test: EcgSeries
    annotations: AnnotationSet


def synthetic_dataset(n_train_beats: int = 4, n_test_beats: int = 6,
                      anomalies=(2, 4), seed: int = 0) -> Dataset:
    train, _ = make_synthetic_ecg(n_train_beats, (), seed)
    test, ann = make_synthetic_ecg(n_test_beats, anomalies, seed + 1)
    return Dataset(train, test, ann)


def configure(cfg: SimConfig, ablation: str = "sdsp_plus_ip",
              threshold_sync: bool | None = None) -> SimConfig:
    if ablation not in ABLATIONS:
        raise ValueError(f"ablation must be one of {ABLATIONS}")
    cfg = cfg.with_plasticity(sdsp=ablation != "none", ip=ablation == "sdsp_plus_ip")
    if threshold_sync is not None:
        cfg = replace(cfg, ip=replace(cfg.ip, threshold_sync=threshold_sync))
    return cfg


@dataclass
class ExperimentResult:
    config: SimConfig
    ablation: str
    network: Network
    model: ReadoutModel
    test_records: list[BinRecord]
    series: AnnotatedSeries
    margin: MarginResult
    train_records: list[BinRecord] = field(default_factory=list)

    def max_bin_count(self) -> int:
        recs = self.train_records + self.test_records
        return max(int(max(r.counts.max(initial=0), r.inh_counts.max(initial=0))) for r in recs)


def fit_phase2(net: Network, samples) -> tuple[ReadoutModel, list[BinRecord]]:
    records = run_frozen(net, samples)
    X, y = readout_dataset(records, net.cfg.encoder.T_bin)
    model = fit_readout(X, y, relative_lambda(X, net.cfg.ridge))
    return model, records


def run_experiment(cfg: SimConfig, data: Dataset, ablation: str = "sdsp_plus_ip",
                   threshold_sync: bool | None = None,
                   out_dir: str | os.PathLike | None = None) -> ExperimentResult:
    cfg = configure(cfg, ablation, threshold_sync)
    net = Network.create(cfg)
    train_records = []
    if ablation != "none":
        train_records = run_phase1(net, data.train.values)
    model, phase2 = fit_phase2(net, data.train.values)
    train_records += phase2
    test = run_phase3(net, data.test.values, model)
    series = annotate([r.D for r in test], data.annotations, cfg.guard)
    result = ExperimentResult(cfg, ablation, net, model, test, series, margin(series),
                              train_records)
    if out_dir is not None:
        write_experiment(result, data, out_dir)
    return result


def write_experiment(result: ExperimentResult, data: Dataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(dumps_kv(to_flat(result.config)))
    (out / "topology.txt").write_text(topology_io.dumps(result.network.topology))
    (out / "checkpoint.json").write_text(result.network.dumps())
    (out / "readout.txt").write_text(readout_io.dumps(result.model))
    (out / "train.csv").write_text(write_ecg_csv(data.train))
    (out / "test.csv").write_text(write_ecg_csv(data.test))
    (out / "annotations.csv").write_text(write_annotations(data.annotations))
    emit_dk_trace(result.series.D, result.series.labels, out / "dk.csv")
    m = result.margin
    (out / "margin.json").write_text(json.dumps(
        {"ablation": result.ablation, "D_no_max": m.D_no_max, "D_ab_min": m.D_ab_min,
         "W_thr": m.W_thr, "F_thr": m.F_thr}, indent=2) + "\n")
    write_manifest(out, result.config)


def write_manifest(out: Path, cfg: SimConfig, extra: dict | None = None) -> None:
    from . import __version__
    manifest = {"version": __version__, "seed": cfg.seed, "topology_seed": cfg.topology.seed,
                "config": to_flat(cfg)}
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def emit_dk_trace(D, labels, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(dk_csv(D, labels))


def dk_csv(D, labels) -> str:
    out = io.StringIO()
    out.write("k,d_hz,label\n")
    for k, (d, lab) in enumerate(zip(D, labels)):
        d_txt = "" if d is None or (isinstance(d, float) and np.isnan(d)) else repr(float(d))
        out.write(f"{k},{d_txt},{lab}\n")
    return out.getvalue()


def parse_dk_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows = list(csv.DictReader(io.StringIO(text)))
    D = np.array([float(r["d_hz"]) if r["d_hz"] else np.nan for r in rows])
    labels = np.array([r["label"] for r in rows], dtype=object)
    return D, labels


# --- sweeps ---------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    lr_sdsp: tuple[float, ...] = S_LR
    lr_thr: tuple[float, ...] = P_THR
    t_bin: tuple[float, ...] = (150e-3,)
    n_input: tuple[int, ...] = (100,)
    f_poisson: tuple[float, ...] = (150.0,)
    repeats: int = 1
    ablation: str = "sdsp_plus_ip"
    threshold_sync: bool = True

    def __post_init__(self):
        for name in ("lr_sdsp", "lr_thr", "t_bin", "n_input", "f_poisson"):
            if not getattr(self, name):
                raise ValueError(f"sweep list {name} is empty")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}")

    def cells(self):
        return itertools.product(self.lr_sdsp, self.lr_thr, self.t_bin, self.n_input,
                                 self.f_poisson)


def cell_seed(master: int, cell, repeat: int) -> int:
    """Deterministic 63-bit seed from the master seed, cell coordinates and repeat."""
    key = json.dumps([master, [repr(float(c)) for c in cell], repeat]).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


def cell_config(base: SimConfig, cell, seed: int) -> SimConfig:
    lr_sdsp, lr_thr, t_bin, n_input, f_poisson = cell
    cfg = base.with_n_input(int(n_input))
    return replace(
        cfg,
        seed=seed,
        synapse=replace(cfg.synapse, lr_sdsp=float(lr_sdsp)),
        ip=replace(cfg.ip, thr_step=float(lr_thr)),
        encoder=replace(cfg.encoder, T_bin=float(t_bin), F_poisson=float(f_poisson)),
        topology=replace(cfg.topology, seed=seed),
    )


def run_cell(base: SimConfig, data: Dataset, cell, repeat: int, ablation: str,
             threshold_sync: bool) -> dict:
    seed = cell_seed(base.seed, cell, repeat)
    row = dict(zip(SWEEP_COLUMNS[:5], cell))
    row.update(seed=seed, w_thr="", d_no_max="", d_ab_min="", error="")
    try:
        res = run_experiment(cell_config(base, cell, seed), data, ablation, threshold_sync)
        row.update(w_thr=res.margin.W_thr, d_no_max=res.margin.D_no_max,
                   d_ab_min=res.margin.D_ab_min, max_count=res.max_bin_count())
    except Exception as exc:  # a failed cell is recorded, the sweep goes on
        log.warning("cell %s repeat %d failed: %s", cell, repeat, exc)
        row["error"] = f"{type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
    return row


def sweep_spec_from_kv(flat: dict[str, str], base: SweepSpec | None = None) -> SweepSpec:
    """Build a spec from ``sweep.*`` keys; list values are comma separated."""
    spec = base or SweepSpec()
    changes = {}
    for key, text in flat.items():
        name = key.removeprefix("sweep.")
        if name in ("lr_sdsp", "lr_thr", "t_bin", "f_poisson"):
            changes[name] = tuple(float(v) for v in text.split(",") if v.strip())
        elif name == "n_input":
            changes[name] = tuple(int(v) for v in text.split(",") if v.strip())
        elif name == "repeats":
            changes[name] = int(text)
        elif name == "ablation":
            changes[name] = text.strip()
        elif name == "threshold_sync":
            if text.strip().lower() not in ("true", "false", "on", "off", "1", "0"):
                raise ValueError(f"{key}: expected a boolean, got {text!r}")
            changes[name] = text.strip().lower() in ("true", "on", "1")
        else:
            raise KeyError(f"unknown sweep key {key!r}")
    return replace(spec, **changes)


def split_config(flat: dict[str, str]) -> tuple[dict[str, str], dict[str, str]]:
    """Separate ``sweep.*`` keys from simulation keys."""
    sweep = {k: v for k, v in flat.items() if k.startswith("sweep.")}
    sim = {k: v for k, v in flat.items() if not k.startswith("sweep.")}
    return sim, sweep


def _run_cell_args(args):
    return run_cell(*args)


def run_sweep(spec: SweepSpec, base: SimConfig, data: Dataset, jobs: int = 1) -> list[dict]:
    tasks = [(base, data, cell, r, spec.ablation, spec.threshold_sync)
             for cell in spec.cells() for r in range(spec.repeats)]
    if jobs <= 1:
        rows = [_run_cell_args(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell_args, tasks))
    return rows


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def sweep_csv(rows: list[dict], sort: bool = True) -> str:
    lines = [",".join(_fmt(r[c]) for c in SWEEP_COLUMNS) for r in rows]
    if sort:
        lines.sort()
    return ",".join(SWEEP_COLUMNS) + "\n" + "".join(line + "\n" for line in lines)


def pivot_means(rows: list[dict]) -> list[dict]:
    """Mean W_thr, D_no_max and D_ab_min per cell over successful repeats."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault(tuple(r[c] for c in SWEEP_COLUMNS[:5]), []).append(r)
    out = []
    for cell, rs in sorted(groups.items()):
        ok = [r for r in rs if not r["error"]]
        entry = dict(zip(SWEEP_COLUMNS[:5], cell), n=len(ok), n_failed=len(rs) - len(ok))
        for key in ("w_thr", "d_no_max", "d_ab_min"):
            entry[key] = float(np.mean([r[key] for r in ok])) if ok else float("nan")
        out.append(entry)
    return out


def pivot_csv(rows: list[dict]) -> str:
    cols = ("lr_sdsp", "lr_thr", "t_bin", "n_input", "f_poisson", "n", "n_failed",
            "w_thr", "d_no_max", "d_ab_min")
    piv = pivot_means(rows)
    return ",".join(cols) + "\n" + "".join(
        ",".join(_fmt(p[c]) for c in cols) + "\n" for p in piv)
