"""Command-line entry point.

Stages exchange plain-text files inside ``--out-dir`` so each one can be
re-run or inspected on its own::

    srnn gen-data     --out-dir run       # train.csv, test.csv, annotations.csv
    srnn build-net    --out-dir run       # config.txt, topology.txt, checkpoint.json
    srnn train        --out-dir run       # phase 1, updates checkpoint.json
    srnn fit-readout  --out-dir run       # phase 2, readout.txt
    srnn test         --out-dir run       # phase 3, dk.csv, margin.json
    srnn sweep        --out-dir sweep --jobs 4
    srnn report       --trend ablation

``--config`` takes a ``key = value`` file; ``--set key=value`` overrides
single keys on top of it.  Keys prefixed ``sweep.`` configure sweeps.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import readout as readout_io
from . import topology as topology_io
from .anomaly import annotate, margin
from .config import SimConfig, dumps_kv, parse_kv, to_flat, update_flat
from .engine import Network, run_phase1, run_phase3
from .harness import (
    ABLATIONS,
    Dataset,
    configure,
    emit_dk_trace,
    fit_phase2,
    pivot_csv,
    run_experiment,
    run_sweep,
    split_config,
    sweep_csv,
    sweep_spec_from_kv,
    synthetic_dataset,
    write_manifest,
)
from .ingestion import (
    make_synthetic_ecg,
    parse_annotations,
    parse_ecg_csv,
    write_annotations,
    write_ecg_csv,
)
from .trends import TRENDS, run_trend

log = logging.getLogger("srnn")


def _load_settings(args) -> tuple[dict[str, str], dict[str, str]]:
    flat = parse_kv(Path(args.config).read_text()) if args.config else {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        flat[key.strip()] = value.strip()
    if args.seed is not None:
        flat["seed"] = str(args.seed)
        flat["topology.seed"] = str(args.seed)
    return split_config(flat)


def _sim_config(args) -> SimConfig:
    sim, sweep = _load_settings(args)
    if sweep and args.command != "sweep":
        raise SystemExit(f"sweep keys are only valid for 'sweep': {sorted(sweep)}")
    return update_flat(SimConfig(), sim)


def _read_dataset(data_dir: Path) -> Dataset:
    train = parse_ecg_csv((data_dir / "train.csv").read_text(), record_id="train")
    test = parse_ecg_csv((data_dir / "test.csv").read_text(), record_id="test")
    ann = parse_annotations((data_dir / "annotations.csv").read_text(), len(test))
    return Dataset(train, test, ann)


def _dataset(args) -> Dataset:
    if getattr(args, "data_dir", None):
        return _read_dataset(Path(args.data_dir))
    return synthetic_dataset()


def _load_network(out: Path) -> Network:
    topo = topology_io.loads((out / "topology.txt").read_text())
    return Network.loads((out / "checkpoint.json").read_text(), topo)


def _save_network(out: Path, net: Network) -> None:
    (out / "checkpoint.json").write_text(net.dumps())
    (out / "config.txt").write_text(dumps_kv(to_flat(net.cfg)))


# --- commands -------------------------------------------------------------

def cmd_gen_data(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    anomalies = [int(a) for a in args.anomalies.split(",") if a.strip()]
    seed = args.seed or 0
    train, _ = make_synthetic_ecg(args.train_beats, (), seed, noise=args.noise)
    test, ann = make_synthetic_ecg(args.test_beats, anomalies, seed + 1, noise=args.noise)
    (out / "train.csv").write_text(write_ecg_csv(train))
    (out / "test.csv").write_text(write_ecg_csv(test))
    (out / "annotations.csv").write_text(write_annotations(ann))
    print(f"wrote {len(train)} training and {len(test)} test samples to {out}")
    return 0


def cmd_build_net(args) -> int:
    cfg = _sim_config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    net = Network.create(cfg)
    (out / "topology.txt").write_text(topology_io.dumps(net.topology))
    _save_network(out, net)
    write_manifest(out, cfg, {"stage": "build-net"})
    counts = {cls: net.topology.count(cls) for cls in net.topology.edges}
    print("edges: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    return 0


def cmd_train(args) -> int:
    out = Path(args.out_dir)
    net = _load_network(out)
    net.cfg = configure(net.cfg, args.ablation, args.threshold_sync)
    data = _read_dataset(Path(args.data_dir or out))
    if args.ablation != "none":
        run_phase1(net, data.train.values)
    _save_network(out, net)
    write_manifest(out, net.cfg, {"stage": "train", "ablation": args.ablation})
    print(f"phase 1 ({args.ablation}) done after {net.steps} steps")
    return 0


def cmd_fit_readout(args) -> int:
    out = Path(args.out_dir)
    net = _load_network(out)
    data = _read_dataset(Path(args.data_dir or out))
    model, _ = fit_phase2(net, data.train.values)
    (out / "readout.txt").write_text(readout_io.dumps(model))
    _save_network(out, net)
    print(f"readout fitted: lambda={model.lam:.4g}, residual={model.residual:.4g}")
    return 0


def cmd_test(args) -> int:
    out = Path(args.out_dir)
    net = _load_network(out)
    model = readout_io.loads((out / "readout.txt").read_text())
    data = _read_dataset(Path(args.data_dir or out))
    records = run_phase3(net, data.test.values, model)
    series = annotate([r.D for r in records], data.annotations, net.cfg.guard)
    m = margin(series)
    emit_dk_trace(series.D, series.labels, out / "dk.csv")
    (out / "margin.json").write_text(json.dumps(
        {"D_no_max": m.D_no_max, "D_ab_min": m.D_ab_min, "W_thr": m.W_thr, "F_thr": m.F_thr},
        indent=2) + "\n")
    _save_network(out, net)
    print(f"W_thr = {m.W_thr:.3f} Hz (D_no_max = {m.D_no_max:.3f}, D_ab_min = {m.D_ab_min:.3f})")
    return 0


def cmd_run(args) -> int:
    cfg = _sim_config(args)
    res = run_experiment(cfg, _dataset(args), args.ablation, args.threshold_sync, args.out_dir)
    m = res.margin
    print(f"W_thr = {m.W_thr:.3f} Hz (D_no_max = {m.D_no_max:.3f}, D_ab_min = {m.D_ab_min:.3f})")
    return 0


def cmd_sweep(args) -> int:
    sim, sweep = _load_settings(args)
    base = update_flat(SimConfig(), sim)
    spec = sweep_spec_from_kv(sweep)
    if args.ablation:
        spec = replace(spec, ablation=args.ablation)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_sweep(spec, base, _dataset(args), args.jobs)
    (out / "sweep.csv").write_text(sweep_csv(rows))
    (out / "sweep_pivot.csv").write_text(pivot_csv(rows))
    write_manifest(out, base, {"stage": "sweep", "sweep": {
        k: getattr(spec, k) for k in ("lr_sdsp", "lr_thr", "t_bin", "n_input", "f_poisson",
                                      "repeats", "ablation", "threshold_sync")}})
    failed = sum(1 for r in rows if r["error"])
    print(f"{len(rows)} rows ({failed} failed) written to {out / 'sweep.csv'}")
    return 0


def cmd_report(args) -> int:
    base = _sim_config(args)
    names = TRENDS if args.trend == "all" else (args.trend,)
    ok = True
    for name in names:
        res = run_trend(name, base, _dataset(args), seeds=args.seeds, jobs=args.jobs)
        print(res.line(), flush=True)
        ok &= res.passed
        if args.out_dir:
            out = Path(args.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"trend_{name}.csv").write_text(sweep_csv(res.rows))
    return 0 if ok else 1


# --- parser ---------------------------------------------------------------

def _bool(text: str) -> bool:
    if text.lower() in ("on", "true", "1"):
        return True
    if text.lower() in ("off", "false", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="srnn", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True, config=True):
        sp.add_argument("--out-dir", required=out_required, help="directory for all outputs")
        sp.add_argument("--seed", type=int, help="master seed (also seeds the topology)")
        if config:
            sp.add_argument("--config", help="key = value configuration file")
            sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                            help="override one configuration key (repeatable)")

    def plasticity(sp):
        sp.add_argument("--ablation", choices=ABLATIONS, default="sdsp_plus_ip")
        sp.add_argument("--threshold-sync", type=_bool, default=None, metavar="on|off",
                        help="couple the learning thresholds to V_thr (default: config)")

    sp = sub.add_parser("gen-data", help="write a synthetic ECG dataset")
    common(sp, config=False)
    sp.add_argument("--train-beats", type=int, default=4)
    sp.add_argument("--test-beats", type=int, default=6)
    sp.add_argument("--anomalies", default="2,4", help="comma-separated abnormal beat indices")
    sp.add_argument("--noise", type=float, default=0.0, help="Gaussian noise in mV")
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("build-net", help="build a network and write its initial checkpoint")
    common(sp)
    sp.set_defaults(func=cmd_build_net)

    for name, fn, text in (("train", cmd_train, "phase 1: unsupervised reconstruction"),
                           ("fit-readout", cmd_fit_readout, "phase 2: fit the linear readout"),
                           ("test", cmd_test, "phase 3: score the test waveform")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--out-dir", required=True, help="directory written by build-net")
        sp.add_argument("--data-dir", help="dataset directory (default: --out-dir)")
        if name == "train":
            plasticity(sp)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("run", help="all three phases in one go")
    common(sp, out_required=False)
    sp.add_argument("--data-dir", help="dataset directory (default: built-in synthetic ECG)")
    plasticity(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="grid sweep over learning steps and encoder settings")
    common(sp)
    sp.add_argument("--data-dir", help="dataset directory (default: built-in synthetic ECG)")
    sp.add_argument("--ablation", choices=ABLATIONS, help="override sweep.ablation")
    sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                    help="worker processes (default: available CPUs)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("report", help="check the trend predicates on synthetic ECG")
    common(sp, out_required=False)
    sp.add_argument("--data-dir", help="dataset directory (default: built-in synthetic ECG)")
    sp.add_argument("--trend", choices=TRENDS + ("all",), default="all")
    sp.add_argument("--seeds", type=int, default=5)
    sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (KeyError, ValueError, OSError) as exc:
        print(f"srnn {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
