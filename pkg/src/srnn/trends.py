"""Trend-level checks on synthetic ECG, shared by the ``report`` command and tests.

Absolute W_thr values depend on the network scale and the data, so each
check asserts an ordering or a shape over seed medians instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import SimConfig
from .harness import Dataset, SweepSpec, run_sweep, synthetic_dataset

TRENDS = ("ablation", "t_bin", "n_input", "f_poisson")


@dataclass
class TrendResult:
    name: str
    passed: bool
    detail: str
    rows: list[dict] = field(default_factory=list)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _medians(rows, key, by):
    groups: dict = {}
    for r in rows:
        groups.setdefault(r[by], []).append(r)
    out = {}
    for k, rs in groups.items():
        vals = [r[key] for r in rs if not r["error"]]
        out[k] = float(np.median(vals)) if len(vals) == len(rs) else math.nan
    return out


def _errors(rows) -> list[str]:
    return [r["error"] for r in rows if r["error"]]


def _fmt(d: dict) -> str:
    return ", ".join(f"{k}={v:.2f}" for k, v in d.items())


def ablation_trend(base: SimConfig, data: Dataset, seeds: int = 5, jobs: int = 1,
                   lr_sdsp: float = 2.0, lr_thr: float = 0.025,
                   t_bin: float = 150e-3) -> TrendResult:
    """Untrained <= 0 < SDSP only <= SDSP + IP, on paired seeds."""
    n_in, f = base.encoder.n_input, base.encoder.F_poisson
    rows, med, ip_positive = [], {}, 0
    for abl in ("none", "sdsp_only", "sdsp_plus_ip"):
        spec = SweepSpec((lr_sdsp,), (lr_thr,), (t_bin,), (n_in,), (f,), repeats=seeds,
                         ablation=abl)
        part = run_sweep(spec, base, data, jobs)
        for r in part:
            r["ablation"] = abl
        rows += part
        med[abl] = _medians(part, "w_thr", "lr_sdsp")[lr_sdsp]
        if abl == "sdsp_plus_ip":
            ip_positive = sum(1 for r in part if not r["error"] and r["w_thr"] > 0)
    need = math.ceil(0.8 * seeds)
    ok = (med["none"] <= 0 < med["sdsp_only"] <= med["sdsp_plus_ip"]
          and ip_positive >= need and not _errors(rows))
    detail = f"median W_thr {_fmt(med)}; sdsp_plus_ip positive {ip_positive}/{seeds} (need {need})"
    return TrendResult("ablation", ok, detail, rows)


def t_bin_trend(base: SimConfig, data: Dataset, seeds: int = 5, jobs: int = 1,
                t_bins=(7e-3, 150e-3, 600e-3), lr_sdsp: float = 0.1,
                lr_thr: float = 0.3) -> TrendResult:
    """Median W_thr is non-decreasing in T_bin."""
    spec = SweepSpec((lr_sdsp,), (lr_thr,), tuple(t_bins), (base.encoder.n_input,),
                     (base.encoder.F_poisson,), repeats=seeds)
    rows = run_sweep(spec, base, data, jobs)
    med = _medians(rows, "w_thr", "t_bin")
    vals = [med[t] for t in t_bins]
    ok = all(a <= b for a, b in zip(vals, vals[1:])) and not _errors(rows)
    return TrendResult("t_bin", ok, f"median W_thr by T_bin {_fmt(med)}", rows)


def n_input_trend(base: SimConfig, data: Dataset, seeds: int = 5, jobs: int = 1,
                  n_inputs=(10, 100), t_bin: float = 7e-3, lr_sdsp: float = 2.0,
                  lr_thr: float = 0.3) -> TrendResult:
    """W_thr at the largest N_input beats the smallest and is positive."""
    spec = SweepSpec((lr_sdsp,), (lr_thr,), (t_bin,), tuple(n_inputs),
                     (base.encoder.F_poisson,), repeats=seeds)
    rows = run_sweep(spec, base, data, jobs)
    med = _medians(rows, "w_thr", "n_input")
    lo, hi = med[min(n_inputs)], med[max(n_inputs)]
    ok = hi > lo and hi > 0 and not _errors(rows)
    return TrendResult("n_input", ok, f"median W_thr by N_input {_fmt(med)}", rows)


def f_poisson_trend(base: SimConfig, data: Dataset, seeds: int = 5, jobs: int = 1,
                    rates=(150.0, 750.0, 1200.0, 1500.0), t_bin: float = 7e-3,
                    lr_sdsp: float = 2.0, lr_thr: float = 0.3,
                    dt: float = 5e-5) -> TrendResult:
    """D_no_max linear over the lower rates; D_ab_min flat beyond the last-but-one.

    Also checks the refractory ceiling on every recorded bin.  ``dt`` is
    reduced so that ``rate * dt`` stays below 0.1 at the top rate.
    """
    base = replace(base, dt=dt)
    spec = SweepSpec((lr_sdsp,), (lr_thr,), (t_bin,), (base.encoder.n_input,), tuple(rates),
                     repeats=seeds)
    rows = run_sweep(spec, base, data, jobs)
    no = _medians(rows, "d_no_max", "f_poisson")
    ab = _medians(rows, "d_ab_min", "f_poisson")
    lin = [float(r) for r in rates[:-1]]
    y = np.array([no[r] for r in lin])
    r2 = _r_squared(np.array(lin), y)
    rise = ab[rates[-2]] - ab[rates[-3]]
    tail = ab[rates[-1]] - ab[rates[-2]]
    ceiling = math.floor(t_bin / base.exc.t_ref) + 1
    max_count = max((r.get("max_count", 0) for r in rows if not r["error"]), default=0)
    ok = (r2 >= 0.95 and rise > 0 and tail < 0.1 * rise and max_count <= ceiling
          and not _errors(rows))
    detail = (f"D_no_max {_fmt(no)} (R^2 = {r2:.3f}); D_ab_min {_fmt(ab)} "
              f"(last step {tail:.2f} vs previous {rise:.2f}); "
              f"max bin count {max_count} <= {ceiling}")
    return TrendResult("f_poisson", ok, detail, rows)


def _r_squared(x: np.ndarray, y: np.ndarray) -> float:
    if not np.all(np.isfinite(y)):
        return math.nan
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


def run_trend(name: str, base: SimConfig | None = None, data: Dataset | None = None,
              seeds: int = 5, jobs: int = 1) -> TrendResult:
    base = base or SimConfig()
    data = data or synthetic_dataset()
    fn = {"ablation": ablation_trend, "t_bin": t_bin_trend, "n_input": n_input_trend,
          "f_poisson": f_poisson_trend}[name]
    return fn(base, data, seeds=seeds, jobs=jobs)
