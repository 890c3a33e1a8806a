"""The twelve acceptance criteria, each reported as one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py``; the verdicts are printed in the
terminal summary.  Criteria 6 to 9 run full experiments and take several
minutes on one core.
"""
import math
import os
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from srnn.cli import main as cli_main
from srnn.config import SimConfig
from srnn.engine import Network
from srnn.harness import P_THR, S_LR, synthetic_dataset
from srnn.neuron import IpConfig, NeuronParams, NeuronState, apply_ip, step_membrane, update_calcium
from srnn.readout import fit_readout
from srnn.synapse import sdsp_weight
from srnn.topology import EdgeSet, Topology, TopologyConfig, build_network, crossbar
from srnn.trends import ablation_trend, f_poisson_trend, n_input_trend, t_bin_trend

JOBS = os.cpu_count() or 1


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[n])
    assert ok, detail


@pytest.fixture(scope="module")
def data():
    return synthetic_dataset()


def test_c01_analytic_lif():
    t0 = time.perf_counter()
    p = NeuronParams()
    s = NeuronState(V_mem=0.0)
    for _ in range(40):
        s = step_membrane(s, p, 100e-12, 1e-4)
    exact = 100e-12 * p.R * (1 - math.exp(-4e-3 / p.tau_mem))
    rel = abs(s.V_mem - exact) / exact
    elapsed = time.perf_counter() - t0
    record(1, rel <= 1e-9 and elapsed < 1.0, f"relative error {rel:.2e}, {elapsed:.3f} s")


def test_c02_calcium_trace():
    p = NeuronParams()
    s = NeuronState(C_fire=1.0)
    for _ in range(1000):
        s = update_calcium(s, p, False, 1e-4)
    decay_err = abs(s.C_fire - math.exp(-1)) / math.exp(-1)

    rng = np.random.default_rng(0)
    n_steps = 20_000
    spike_steps = np.sort(rng.choice(n_steps, size=100, replace=False))
    fired = np.zeros(n_steps, dtype=bool)
    fired[spike_steps] = True
    s = NeuronState()
    for f in fired:
        s = update_calcium(s, p, bool(f), 1e-4)
    expected = sum(math.exp(-(n_steps - 1 - i) * 1e-4 / p.tau_ip) for i in spike_steps)
    sup_err = abs(s.C_fire - expected) / expected
    record(2, decay_err <= 1e-9 and sup_err <= 1e-9,
           f"decay error {decay_err:.2e}, 100-spike superposition error {sup_err:.2e}")


def test_c03_threshold_invariants():
    n_updates = 1_000_000
    violations = {}
    for lr in P_THR:
        ip = IpConfig(thr_step=lr)
        rng = np.random.default_rng(int(lr * 1000))
        cs = rng.uniform(0.0, 2.0 * ip.C_ip, n_updates)
        s = NeuronState.initial()
        bad = 0
        moved = False
        for c in cs.tolist():
            s = apply_ip(NeuronState(s.V_mem, s.V_thr, s.V_lthr_up, s.V_lthr_down, c), ip)
            moved = moved or s.V_thr != 0.2
            n = (s.V_thr - ip.V_thr_min) / lr
            if not (s.V_lthr_down <= s.V_lthr_up < s.V_thr
                    and ip.V_thr_min - 1e-12 <= s.V_thr <= ip.V_thr_max + 1e-12
                    and (abs(n - round(n)) < 1e-9 or not moved)):
                bad += 1
        violations[lr] = bad
    ok = all(v == 0 for v in violations.values())
    record(3, ok, f"{n_updates} IP updates per LR_thr, violations {violations}")


def test_c04_weight_invariants():
    n_updates = 1_000_000
    violations = {}
    for lr in S_LR:
        rng = np.random.default_rng(int(lr * 100))
        vs = rng.uniform(-0.05, 0.3, n_updates).tolist()
        ups = rng.uniform(0.05, 0.2, n_updates).tolist()
        w = 1.0
        moved = False
        bad = 0
        for v, up in zip(vs, ups):
            w = sdsp_weight(w, v, up, up, lr, 2.0)
            moved = moved or w != 1.0
            n = w / lr
            if not (0.0 <= w <= 2.0 and (abs(n - round(n)) < 1e-9 or not moved)):
                bad += 1
        violations[lr] = bad
    record(4, all(v == 0 for v in violations.values()),
           f"{n_updates} SDSP updates per LR_SDSP, violations {violations}")


def _interference_network(sync: bool) -> Network:
    """Five input-driven presynaptic E neurons feed one target through plastic edges.

    Every neuron starts at V_thr = 0.3 V, so the learning thresholds sit at
    0.15 V.  The target has no input of its own and fires far below the IP
    target rate, so IP walks its threshold down to 0.1 V.
    """
    n_pre = 5
    rows = {
        "in_E": [(j, j, 2.0) for j in range(n_pre)],
        "EE": [(i, n_pre, 1.0) for i in range(n_pre)],
    }
    tc = TopologyConfig(n_input=n_pre, n_exc=n_pre + 1, n_inh=0)
    edges = {}
    for cls in ("in_E", "EE", "EI", "IE", "E_out"):
        r = rows.get(cls, [])
        if cls == "E_out":
            r = [(i, 0, 0.0) for i in range(n_pre + 1)]
        edges[cls] = EdgeSet(np.array([x[0] for x in r], dtype=np.int64),
                             np.array([x[1] for x in r], dtype=np.int64),
                             np.array([x[2] for x in r], dtype=float), plastic=cls == "EE")
    cfg = SimConfig().with_n_input(n_pre)
    cfg = replace(cfg, V_thr_init=0.3, seed=1,
                  synapse=replace(cfg.synapse, lr_sdsp=0.1, alpha=2e-10),
                  ip=replace(cfg.ip, thr_step=0.05, C_ip=30.0, threshold_sync=sync))
    return Network.create(cfg, Topology(tc, edges))


def _drive(net: Network, max_pre_spikes: int, p_input: float = 0.03):
    """Settle thresholds with IP alone for 1 s, then run SDSP and IP together.

    Returns the target's post-settling threshold state and a history of
    (presynaptic spikes so far, plastic weights) after each 10 ms block.
    """
    rng = np.random.default_rng(42)
    target = net.n_exc - 1
    full = net.cfg
    net.cfg = full.with_plasticity(sdsp=False, ip=True)
    for _ in range(100):
        net.run_steps(rng.random((100, 5)) < p_input, plastic=True)
    settled = (float(net.thr[target]), float(net.ldown[target]))
    net.cfg = full
    pre_spikes = 0
    history = []
    while pre_spikes < max_pre_spikes:
        counts = net.run_steps(rng.random((100, 5)) < p_input, plastic=True)
        pre_spikes += int(counts[:target].sum())
        history.append((pre_spikes, net.class_weights()["EE"].copy()))
    return settled, history


def test_c05_interference_regression():
    t0 = time.perf_counter()
    (thr_off, ld_off), off = _drive(_interference_network(sync=False), 10_000)
    (thr_on, ld_on), on = _drive(_interference_network(sync=True), 10_000)
    collapse_at = next((n for n, w in off if np.all(w == 0.0)), None)
    survivors = int(np.sum(on[-1][1] > 0))
    elapsed = time.perf_counter() - t0
    ok = thr_off < ld_off and collapse_at is not None and survivors >= 1 and elapsed < 30
    record(5, ok, f"sync off: V_thr {thr_off:.2f} < V_Lthr_down {ld_off:.2f}, all weights 0 after "
                  f"{collapse_at} presynaptic spikes; sync on: V_Lthr_down {ld_on:.3f}, "
                  f"{survivors}/5 weights > 0 after {on[-1][0]} spikes; {elapsed:.1f} s")


@pytest.mark.slow
def test_c06_ablation_trend(data):
    t0 = time.perf_counter()
    res = ablation_trend(SimConfig(), data, seeds=5, jobs=JOBS)
    elapsed = time.perf_counter() - t0
    record(6, res.passed and elapsed < 900, f"{res.detail}; {elapsed:.0f} s")


@pytest.mark.slow
def test_c07_t_bin_trend(data):
    res = t_bin_trend(SimConfig(), data, seeds=5, jobs=JOBS)
    record(7, res.passed, res.detail)


@pytest.mark.slow
def test_c08_n_input_trend(data):
    res = n_input_trend(SimConfig(), data, seeds=5, jobs=JOBS)
    record(8, res.passed, res.detail)


@pytest.mark.slow
def test_c09_f_poisson_trend(data):
    res = f_poisson_trend(SimConfig(), data, seeds=5, jobs=JOBS)
    record(9, res.passed, res.detail)


def _gradient_descent(X, y, lam, tol=1e-10, max_iter=5_000_000):
    n, d = X.shape
    A = np.hstack([X, np.ones((n, 1))])
    H = 2 * (A.T @ A + np.diag([lam] * d + [0.0]))
    step = 1.0 / np.linalg.eigvalsh(H).max()
    theta = np.zeros(d + 1)
    for _ in range(max_iter):
        g = H @ theta - 2 * A.T @ y
        if np.linalg.norm(g) < tol:
            break
        theta -= step * g
    return theta


def test_c10_readout_oracle():
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        X = rng.normal(size=(50, 10)) + rng.normal(size=10)
        y = X @ rng.normal(size=10) + rng.normal(size=50)
        m = fit_readout(X, y, 0.1)
        theta = _gradient_descent(X, y, 0.1)
        ours = np.append(m.weights, m.bias)
        worst = max(worst, float(np.max(np.abs(ours - theta) / np.maximum(np.abs(theta), 1e-12))))
    record(10, worst <= 1e-6, f"max relative difference {worst:.2e} over 20 systems")


def test_c11_sweep_determinism(tmp_path):
    cfg = tmp_path / "sweep.txt"
    cfg.write_text("encoder.T_bin = 7e-3\ntrain_passes = 1\n"
                   "sweep.lr_sdsp = 0.1, 2.0\nsweep.lr_thr = 0.05, 0.3\nsweep.t_bin = 7e-3\n"
                   "sweep.repeats = 2\n")
    outputs = []
    for run, jobs in enumerate((1, 2, 1)):
        out = tmp_path / f"run{run}"
        rc = cli_main(["sweep", "--config", str(cfg), "--seed", "11", "--jobs", str(jobs),
                       "--out-dir", str(out)])
        assert rc == 0
        outputs.append((out / "sweep.csv").read_bytes())
    ok = outputs[0] == outputs[1] == outputs[2]
    record(11, ok, f"three sweeps (jobs 1, 2, 1) byte-identical: {ok}, "
                   f"{len(outputs[0].splitlines()) - 1} rows")


def test_c12_topology_statistics():
    cfg = TopologyConfig()
    n_seeds = 200
    classes = {"in_E": (cfg.n_input * cfg.n_exc, cfg.p_in),
               "EE": (cfg.n_exc * (cfg.n_exc - 1), cfg.p_EE),
               "EI": (cfg.n_exc * cfg.n_inh, cfg.p_EI),
               "IE": (cfg.n_inh * cfg.n_exc, cfg.p_IE)}
    counts = {c: [] for c in classes}
    forbidden = 0
    for seed in range(n_seeds):
        topo = build_network(replace(cfg, seed=seed))
        for c in classes:
            counts[c].append(topo.count(c))
        M = crossbar(topo)
        inh_rows = M[cfg.n_exc:]
        forbidden += np.count_nonzero(inh_rows[:, :cfg.n_input])
        forbidden += np.count_nonzero(inh_rows[:, cfg.n_input + cfg.n_exc:])
    failures = []
    for c, (n, p) in classes.items():
        x = np.array(counts[c], dtype=float)
        mu, var = n * p, n * p * (1 - p)
        if abs(x.mean() - mu) > 4 * math.sqrt(var / n_seeds):
            failures.append(f"{c} mean {x.mean():.1f} vs {mu:.1f}")
        if abs(x.var(ddof=1) - var) > 4 * var * math.sqrt(2 / (n_seeds - 1)):
            failures.append(f"{c} variance {x.var(ddof=1):.1f} vs {var:.1f}")
    ok = not failures and forbidden == 0
    record(12, ok, f"{n_seeds} seeds, binomial failures {failures or 'none'}, "
                   f"input->I or I->I edges {forbidden}")
