"""Compiled inner loop of the clock-driven simulation.

Mirrors the scalar operations in ``neuron`` and ``synapse`` step for step;
``tests/test_engine.py`` checks the two paths against each other.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _sdsp(w, v_post, up, down, lr, w_max):
    if v_post > up:
        step = 1
    elif v_post < down:
        step = -1
    else:
        return w
    level = w / lr
    n = np.floor(level + 0.5)
    if abs(level - n) > 1e-9:
        if step > 0:
            return min(w + lr, w_max)
        return max(w - lr, 0.0)
    n_max = np.floor(w_max / lr + 0.5)
    n = min(max(n + step, 0.0), n_max)
    return n * lr


@njit(cache=True)
def run_steps(
    input_spikes,  # (n_steps, n_input) bool
    # state, mutated in place
    V, I, refr, C, thr, lup, ldown, pending, pending_in, counts,
    # recurrent edges, CSR by source over middle-layer indices
    rec_ptr, rec_dst, rec_w, rec_sign, rec_plastic,
    # input edges, CSR by input index
    in_ptr, in_dst, in_w,
    # per-neuron constants
    decay_mem, R, V_reset, ref_steps, decay_ca, is_exc,
    # scalars
    decay_syn, alpha, lr, w_max, sdsp_on,
    ip_on, thr_step, thr_min, n_thr_levels, lthr_step, sync, band_hi, band_lo,
    ca_post_increment,
):
    n_steps = input_spikes.shape[0]
    n_in = input_spikes.shape[1]
    N = V.shape[0]
    fired = np.zeros(N, dtype=np.bool_)
    for t in range(n_steps):
        # (a) synaptic decay
        for i in range(N):
            I[i] *= decay_syn
        # (b) deliver spikes emitted one step ago
        for j in range(n_in):
            if pending_in[j]:
                for e in range(in_ptr[j], in_ptr[j + 1]):
                    I[in_dst[e]] += alpha * in_w[e]
        for s in range(N):
            if pending[s]:
                for e in range(rec_ptr[s], rec_ptr[s + 1]):
                    d = rec_dst[e]
                    I[d] += rec_sign[e] * alpha * rec_w[e]
                    if sdsp_on and rec_plastic[e]:
                        rec_w[e] = _sdsp(rec_w[e], V[d], lup[d], ldown[d], lr, w_max)
        for j in range(n_in):
            pending_in[j] = input_spikes[t, j]
        # (c) membrane, (d) fire, (e) calcium, (f) IP
        for i in range(N):
            if refr[i] > 0:
                V[i] = V_reset[i]
                refr[i] -= 1
                f = False
            else:
                V[i] = V[i] * decay_mem[i] + I[i] * R[i] * (1.0 - decay_mem[i])
                f = V[i] > thr[i]
                if f:
                    V[i] = V_reset[i]
                    refr[i] = ref_steps[i]
            fired[i] = f
            c_before = C[i]
            C[i] = C[i] * decay_ca[i]
            if f:
                C[i] += 1.0
                counts[i] += 1
                if ip_on and is_exc[i]:
                    c = C[i] if ca_post_increment else c_before * decay_ca[i]
                    direction = 0
                    if c > band_hi:
                        direction = 1
                    elif c < band_lo:
                        direction = -1
                    if direction != 0:
                        level = np.floor((thr[i] - thr_min) / thr_step + 0.5)
                        new_level = min(max(level + direction, 0.0), n_thr_levels)
                        on_grid = abs(thr[i] - (thr_min + level * thr_step)) < 1e-12
                        if new_level != level or not on_grid:
                            new_thr = thr_min + new_level * thr_step
                            if on_grid:
                                steps = new_level - level
                            else:
                                steps = (new_thr - thr[i]) / thr_step
                            thr[i] = new_thr
                            if sync:
                                shift = steps * lthr_step
                                lup[i] += shift
                                ldown[i] += shift
        for i in range(N):
            pending[i] = fired[i]
