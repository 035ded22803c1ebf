"""Forward-only LSTM core.

Weights are evolved, never trained, so there is no autograd here: just the
standard gate equations iterated with a constant input vector, plus a tanh
output projection that keeps every emitted component in (-1, 1).

The batched entry point runs each sequence with exactly the same scalar
arithmetic as the single-step path, so batching is bit-identical to
sequential evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from evobrush.genome import LstmParams


@dataclass
class LstmState:
    hidden: np.ndarray  # (hidden_dim,) float64
    cell: np.ndarray  # (hidden_dim,) float64

    @staticmethod
    def zeros(hidden_dim: int) -> "LstmState":
        return LstmState(np.zeros(hidden_dim), np.zeros(hidden_dim))


@njit(cache=True, nogil=True)
def _run_cell(gw, gb, pw, pb, x, h, c, steps, outs):
    # gw (4, H, D+H), gb (4, H), pw (O, H), pb (O,), x (D,), h/c (H,) in-place,
    # outs (>=steps, O).  Gate order: input, forget, output, candidate.
    H = gw.shape[1]
    D = x.shape[0]
    O = pw.shape[0]
    acts = np.empty((4, H))
    for t in range(steps):
        for g in range(4):
            for j in range(H):
                acc = gb[g, j]
                for k in range(D):
                    acc += gw[g, j, k] * x[k]
                for k in range(H):
                    acc += gw[g, j, D + k] * h[k]
                acts[g, j] = acc
        for j in range(H):
            gi = 1.0 / (1.0 + math.exp(-acts[0, j]))
            gf = 1.0 / (1.0 + math.exp(-acts[1, j]))
            go = 1.0 / (1.0 + math.exp(-acts[2, j]))
            cand = math.tanh(acts[3, j])
            c[j] = gf * c[j] + gi * cand
            h[j] = go * math.tanh(c[j])
        for o in range(O):
            acc = pb[o]
            for k in range(H):
                acc += pw[o, k] * h[k]
            outs[t, o] = math.tanh(acc)


@njit(cache=True, nogil=True)
def _run_banks(gw, gb, pw, pb, xs, bank, steps, outs):
    # gw (M, 4, H, D+H) etc.; xs (B, D); bank (B,) int64; steps (B,) int64;
    # outs (B, max_steps, O).  Each row starts from a zero state.
    B = xs.shape[0]
    H = gw.shape[2]
    for b in range(B):
        m = bank[b]
        h = np.zeros(H)
        c = np.zeros(H)
        _run_cell(gw[m], gb[m], pw[m], pb[m], xs[b], h, c, steps[b], outs[b])


def _check_input(params: LstmParams, vec: np.ndarray) -> np.ndarray:
    vec = np.ascontiguousarray(np.asarray(vec, dtype=np.float64))
    if vec.shape != (params.input_dim,):
        raise ValueError(
            f"input length {vec.shape} does not match input_dim {params.input_dim}"
        )
    return vec


def lstm_step(
    params: LstmParams, state: LstmState, input_vec: np.ndarray
) -> tuple[LstmState, np.ndarray]:
    """One recurrence step; returns the new state and the projected output."""
    x = _check_input(params, input_vec)
    h = state.hidden.astype(np.float64).copy()
    c = state.cell.astype(np.float64).copy()
    if h.shape != (params.hidden_dim,) or c.shape != (params.hidden_dim,):
        raise ValueError("state dimensions do not match parameters")
    outs = np.empty((1, params.out_dim))
    _run_cell(
        np.ascontiguousarray(params.gate_weights),
        np.ascontiguousarray(params.gate_biases),
        np.ascontiguousarray(params.out_weights),
        np.ascontiguousarray(params.out_bias),
        x,
        h,
        c,
        1,
        outs,
    )
    return LstmState(h, c), outs[0]


def run_sequence(params: LstmParams, input_vec: np.ndarray, steps: int) -> np.ndarray:
    """Iterate from a zero state with the same input at every step.

    Returns the ``steps`` projected outputs in order, shape (steps, out_dim).
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    x = _check_input(params, input_vec)
    h = np.zeros(params.hidden_dim)
    c = np.zeros(params.hidden_dim)
    outs = np.empty((steps, params.out_dim))
    _run_cell(
        np.ascontiguousarray(params.gate_weights),
        np.ascontiguousarray(params.gate_biases),
        np.ascontiguousarray(params.out_weights),
        np.ascontiguousarray(params.out_bias),
        x,
        h,
        c,
        steps,
        outs,
    )
    return outs


def stack_banks(banks: list[LstmParams]):
    """Stack homogeneous banks into contiguous tensors for the batched kernel."""
    gw = np.ascontiguousarray(np.stack([p.gate_weights for p in banks]))
    gb = np.ascontiguousarray(np.stack([p.gate_biases for p in banks]))
    pw = np.ascontiguousarray(np.stack([p.out_weights for p in banks]))
    pb = np.ascontiguousarray(np.stack([p.out_bias for p in banks]))
    return gw, gb, pw, pb


def run_banks(
    banks: list[LstmParams],
    inputs: np.ndarray,
    bank_index: np.ndarray,
    steps: np.ndarray,
) -> np.ndarray:
    """Run many zero-state constant-input sequences, one per row of ``inputs``.

    ``bank_index[i]`` selects which bank row i uses and ``steps[i]`` how many
    iterations it runs.  Returns (B, max(steps), out_dim); rows are only
    meaningful up to their own step count.  Bit-identical to calling
    :func:`run_sequence` row by row.
    """
    gw, gb, pw, pb = stack_banks(banks)
    inputs = np.ascontiguousarray(np.asarray(inputs, dtype=np.float64))
    bank_index = np.ascontiguousarray(np.asarray(bank_index, dtype=np.int64))
    steps = np.ascontiguousarray(np.asarray(steps, dtype=np.int64))
    if inputs.ndim != 2 or inputs.shape[1] != banks[0].input_dim:
        raise ValueError(f"bad batched input shape {inputs.shape}")
    max_steps = int(steps.max()) if steps.size else 0
    outs = np.zeros((inputs.shape[0], max_steps, banks[0].out_dim))
    if inputs.shape[0]:
        _run_banks(gw, gb, pw, pb, inputs, bank_index, steps, outs)
    return outs
