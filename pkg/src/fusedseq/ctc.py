"""CTC loss over blank-augmented monotonic alignments.

The forward recursion runs in log space over the blank-interleaved label
sequence.  The gradient with respect to the per-frame log-probabilities
is the usual state-occupancy posterior, computed with a matching backward
recursion and attached to the tape as a single custom node.
"""

from __future__ import annotations

import numpy as np

from .exceptions import InfeasibleError, ShapeError
from .tensor import Tensor, _make

NEG_INF = -np.inf


def extended_labels(labels: list[int], blank: int) -> list[int]:
    ext = [blank]
    for l in labels:
        ext.append(l)
        ext.append(blank)
    return ext


def min_alignment_length(labels: list[int]) -> int:
    """Frames needed: one per label plus one per adjacent repeat."""
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + repeats


def _forward(lp: np.ndarray, ext: list[int]) -> np.ndarray:
    t_len, s_len = lp.shape[0], len(ext)
    alpha = np.full((t_len, s_len), NEG_INF)
    alpha[0, 0] = lp[0, ext[0]]
    if s_len > 1:
        alpha[0, 1] = lp[0, ext[1]]
    ext_arr = np.asarray(ext)
    # skip s-2 -> s is legal only label-to-different-label
    can_skip = np.zeros(s_len, dtype=bool)
    if s_len > 2:
        can_skip[2:] = ext_arr[2:] != ext_arr[:-2]
    with np.errstate(invalid="ignore"):
        for t in range(1, t_len):
            prev = alpha[t - 1]
            stay = prev
            move = np.full(s_len, NEG_INF)
            move[1:] = prev[:-1]
            skip = np.full(s_len, NEG_INF)
            if s_len > 2:
                skip[2:] = np.where(can_skip[2:], prev[:-2], NEG_INF)
            alpha[t] = np.logaddexp(np.logaddexp(stay, move), skip) + lp[t, ext_arr]
    return alpha


def _backward_vars(lp: np.ndarray, ext: list[int]) -> np.ndarray:
    t_len, s_len = lp.shape[0], len(ext)
    beta = np.full((t_len, s_len), NEG_INF)
    beta[t_len - 1, s_len - 1] = 0.0
    if s_len > 1:
        beta[t_len - 1, s_len - 2] = 0.0
    ext_arr = np.asarray(ext)
    # skip s -> s+2 is legal only label-to-different-label
    can_skip_fwd = np.zeros(s_len, dtype=bool)
    if s_len > 2:
        can_skip_fwd[: s_len - 2] = ext_arr[: s_len - 2] != ext_arr[2:]
    with np.errstate(invalid="ignore"):
        for t in range(t_len - 2, -1, -1):
            nxt = beta[t + 1] + lp[t + 1, ext_arr]
            stay = nxt
            move = np.full(s_len, NEG_INF)
            move[:-1] = nxt[1:]
            skip = np.full(s_len, NEG_INF)
            if s_len > 2:
                skip[: s_len - 2] = np.where(can_skip_fwd[: s_len - 2], nxt[2:], NEG_INF)
            beta[t] = np.logaddexp(np.logaddexp(stay, move), skip)
    return beta


def ctc_forward(log_probs: Tensor, labels: list[int], blank: int) -> Tensor:
    """Negative log-probability of labels under the frame posterior grid.

    log_probs holds per-frame log-softmax rows of width V+1 including the
    blank column; labels must not contain the blank id.
    """
    if log_probs.data.ndim != 2:
        raise ShapeError(f"ctc expects (T, V+1) log-probs, got {log_probs.shape}")
    t_len, n_sym = log_probs.data.shape
    if not 0 <= blank < n_sym:
        raise ShapeError(f"blank id {blank} outside columns 0..{n_sym - 1}")
    labels = list(labels)
    if any(l == blank for l in labels):
        raise ValueError("labels must not contain the blank id")
    if any(not 0 <= l < n_sym for l in labels):
        raise ValueError("label id outside the log-prob columns")
    need = min_alignment_length(labels)
    if t_len < need:
        raise InfeasibleError(
            f"{t_len} frames cannot align {len(labels)} labels (need {need})"
        )

    lp = log_probs.data
    ext = extended_labels(labels, blank)
    ext_arr = np.asarray(ext)
    alpha = _forward(lp, ext)
    tail = alpha[t_len - 1, len(ext) - 1]
    if len(ext) > 1:
        tail = np.logaddexp(tail, alpha[t_len - 1, len(ext) - 2])
    log_p = float(tail)
    if not np.isfinite(log_p):
        raise InfeasibleError("no feasible alignment has nonzero probability")

    def backward(g):
        if not log_probs.requires_grad:
            return
        beta = _backward_vars(lp, ext)
        occ = alpha + beta  # log joint occupancy per (t, s)
        grad = np.zeros_like(lp)
        with np.errstate(invalid="ignore"):
            post = np.exp(occ - log_p)
        for s in range(len(ext)):
            grad[:, ext_arr[s]] -= post[:, s]
        log_probs.accumulate_grad(float(g) * grad)

    return _make(np.asarray(-log_p), (log_probs,), backward)
