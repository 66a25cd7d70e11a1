"""Location-aware additive attention.

Scores each encoder frame from the decoder query, the frame itself, and
a 1-d convolution of the previous attention weights, so the mechanism
can track how far along the input it has already attended.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ShapeError
from .params import ParamStore
from .tensor import Tensor, _make, add, concat, matmul, softmax, take, tanh


def uniform_weights(length: int) -> Tensor:
    return Tensor(np.full(length, 1.0 / length))


def matmul_t(a: Tensor, w: Tensor) -> Tensor:
    """Rows of a through w transposed: (T, k) x (m, k) -> (T, m)."""
    if a.data.shape[-1] != w.data.shape[1]:
        raise ShapeError(f"matmul_t shapes disagree: {a.data.shape} vs {w.data.shape}")
    data = a.data @ w.data.T

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g @ w.data)
        if w.requires_grad:
            w.accumulate_grad(g.T @ a.data)

    return _make(data, (a, w), backward)


class LocationAttention:
    """Additive energy with a convolutional location feature."""

    def __init__(self, store: ParamStore, query_dim: int, enc_dim: int,
                 att_dim: int, init, channels: int = 10, width: int = 5,
                 prefix: str = "attention"):
        self.att_dim = att_dim
        self.channels = channels
        self.width = width
        self.w_query = store.add(f"{prefix}.w_query", init((att_dim, query_dim)))
        self.w_enc = store.add(f"{prefix}.w_enc", init((att_dim, enc_dim)))
        self.w_conv = store.add(f"{prefix}.w_conv", init((att_dim, channels)))
        self.conv = store.add(f"{prefix}.conv", init((channels, width)))
        self.bias = store.add(f"{prefix}.bias", np.zeros(att_dim))
        self.v = store.add(f"{prefix}.v", init((att_dim,)))

    def __call__(self, query: Tensor, enc: Tensor, prev: Tensor) -> tuple[Tensor, Tensor]:
        """One attention read.

        query: decoder hidden state (d,); enc: encoder outputs (T, e);
        prev: previous attention weights (T,).  Returns (context, weights).
        """
        if enc.data.ndim != 2:
            raise ShapeError(f"encoder matrix must be 2-d, got {enc.shape}")
        t_len = enc.shape[0]
        if prev.shape != (t_len,):
            raise ShapeError(
                f"attention state has length {prev.shape}, encoder has {t_len} frames"
            )
        # location feature: same-padded 1-d convolution of the previous weights
        pad_l = self.width // 2
        pad_r = self.width - 1 - pad_l
        padded = concat([Tensor(np.zeros(pad_l)), prev, Tensor(np.zeros(pad_r))])
        shift_idx = np.arange(t_len)[:, None] + np.arange(self.width)[None, :]
        windows = take(padded, shift_idx)                    # (T, width)
        conv_out = matmul_t(windows, self.conv.value)        # (T, channels)
        loc_term = matmul_t(conv_out, self.w_conv.value)     # (T, att)
        enc_term = matmul_t(enc, self.w_enc.value)           # (T, att)
        query_term = add(matmul(self.w_query.value, query), self.bias.value)
        energies = matmul(tanh(add(add(enc_term, loc_term), query_term)), self.v.value)
        weights = softmax(energies)
        context = matmul(weights, enc)
        return context, weights
