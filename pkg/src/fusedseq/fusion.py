"""Six ways to splice a pretrained LM into the decoder, one interface.

Each variant consumes the decoder's fresh hidden/cell states and the LM
output at the current step and produces three things: the vector fed to
the output layer, and the hidden and cell states carried into the next
LSTM recursion.  Deep and cold fusion never touch the carried states;
the cell-control variants rewrite the cell (and, in variant 3, also the
hidden state, which then drives the next attention query).

Where a variant leaves a component alone, the returned tensor is the
same object that came in, so the no-rewrite contract is bit-exact.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, ShapeError
from .params import ParamStore
from .tensor import Tensor, add, concat, linear, mul, sigmoid, tanh


class FusionKind(str, enum.Enum):
    NONE = "none"
    DEEP = "deep"
    COLD = "cold"
    CCF1 = "ccf1"
    CCF2 = "ccf2"
    CCF3_SUM = "ccf3_sum"
    CCF3_AFFINE = "ccf3_affine"

    @classmethod
    def parse(cls, name: str) -> "FusionKind":
        key = name.strip().lower().replace("-", "_")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ConfigError(f"unknown fusion kind {name!r}")

    @property
    def uses_lm(self) -> bool:
        return self is not FusionKind.NONE

    @property
    def uses_lm_hidden(self) -> bool:
        """Deep fusion reads the LM hidden state; the rest read the logit."""
        return self is FusionKind.DEEP

    @property
    def output_relu(self) -> bool:
        """Whether the output layer rectifies before the softmax."""
        return self in (FusionKind.COLD, FusionKind.CCF2,
                        FusionKind.CCF3_SUM, FusionKind.CCF3_AFFINE)

    @property
    def rewrites_cell(self) -> bool:
        return self in (FusionKind.CCF1, FusionKind.CCF2,
                        FusionKind.CCF3_SUM, FusionKind.CCF3_AFFINE)

    @property
    def rewrites_hidden(self) -> bool:
        return self in (FusionKind.CCF3_SUM, FusionKind.CCF3_AFFINE)

    @property
    def lm_transform_activation(self) -> str:
        """Nonlinearity on the LM-logit projection: tanh or linear."""
        if self in (FusionKind.CCF1, FusionKind.CCF3_SUM, FusionKind.CCF3_AFFINE):
            return "tanh"
        if self in (FusionKind.COLD, FusionKind.CCF2):
            return "linear"
        return "none"

    def inference_dim(self, dec_dim: int, lm_hidden_dim: int) -> int:
        if self in (FusionKind.NONE, FusionKind.CCF1,
                    FusionKind.CCF3_SUM, FusionKind.CCF3_AFFINE):
            return dec_dim
        if self is FusionKind.DEEP:
            return dec_dim + lm_hidden_dim
        return 2 * dec_dim  # cold, ccf2


@dataclass
class FusionOutput:
    """What one fusion step hands back to the decoder."""

    inference_vec: Tensor
    carry_hidden: Tensor
    carry_cell: Tensor
    gate_trace: dict | None = None


class FusionParams:
    """Trainable connector weights for one fusion kind.

    dec_dim is the decoder state size d; the LM-logit projection maps the
    LM's logit vector down to d so the cell additions are well-typed.
    """

    def __init__(self, store: ParamStore, kind: FusionKind, dec_dim: int,
                 lm_logit_dim: int, lm_hidden_dim: int, init, prefix: str = "fusion"):
        self.kind = kind
        self.dec_dim = dec_dim
        self.lm_logit_dim = lm_logit_dim
        self.lm_hidden_dim = lm_hidden_dim
        d = dec_dim
        if kind is FusionKind.NONE:
            return
        if kind is FusionKind.DEEP:
            self.v = store.add(f"{prefix}.v", init((lm_hidden_dim,)))
            self.b = store.add(f"{prefix}.b", np.zeros(1))
            return
        self.w1 = store.add(f"{prefix}.w1", init((d, lm_logit_dim)))
        self.b1 = store.add(f"{prefix}.b1", np.zeros(d))
        self.w2 = store.add(f"{prefix}.w2", init((d, 2 * d)))
        self.b2 = store.add(f"{prefix}.b2", np.zeros(d))
        if kind in (FusionKind.CCF2, FusionKind.CCF3_SUM, FusionKind.CCF3_AFFINE):
            self.w3 = store.add(f"{prefix}.w3", init((d, 2 * d)))
            self.b3 = store.add(f"{prefix}.b3", np.zeros(d))
        if kind in (FusionKind.CCF3_SUM, FusionKind.CCF3_AFFINE):
            self.w4 = store.add(f"{prefix}.w4", init((d, 2 * d)))
            self.b4 = store.add(f"{prefix}.b4", np.zeros(d))
        if kind is FusionKind.CCF3_AFFINE:
            self.w0 = store.add(f"{prefix}.w0", init((d, 2 * d)))
            self.b0 = store.add(f"{prefix}.b0", np.zeros(d))


def _check_dims(name: str, vec: Tensor, dim: int) -> None:
    if vec.shape != (dim,):
        raise ShapeError(f"{name} has shape {vec.shape}, expected ({dim},)")


def deep_fuse(s_t: Tensor, s_lm: Tensor, p: FusionParams, record: bool = False) -> FusionOutput:
    """Scalar-gated concatenation of decoder and LM hidden states."""
    _check_dims("decoder hidden", s_t, p.dec_dim)
    _check_dims("lm hidden", s_lm, p.lm_hidden_dim)
    g = sigmoid(add(p.v.value @ s_lm, p.b.value))
    fused = concat([s_t, mul(g, s_lm)])
    trace = {"gate": g, "h_activation": "none"} if record else None
    return FusionOutput(fused, s_t, None, trace)


def cold_fuse(s_t: Tensor, l_lm: Tensor, p: FusionParams, record: bool = False) -> FusionOutput:
    """Element-gated LM-logit projection concatenated onto the hidden state."""
    _check_dims("decoder hidden", s_t, p.dec_dim)
    _check_dims("lm logits", l_lm, p.lm_logit_dim)
    h = linear(p.w1.value, p.b1.value, l_lm)
    g = sigmoid(linear(p.w2.value, p.b2.value, concat([s_t, h])))
    fused = concat([s_t, mul(g, h)])
    trace = {"h_lm": h, "gate": g, "h_activation": "linear"} if record else None
    return FusionOutput(fused, s_t, None, trace)


def ccf1_fuse(s_t: Tensor, c_t: Tensor, l_lm: Tensor, p: FusionParams,
              record: bool = False) -> FusionOutput:
    """Add gated LM information to the memory cell; inference stays on s_t."""
    _check_dims("decoder hidden", s_t, p.dec_dim)
    _check_dims("decoder cell", c_t, p.dec_dim)
    _check_dims("lm logits", l_lm, p.lm_logit_dim)
    h = tanh(linear(p.w1.value, p.b1.value, l_lm))
    g = sigmoid(linear(p.w2.value, p.b2.value, concat([c_t, h])))
    new_cell = add(c_t, mul(g, h))
    trace = {"h_lm": h, "gate_cell": g, "h_activation": "tanh"} if record else None
    return FusionOutput(s_t, s_t, new_cell, trace)


def ccf2_fuse(s_t: Tensor, c_t: Tensor, l_lm: Tensor, p: FusionParams,
              record: bool = False) -> FusionOutput:
    """Cell rewrite as in ccf1 (minus the tanh) plus cold-style inference."""
    _check_dims("decoder hidden", s_t, p.dec_dim)
    _check_dims("decoder cell", c_t, p.dec_dim)
    _check_dims("lm logits", l_lm, p.lm_logit_dim)
    h = linear(p.w1.value, p.b1.value, l_lm)
    g_cell = sigmoid(linear(p.w2.value, p.b2.value, concat([c_t, h])))
    new_cell = add(c_t, mul(g_cell, h))
    g_state = sigmoid(linear(p.w3.value, p.b3.value, concat([s_t, h])))
    fused = concat([s_t, mul(g_state, h)])
    trace = (
        {"h_lm": h, "gate_cell": g_cell, "gate_state": g_state, "h_activation": "linear"}
        if record else None
    )
    return FusionOutput(fused, s_t, new_cell, trace)


def ccf3_fuse(s_t: Tensor, c_t: Tensor, l_lm: Tensor, p: FusionParams,
              mode: str, record: bool = False) -> FusionOutput:
    """Rewrite both states; the fused hidden state drives the inference,
    the next recursion, and therefore the next attention query."""
    if mode not in ("sum", "affine"):
        raise ValueError(f"unknown cell update mode {mode!r}")
    _check_dims("decoder hidden", s_t, p.dec_dim)
    _check_dims("decoder cell", c_t, p.dec_dim)
    _check_dims("lm logits", l_lm, p.lm_logit_dim)
    h = tanh(linear(p.w1.value, p.b1.value, l_lm))
    g_state = sigmoid(linear(p.w2.value, p.b2.value, concat([s_t, h])))
    g_cell = sigmoid(linear(p.w3.value, p.b3.value, concat([c_t, h])))
    new_hidden = linear(p.w4.value, p.b4.value, concat([s_t, mul(g_state, h)]))
    gated = mul(g_cell, h)
    if mode == "sum":
        new_cell = add(c_t, gated)
    else:
        new_cell = linear(p.w0.value, p.b0.value, concat([c_t, gated]))
    trace = (
        {"h_lm": h, "gate_cell": g_cell, "gate_state": g_state,
         "h_activation": "tanh", "cell_update": mode}
        if record else None
    )
    return FusionOutput(new_hidden, new_hidden, new_cell, trace)


def apply_fusion(p: FusionParams, s_t: Tensor, c_t: Tensor,
                 lm_logits: Tensor | None, lm_hidden: Tensor | None,
                 record: bool = False) -> FusionOutput:
    """Dispatch on kind; carried states default to the inputs untouched."""
    kind = p.kind
    if kind is FusionKind.NONE:
        return FusionOutput(s_t, s_t, c_t)
    if kind is FusionKind.DEEP:
        out = deep_fuse(s_t, lm_hidden, p, record)
    elif kind is FusionKind.COLD:
        out = cold_fuse(s_t, lm_logits, p, record)
    elif kind is FusionKind.CCF1:
        out = ccf1_fuse(s_t, c_t, lm_logits, p, record)
    elif kind is FusionKind.CCF2:
        out = ccf2_fuse(s_t, c_t, lm_logits, p, record)
    else:
        mode = "sum" if kind is FusionKind.CCF3_SUM else "affine"
        out = ccf3_fuse(s_t, c_t, lm_logits, p, mode, record)
    if out.carry_cell is None:
        out.carry_cell = c_t
    return out
