"""LSTM cell, stacked unidirectional runs, and the bidirectional encoder.

The four gate blocks live in one stacked weight matrix of shape
(4d, n + d) ordered input / forget / candidate / output, applied to the
concatenation [x; h].  The forget-gate bias starts at 1.0, which helps
the toy task converge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, ShapeError
from .params import ParamStore
from .tensor import Tensor, _make, concat, linear


@dataclass
class LstmState:
    """Hidden and memory-cell vectors of one cell, same dimension."""

    hidden: Tensor
    cell: Tensor

    @classmethod
    def zeros(cls, dim: int) -> "LstmState":
        return cls(Tensor(np.zeros(dim)), Tensor(np.zeros(dim)))

    @property
    def dim(self) -> int:
        return self.hidden.shape[0]


class LstmCellParams:
    """Stacked gate weights of one cell: w (4d, n+d) and b (4d,)."""

    def __init__(self, store: ParamStore, prefix: str, input_dim: int, state_dim: int,
                 init, forget_bias: float = 1.0):
        self.input_dim = input_dim
        self.state_dim = state_dim
        w = init((4 * state_dim, input_dim + state_dim))
        b = np.zeros(4 * state_dim)
        b[state_dim : 2 * state_dim] = forget_bias
        self.w = store.add(f"{prefix}.w", w)
        self.b = store.add(f"{prefix}.b", b)

    def gate_block(self, gate: str) -> np.ndarray:
        """View of one gate's weight rows, for tests and inspection."""
        order = {"input": 0, "forget": 1, "candidate": 2, "output": 3}
        k = order[gate]
        d = self.state_dim
        return self.w.value.data[k * d : (k + 1) * d]


def _sig(a: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def lstm_cell_step(x: Tensor, prev: LstmState, p: LstmCellParams) -> LstmState:
    """One LSTM recursion: gates from [x; h], new cell and hidden.

    The gate arithmetic is fused into two tape nodes (cell, hidden) with
    hand-written backward rules; the finite-difference oracle pins them.
    """
    if x.shape != (p.input_dim,):
        raise ShapeError(f"lstm input has shape {x.shape}, cell expects ({p.input_dim},)")
    if prev.hidden.shape != (p.state_dim,):
        raise ShapeError(
            f"lstm state has shape {prev.hidden.shape}, cell expects ({p.state_dim},)"
        )
    d = p.state_dim
    z = linear(p.w.value, p.b.value, concat([x, prev.hidden]))
    zd = z.data
    c_prev = prev.cell
    i = _sig(zd[:d])
    f = _sig(zd[d : 2 * d])
    g = np.tanh(zd[2 * d : 3 * d])
    o = _sig(zd[3 * d :])
    cell_data = f * c_prev.data + i * g

    def cell_backward(dc):
        if z.requires_grad:
            dz = np.empty(4 * d)
            dz[:d] = dc * g * i * (1.0 - i)
            dz[d : 2 * d] = dc * c_prev.data * f * (1.0 - f)
            dz[2 * d : 3 * d] = dc * i * (1.0 - g * g)
            dz[3 * d :] = 0.0
            z.accumulate_grad(dz)
        if c_prev.requires_grad:
            c_prev.accumulate_grad(dc * f)

    cell = _make(cell_data, (z, c_prev), cell_backward)
    tanh_c = np.tanh(cell_data)
    hidden_data = o * tanh_c

    def hidden_backward(dh):
        if z.requires_grad:
            dz = np.zeros(4 * d)
            dz[3 * d :] = dh * tanh_c * o * (1.0 - o)
            z.accumulate_grad(dz)
        if cell.requires_grad:
            cell.accumulate_grad(dh * o * (1.0 - tanh_c * tanh_c))

    hidden = _make(hidden_data, (z, cell), hidden_backward)
    return LstmState(hidden, cell)


def run_lstm(frames: list[Tensor], p: LstmCellParams, reverse: bool = False) -> list[Tensor]:
    """Hidden states over a sequence, returned in input order."""
    state = LstmState.zeros(p.state_dim)
    order = range(len(frames) - 1, -1, -1) if reverse else range(len(frames))
    out: list[Tensor | None] = [None] * len(frames)
    for t in order:
        state = lstm_cell_step(frames[t], state, p)
        out[t] = state.hidden
    return out  # type: ignore[return-value]


@dataclass
class EncoderConfig:
    feat_dim: int
    layers: int = 2
    units: int = 32
    projection: int = 32


class BiLstmEncoder:
    """Stack of bidirectional LSTM layers with a linear projection each.

    Output length always equals input length; no subsampling.
    """

    def __init__(self, store: ParamStore, cfg: EncoderConfig, init, prefix: str = "encoder"):
        if cfg.layers < 1:
            raise ConfigError("encoder needs at least one layer")
        self.cfg = cfg
        self.cells_fwd: list[LstmCellParams] = []
        self.cells_bwd: list[LstmCellParams] = []
        self.proj_w = []
        self.proj_b = []
        in_dim = cfg.feat_dim
        for layer in range(cfg.layers):
            self.cells_fwd.append(
                LstmCellParams(store, f"{prefix}.l{layer}.fwd", in_dim, cfg.units, init)
            )
            self.cells_bwd.append(
                LstmCellParams(store, f"{prefix}.l{layer}.bwd", in_dim, cfg.units, init)
            )
            self.proj_w.append(
                store.add(f"{prefix}.l{layer}.proj.w", init((cfg.projection, 2 * cfg.units)))
            )
            self.proj_b.append(store.add(f"{prefix}.l{layer}.proj.b", np.zeros(cfg.projection)))
            in_dim = cfg.projection
        self.out_dim = cfg.projection

    def encode(self, frames: list[Tensor]) -> list[Tensor]:
        if not frames:
            raise ValueError("encoder got an empty frame sequence")
        seq = frames
        for layer in range(self.cfg.layers):
            fwd = run_lstm(seq, self.cells_fwd[layer])
            bwd = run_lstm(seq, self.cells_bwd[layer], reverse=True)
            w, b = self.proj_w[layer].value, self.proj_b[layer].value
            seq = [linear(w, b, concat([f, r])) for f, r in zip(fwd, bwd)]
        return seq


def bilstm_encode(frames: list[Tensor], encoder: BiLstmEncoder) -> list[Tensor]:
    """Functional wrapper over BiLstmEncoder.encode."""
    return encoder.encode(frames)
