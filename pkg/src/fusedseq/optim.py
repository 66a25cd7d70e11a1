"""AdaDelta with plateau-driven epsilon decay.

Update rule per parameter element:

    acc_g  <- rho * acc_g + (1 - rho) * g^2
    delta  <- -sqrt(acc_u + eps) / sqrt(acc_g + eps) * g
    acc_u  <- rho * acc_u + (1 - rho) * delta^2
    value  <- value + delta

A step with an all-zero gradient is a strict no-op (values and both
accumulators untouched), and stepping a frozen parameter is an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, FrozenParameterError
from .params import Parameter


@dataclass
class AdaDeltaState:
    """Per-parameter accumulators; rho and eps are shared knobs."""

    accum_grad_sq: np.ndarray
    accum_update_sq: np.ndarray
    rho: float = 0.95
    eps: float = 1e-8

    @classmethod
    def fresh(cls, shape, rho: float = 0.95, eps: float = 1e-8) -> "AdaDeltaState":
        if not 0.0 < rho < 1.0:
            raise ConfigError(f"rho must lie in (0, 1), got {rho}")
        if eps <= 0.0:
            raise ConfigError(f"eps must be positive, got {eps}")
        return cls(np.zeros(shape), np.zeros(shape), rho, eps)


def adadelta_step(p: Parameter, st: AdaDeltaState) -> None:
    """Apply one AdaDelta update in place and clear the gradient."""
    if p.frozen:
        raise FrozenParameterError(f"cannot step frozen parameter {p.name}")
    g = p.grad
    if g is None:
        return
    if not np.any(g):
        p.zero_grad()
        return
    st.accum_grad_sq *= st.rho
    st.accum_grad_sq += (1.0 - st.rho) * g * g
    delta = -np.sqrt(st.accum_update_sq + st.eps) / np.sqrt(st.accum_grad_sq + st.eps) * g
    st.accum_update_sq *= st.rho
    st.accum_update_sq += (1.0 - st.rho) * delta * delta
    p.value.data = p.value.data + delta
    p.zero_grad()


def eps_decay(st: AdaDeltaState, factor: float) -> AdaDeltaState:
    """Shrink eps multiplicatively; factor must lie strictly in (0, 1)."""
    if not 0.0 < factor < 1.0:
        raise ConfigError(f"eps decay factor must lie in (0, 1), got {factor}")
    st.eps *= factor
    return st


@dataclass
class AdaDelta:
    """Optimizer over a list of trainable parameters."""

    params: list[Parameter]
    rho: float = 0.95
    eps: float = 1e-8
    states: dict[str, AdaDeltaState] = field(init=False)

    def __post_init__(self):
        for p in self.params:
            if p.frozen:
                raise FrozenParameterError(f"frozen parameter {p.name} given to optimizer")
        self.states = {
            p.name: AdaDeltaState.fresh(p.shape, self.rho, self.eps) for p in self.params
        }

    def step(self) -> None:
        for p in self.params:
            adadelta_step(p, self.states[p.name])

    def decay_eps(self, factor: float) -> None:
        for st in self.states.values():
            eps_decay(st, factor)
        self.eps *= factor
