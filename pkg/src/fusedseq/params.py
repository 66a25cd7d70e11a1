"""Named parameters and the store that owns them.

Parameter names are dotted paths ("decoder.fusion.w1") so that subtrees
can be frozen or compared wholesale.  A frozen parameter never receives
gradients and is rejected by the optimizer, which is how the pretrained
LM keeps bitwise-identical weights through fused training.
"""

from __future__ import annotations

from typing import Callable, Iterator

import numpy as np

from .exceptions import ShapeError
from .tensor import Tensor


class Parameter:
    """A named, optionally frozen weight tensor."""

    __slots__ = ("name", "value", "frozen")

    def __init__(self, name: str, value: Tensor, frozen: bool = False):
        self.name = name
        self.value = value
        self.frozen = frozen
        value.requires_grad = not frozen

    @property
    def grad(self) -> np.ndarray | None:
        return self.value.grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.value.zero_grad()

    def set_frozen(self, frozen: bool) -> None:
        self.frozen = frozen
        self.value.requires_grad = not frozen

    def __repr__(self) -> str:
        state = "frozen" if self.frozen else "trainable"
        return f"Parameter({self.name!r}, shape={self.shape}, {state})"


def uniform_init(rng: np.random.Generator, scale: float = 0.1) -> Callable:
    """Weight initializer: uniform(-scale, scale), the toolkit default."""

    def init(shape):
        return rng.uniform(-scale, scale, size=shape)

    return init


class ParamStore:
    """Insertion-ordered registry of parameters, keyed by dotted name."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, data, frozen: bool = False) -> Parameter:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        p = Parameter(name, Tensor(np.asarray(data, dtype=np.float64)), frozen)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def subtree(self, prefix: str) -> list[Parameter]:
        dotted = prefix + "."
        return [p for n, p in self._params.items() if n == prefix or n.startswith(dotted)]

    def trainable(self) -> list[Parameter]:
        return [p for p in self._params.values() if not p.frozen]

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.zero_grad()

    def freeze(self, prefix: str = "") -> None:
        for p in (self.subtree(prefix) if prefix else self):
            p.set_frozen(True)

    def load_values(self, values: dict[str, np.ndarray], prefix: str = "") -> None:
        """Overwrite matching parameters in place; shapes must agree."""
        for name, arr in values.items():
            full = f"{prefix}.{name}" if prefix else name
            if full not in self._params:
                continue
            p = self._params[full]
            if p.value.data.shape != arr.shape:
                raise ShapeError(
                    f"checkpoint value {full} has shape {arr.shape}, "
                    f"parameter has {p.value.data.shape}"
                )
            p.value.data = np.asarray(arr, dtype=np.float64)

    def value_bytes(self, prefix: str = "") -> bytes:
        """Concatenated raw bytes of a subtree, for bitwise comparisons."""
        return b"".join(p.value.data.tobytes() for p in self.subtree(prefix) or self)
